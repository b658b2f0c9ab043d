#pragma once

// Departures from the ideal single-mode picture: flat background noise from
// the other acoustic modes, the multimode effective susceptibility with its
// beam-overlap weights, and the electronic noise injected by the loop.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "colddamp/monomode.hpp"
#include "colddamp/oscillator.hpp"

namespace colddamp {

/// Flat displacement-noise environment around one resonance. The canonical
/// stored quantity is the background PSD s_b (two-sided, m^2/(rad/s));
/// epsilon_b = s_b / S_x^T[Omega_M] is derived against a given mode.
/// s_e is the loop's electronic noise referred to displacement, same units.
struct NoiseEnvironment {
    double s_b = 0.0;
    double s_e = 0.0;

    NoiseEnvironment() = default;
    NoiseEnvironment(double s_b_, double s_e_) : s_b(s_b_), s_e(s_e_) {
        if (!(s_b >= 0.0) || !(s_e >= 0.0))
            throw std::domain_error("NoiseEnvironment: noise PSDs must be >= 0");
    }

    static NoiseEnvironment from_background_ratio(double epsilon_b, const OscillatorMode& mode,
                                                  double s_e = 0.0) {
        if (!(epsilon_b >= 0.0))
            throw std::domain_error("NoiseEnvironment: epsilon_b must be >= 0");
        return NoiseEnvironment(epsilon_b * thermal_psd(mode, mode.omega_m), s_e);
    }

    static NoiseEnvironment from_electronic_ratio(double epsilon_b, double se_ratio,
                                                  const OscillatorMode& mode) {
        const double peak = thermal_psd(mode, mode.omega_m);
        return NoiseEnvironment(epsilon_b * peak, se_ratio * peak);
    }

    double epsilon_b(const OscillatorMode& mode) const {
        return s_b / thermal_psd(mode, mode.omega_m);
    }

    double se_ratio(const OscillatorMode& mode) const {
        return s_e / thermal_psd(mode, mode.omega_m);
    }
};

/// Acoustic mode stack seen by the beam: each mode enters the effective
/// susceptibility with its squared spatial overlap against the beam profile.
struct ModalDecomposition {
    struct Entry {
        OscillatorMode mode;
        double weight;  // squared overlap, dimensionless
    };

    explicit ModalDecomposition(std::vector<Entry> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) throw std::domain_error("ModalDecomposition: needs at least one mode");
        for (const Entry& e : entries_)
            if (!(e.weight >= 0.0))
                throw std::domain_error("ModalDecomposition: weights must be >= 0");
        std::stable_sort(entries_.begin(), entries_.end(),
                         [](const Entry& a, const Entry& b) { return a.mode.omega_m < b.mode.omega_m; });
    }

    static ModalDecomposition single(const OscillatorMode& mode, double weight = 1.0) {
        return ModalDecomposition({Entry{mode, weight}});
    }

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    const Entry& operator[](std::size_t i) const { return entries_[i]; }

private:
    std::vector<Entry> entries_;
};

/// Open-loop spectrum with the flat background added.
inline double open_loop_psd_with_background(const OscillatorMode& mode,
                                            const NoiseEnvironment& env, double omega) {
    return thermal_psd(mode, omega) + env.s_b;
}

/// Closed-loop spectrum with the background: the resonant Lorentzian plus
/// the background divided by R^2 (the loop reacts to the background it
/// measures). Identically equal to open_loop_psd_with_background / R^2.
inline double closed_loop_psd_with_background(const OscillatorMode& mode,
                                              const NoiseEnvironment& env, FeedbackGain gain,
                                              double omega) {
    const double r = noise_reduction(mode, gain, omega);
    return closed_loop_psd(mode, gain, omega) + env.s_b / (r * r);
}

/// Cooling factor T/T_fb of the resonant mode once the background is folded
/// into the measured area: (1+g)/(1 - epsilon_b g (2+g)). The value is
/// returned signed; negative_temperature marks a non-positive denominator
/// (the loop digs below the background).
struct CoolingFactor {
    double value;
    bool negative_temperature;
};

inline CoolingFactor cooling_factor(FeedbackGain gain, double epsilon_b) {
    if (!(epsilon_b >= 0.0)) throw std::domain_error("cooling_factor: epsilon_b must be >= 0");
    const double denom = 1.0 - epsilon_b * gain.g * (2.0 + gain.g);
    return CoolingFactor{(1.0 + gain.g) / denom, denom <= 0.0};
}

/// Scalar field sampled on a rectangular grid (row-major over y, then x).
struct ScalarField2D {
    std::vector<double> x;       // strictly increasing
    std::vector<double> y;       // strictly increasing
    std::vector<double> values;  // size x.size() * y.size(), index = iy * nx + ix

    double at(std::size_t ix, std::size_t iy) const { return values[iy * x.size() + ix]; }
};

struct OverlapResult {
    double value;
    bool grid_converged;  // false: halving the grid moved the result by > 0.1%
};

namespace detail {

inline double trapezoid_2d(const std::vector<double>& x, const std::vector<double>& y,
                           const ScalarField2D& f, const ScalarField2D& g, std::size_t stride) {
    const std::size_t nx = x.size(), ny = y.size();
    double total = 0.0;
    for (std::size_t iy = 0; iy + stride < ny; iy += stride) {
        const double dy = y[iy + stride] - y[iy];
        for (std::size_t ix = 0; ix + stride < nx; ix += stride) {
            const double dx = x[ix + stride] - x[ix];
            double cell = 0.0;
            for (std::size_t cy : {iy, iy + stride})
                for (std::size_t cx : {ix, ix + stride}) cell += f.at(cx, cy) * g.at(cx, cy);
            total += 0.25 * cell * dx * dy;
        }
    }
    return total;
}

}  // namespace detail

/// <f,g> = Int f(r) g(r) d^2r over the sampled surface, by the trapezoid
/// rule on the supplied grid. The caller owns grid adequacy; the result
/// carries a convergence flag from a half-resolution comparison.
inline OverlapResult spatial_overlap(const ScalarField2D& f, const ScalarField2D& g) {
    if (f.x.size() != g.x.size() || f.y.size() != g.y.size())
        throw std::domain_error("spatial_overlap: fields must share one grid");
    if (f.x.size() < 3 || f.y.size() < 3)
        throw std::domain_error("spatial_overlap: grid too small");
    if (f.values.size() != f.x.size() * f.y.size() || g.values.size() != f.values.size())
        throw std::domain_error("spatial_overlap: field size does not match grid");

    const double full = detail::trapezoid_2d(f.x, f.y, f, g, 1);
    const double half = detail::trapezoid_2d(f.x, f.y, f, g, 2);
    const double scale = std::max(std::abs(full), 1e-300);
    return OverlapResult{full, std::abs(full - half) <= 1e-3 * scale};
}

/// Effective susceptibility of the mode stack, sum of chi_n weighted by the
/// squared beam overlaps.
inline std::complex<double> multimode_susceptibility(const ModalDecomposition& decomp,
                                                     double omega) {
    std::complex<double> chi = 0.0;
    for (const auto& e : decomp.entries())
        chi += e.weight * susceptibility(e.mode, DampingModel::viscous(), omega);
    return chi;
}

/// Closed-loop effective susceptibility 1/(1/chi_eff - i M Gamma Omega g),
/// with M and Gamma of the designated resonant mode.
inline std::complex<double> multimode_closed_loop_susceptibility(const ModalDecomposition& decomp,
                                                                 std::size_t resonant_index,
                                                                 FeedbackGain gain, double omega) {
    if (resonant_index >= decomp.size())
        throw std::domain_error("multimode_closed_loop_susceptibility: bad resonant index");
    const OscillatorMode& res = decomp[resonant_index].mode;
    const std::complex<double> inv_chi = 1.0 / multimode_susceptibility(decomp, omega);
    const std::complex<double> loop(0.0, -res.mass_eff * res.gamma * omega * gain.g);
    return 1.0 / (inv_chi + loop);
}

/// Frequency-resolved effective temperature of the cold-damped stack and
/// whether a single temperature describes it (equilibrium). Constant to
/// 0.1% across the grid counts as equilibrium.
struct TemperatureProfile {
    std::vector<double> temperatures;  // K, one per grid frequency
    bool is_equilibrium;
};

inline TemperatureProfile equilibrium_temperature_profile(const ModalDecomposition& decomp,
                                                          std::size_t resonant_index,
                                                          FeedbackGain gain,
                                                          std::span<const double> omega_grid) {
    if (resonant_index >= decomp.size())
        throw std::domain_error("equilibrium_temperature_profile: bad resonant index");
    if (omega_grid.empty())
        throw std::domain_error("equilibrium_temperature_profile: empty grid");
    const OscillatorMode& res = decomp[resonant_index].mode;

    TemperatureProfile profile;
    profile.temperatures.reserve(omega_grid.size());
    for (double omega : omega_grid) {
        const std::complex<double> inv_chi = 1.0 / multimode_susceptibility(decomp, omega);
        const double denom =
            1.0 - res.mass_eff * res.gamma * omega * gain.g / inv_chi.imag();
        profile.temperatures.push_back(res.temperature / denom);
    }

    const auto [lo, hi] =
        std::minmax_element(profile.temperatures.begin(), profile.temperatures.end());
    const double mid = 0.5 * (*lo + *hi);
    profile.is_equilibrium = std::abs(*hi - *lo) <= 1e-3 * std::abs(mid);
    return profile;
}

/// Full closed-loop spectrum including the loop's own electronic noise fed
/// back onto the mirror: S_x^fb + |M Gamma Omega g chi_fb|^2 s_e.
inline double closed_loop_psd_with_electronics(const OscillatorMode& mode,
                                               const NoiseEnvironment& env, FeedbackGain gain,
                                               double omega) {
    const std::complex<double> chi_fb = closed_loop_susceptibility(mode, gain, omega);
    const double coupling = mode.mass_eff * mode.gamma * omega * gain.g;
    return closed_loop_psd_with_background(mode, env, gain, omega) +
           coupling * coupling * std::norm(chi_fb) * env.s_e;
}

/// Resonant amplitude noise reduction with electronic noise,
/// (1+g)/sqrt(1 + g^2 se_ratio), where se_ratio = S_e / S_x^T[Omega_M].
inline double amplitude_reduction_with_electronics(FeedbackGain gain, double se_ratio) {
    if (!(se_ratio >= 0.0))
        throw std::domain_error("amplitude_reduction_with_electronics: se_ratio must be >= 0");
    return (1.0 + gain.g) / std::sqrt(1.0 + gain.g * gain.g * se_ratio);
}

}  // namespace colddamp
