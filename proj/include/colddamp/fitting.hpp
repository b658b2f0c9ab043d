#pragma once

// Estimation on spectra: Lorentzian-plus-background least squares (damped
// Gauss-Newton with the analytic Jacobian), temperature extraction from the
// fitted area, background-ratio and gain-calibration helpers, and a small
// exponential fitter for transient traces.
//
// Fit model, frequencies in Hz:
//     S(f) = P * (w c)^2 / ((c^2 - f^2)^2 + (w f)^2) + B
// i.e. the exact shape of a thermally driven mode, parameterized by center
// c, full width w (FWHM for w << c), on-resonance height P (signed; a dip
// carved into the background fits with P < 0) and flat background B.
// The resonant component integrates to exactly pi P w / 2.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "colddamp/constants.hpp"
#include "colddamp/errors.hpp"
#include "colddamp/oscillator.hpp"
#include "colddamp/spectrum.hpp"

namespace colddamp {

struct LorentzianFit {
    double center_hz = 0.0;
    double width_hz = 0.0;      // FWHM-equivalent parameter of the shape above
    double peak = 0.0;          // m^2/Hz at f = center, background excluded
    double background = 0.0;    // m^2/Hz
    double area = 0.0;          // m^2, resonant component only: pi P w / 2
    double center_err = 0.0;
    double width_err = 0.0;
    double peak_err = 0.0;
    double background_err = 0.0;
    double area_err = 0.0;
    bool converged = false;
};

struct LorentzianGuess {
    double center_hz;
    double width_hz;
    double peak;
    double background;
};

namespace detail {

inline double lorentz_model(double f, double c, double w, double p, double b) {
    const double d = (c * c - f * f) * (c * c - f * f) + w * w * f * f;
    return p * (w * c) * (w * c) / d + b;
}

inline double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    return v[n / 2];
}

inline LorentzianGuess initial_guess(const Spectrum& spec) {
    const std::vector<double>& y = spec.psd;
    const std::size_t n = y.size();
    const double b0 = median_of(y);

    std::size_t ipk = 0;
    double dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(y[i] - b0) > std::abs(dev)) {
            dev = y[i] - b0;
            ipk = i;
        }
    }
    const double ymax = *std::max_element(y.begin(), y.end());
    if (std::abs(dev) <= 1e-3 * std::max(std::abs(b0), 1e-300 + 1e-9 * std::abs(ymax)))
        throw NoPeakError("fit_lorentzian: spectrum has no resolvable peak");

    // half-deviation crossings around the extremum
    const double half = 0.5 * std::abs(dev);
    std::size_t lo = ipk, hi = ipk;
    while (lo > 0 && std::abs(y[lo] - b0) > half) --lo;
    while (hi + 1 < n && std::abs(y[hi] - b0) > half) ++hi;
    double width = spec.frequency_hz[hi] - spec.frequency_hz[lo];
    if (!(width > 0.0)) width = 5.0 * spec.df();

    return LorentzianGuess{spec.frequency_hz[ipk], width, dev, std::max(b0, 0.0)};
}

// One damped Gauss-Newton solve with fixed per-bin sigma.
inline bool lorentz_solve(const Spectrum& spec, const std::vector<double>& sigma, double* th,
                          Eigen::Matrix4d* covariance, double* chi2red) {
    const std::size_t n = spec.size();
    Eigen::VectorXd r(n);
    Eigen::MatrixXd jac(n, 4);
    double lambda = 1e-3;
    bool converged = false;

    auto cost = [&](const double* q) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = (lorentz_model(spec.frequency_hz[i], q[0], q[1], q[2], q[3]) -
                              spec.psd[i]) / sigma[i];
            s += d * d;
        }
        return s;
    };

    double current = cost(th);
    for (int iter = 0; iter < 200; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            const double f = spec.frequency_hz[i];
            const double c = th[0], w = th[1], p = th[2];
            const double nm = (w * c) * (w * c);
            const double dd = (c * c - f * f) * (c * c - f * f) + w * w * f * f;
            r(i) = (p * nm / dd + th[3] - spec.psd[i]) / sigma[i];
            jac(i, 0) = 2.0 * p * c * (w * w * dd - 2.0 * nm * (c * c - f * f)) / (dd * dd) / sigma[i];
            jac(i, 1) = 2.0 * p * w * (c * c * dd - nm * f * f) / (dd * dd) / sigma[i];
            jac(i, 2) = nm / dd / sigma[i];
            jac(i, 3) = 1.0 / sigma[i];
        }
        const Eigen::Matrix4d jtj = jac.transpose() * jac;
        const Eigen::Vector4d jtr = jac.transpose() * r;

        bool stepped = false;
        for (int tries = 0; tries < 12 && !stepped; ++tries) {
            Eigen::Matrix4d damped = jtj;
            for (int k = 0; k < 4; ++k)
                damped(k, k) += lambda * std::max(jtj(k, k), 1e-30);
            const Eigen::Vector4d delta = damped.ldlt().solve(-jtr);
            double trial[4] = {th[0] + delta(0), th[1] + delta(1), th[2] + delta(2),
                               th[3] + delta(3)};
            trial[1] = std::abs(trial[1]);  // width stays positive
            if (!(trial[0] > 0.0)) trial[0] = 0.5 * th[0];
            const double trial_cost = cost(trial);
            if (trial_cost <= current * (1.0 + 1e-14)) {
                double rel_step = 0.0;
                for (int k = 0; k < 4; ++k)
                    rel_step = std::max(rel_step, std::abs(delta(k)) /
                                                      std::max(std::abs(th[k]), 1e-30));
                std::copy(trial, trial + 4, th);
                const bool tiny_step = rel_step < 1e-10;
                const bool tiny_gain = (current - trial_cost) <= 1e-12 * std::max(current, 1e-300);
                current = trial_cost;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (tiny_step || tiny_gain) {
                    converged = true;
                }
            } else {
                lambda *= 4.0;
            }
        }
        if (converged || !stepped) break;
    }

    if (covariance) {
        for (std::size_t i = 0; i < n; ++i) {
            const double f = spec.frequency_hz[i];
            const double c = th[0], w = th[1], p = th[2];
            const double nm = (w * c) * (w * c);
            const double dd = (c * c - f * f) * (c * c - f * f) + w * w * f * f;
            jac(i, 0) = 2.0 * p * c * (w * w * dd - 2.0 * nm * (c * c - f * f)) / (dd * dd) / sigma[i];
            jac(i, 1) = 2.0 * p * w * (c * c * dd - nm * f * f) / (dd * dd) / sigma[i];
            jac(i, 2) = nm / dd / sigma[i];
            jac(i, 3) = 1.0 / sigma[i];
        }
        const Eigen::Matrix4d jtj = jac.transpose() * jac;
        *covariance = jtj.inverse();
        *chi2red = n > 4 ? cost(th) / static_cast<double>(n - 4) : 0.0;
    }
    return converged;
}

}  // namespace detail

/// Weighted least-squares fit of the resonant shape plus flat background.
/// sigma_i ~ psd_i / sqrt(averages) (statistics of averaged periodograms),
/// refined once with model-based weights. Throws NoPeakError on a spectrum
/// with no resolvable deviation from its median.
inline LorentzianFit fit_lorentzian(const Spectrum& spec,
                                    std::optional<LorentzianGuess> init = std::nullopt) {
    if (spec.size() < 8) throw std::invalid_argument("fit_lorentzian: spectrum too short");
    const LorentzianGuess guess = init ? *init : detail::initial_guess(spec);

    const double span = spec.frequency_hz.back() - spec.frequency_hz.front();
    if (span < 5.0 * guess.width_hz)
        throw std::invalid_argument("fit_lorentzian: spectrum must span at least 5 widths");

    const double navg = static_cast<double>(std::max<std::size_t>(spec.averages, 1));
    const double floor_sigma =
        1e-9 * std::max(*std::max_element(spec.psd.begin(), spec.psd.end()), 1e-300);
    std::vector<double> sigma(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i)
        sigma[i] = std::max(std::abs(spec.psd[i]), floor_sigma) / std::sqrt(navg);

    double th[4] = {guess.center_hz, guess.width_hz, guess.peak, guess.background};
    bool ok = detail::lorentz_solve(spec, sigma, th, nullptr, nullptr);

    // re-weight on the fitted model to undo the low-bin bias of raw weights
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double m = detail::lorentz_model(spec.frequency_hz[i], th[0], th[1], th[2], th[3]);
        sigma[i] = std::max(std::abs(m), floor_sigma) / std::sqrt(navg);
    }
    Eigen::Matrix4d cov;
    double chi2red = 0.0;
    ok = detail::lorentz_solve(spec, sigma, th, &cov, &chi2red) && ok;

    LorentzianFit fit;
    fit.center_hz = th[0];
    fit.width_hz = th[1];
    fit.peak = th[2];
    fit.background = std::max(th[3], 0.0);
    fit.area = 0.5 * M_PI * fit.peak * fit.width_hz;
    const double scale = chi2red > 0.0 ? chi2red : 1.0;
    fit.center_err = std::sqrt(std::max(cov(0, 0), 0.0) * scale);
    fit.width_err = std::sqrt(std::max(cov(1, 1), 0.0) * scale);
    fit.peak_err = std::sqrt(std::max(cov(2, 2), 0.0) * scale);
    fit.background_err = std::sqrt(std::max(cov(3, 3), 0.0) * scale);
    // area error with the peak/width correlation
    const double gp = 0.5 * M_PI * fit.width_hz;
    const double gw = 0.5 * M_PI * fit.peak;
    fit.area_err = std::sqrt(std::max(
        gp * gp * cov(2, 2) + gw * gw * cov(1, 1) + 2.0 * gp * gw * cov(1, 2), 0.0) * scale);
    fit.converged = ok;
    return fit;
}

/// Evaluate the fitted model at a frequency.
inline double lorentzian_value(const LorentzianFit& fit, double f_hz) {
    return detail::lorentz_model(f_hz, fit.center_hz, fit.width_hz, fit.peak, fit.background);
}

struct EffectiveTemperature {
    double temperature_k;   // signed; negative when the fit area is negative
    double cooling_factor;  // T / T_fb relative to the mode's bath temperature
};

/// Equipartition temperature of the resonant component: T = M Omega_M^2
/// area / k_B, with the cooling factor referenced to the mode's bath.
inline EffectiveTemperature effective_temperature_from_fit(const LorentzianFit& fit,
                                                           const OscillatorMode& mode) {
    const double scale = std::abs(fit.peak) * fit.width_hz;
    if (!(std::abs(fit.area) > 1e-12 * scale) || fit.area == 0.0)
        throw std::domain_error("effective_temperature_from_fit: degenerate zero-area fit");
    const double t_fb =
        mode.mass_eff * mode.omega_m * mode.omega_m * fit.area / constants::k_boltzmann;
    return EffectiveTemperature{t_fb, mode.temperature / t_fb};
}

/// Background-to-peak ratio of the fitted spectrum (epsilon_b estimator).
inline double estimate_epsilon_b(const LorentzianFit& fit) {
    if (fit.peak == 0.0) throw std::domain_error("estimate_epsilon_b: zero fitted peak");
    return fit.background / fit.peak;
}

/// Relative loop gain from the intensity-modulation and displacement
/// spectral densities at resonance (a multiplicative factor aside).
inline double relative_gain(double intensity_psd_at_resonance, double displacement_psd_at_resonance) {
    if (!(intensity_psd_at_resonance >= 0.0) || !(displacement_psd_at_resonance > 0.0))
        throw std::domain_error("relative_gain: PSDs must be non-negative (displacement > 0)");
    return std::sqrt(intensity_psd_at_resonance / displacement_psd_at_resonance);
}

struct GainCalibration {
    double scale;                // multiplier mapping relative gain to g
    std::vector<double> gains;   // calibrated gains, scale * relative
};

/// Fix the arbitrary factor in relative gains by regressing the fitted
/// width ratio minus one against them (slope forced to one).
inline GainCalibration normalize_gain(const std::vector<double>& relative_gains,
                                      const std::vector<double>& fitted_width_ratios) {
    if (relative_gains.size() != fitted_width_ratios.size() || relative_gains.empty())
        throw std::invalid_argument("normalize_gain: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < relative_gains.size(); ++i) {
        num += relative_gains[i] * (fitted_width_ratios[i] - 1.0);
        den += relative_gains[i] * relative_gains[i];
    }
    if (!(den > 0.0)) throw std::domain_error("normalize_gain: all relative gains are zero");
    GainCalibration cal;
    cal.scale = num / den;
    cal.gains.reserve(relative_gains.size());
    for (double r : relative_gains) cal.gains.push_back(cal.scale * r);
    return cal;
}

struct ExponentialFit {
    double offset = 0.0;     // a
    double amplitude = 0.0;  // b (signed)
    double rate = 0.0;       // r, in 1/s
    bool converged = false;

    double time_constant() const { return 1.0 / rate; }
};

/// Least-squares fit of y = a + b exp(-r t); covers decays (b > 0) and
/// saturating rises (b < 0).
inline ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size() || t.size() < 4)
        throw std::invalid_argument("fit_exponential: need matching series of >= 4 points");
    const std::size_t n = t.size();

    // tail mean as the offset guess, 1/e crossing as the rate guess
    double tail = 0.0;
    const std::size_t tail_start = n - std::max<std::size_t>(1, n / 10);
    for (std::size_t i = tail_start; i < n; ++i) tail += y[i];
    tail /= static_cast<double>(n - tail_start);
    const double b0 = y[0] - tail;
    double t_e = t[n / 2];
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(y[i] - tail) < std::abs(b0) / M_E) {
            t_e = t[i];
            break;
        }
    }
    double th[3] = {tail, b0, t_e > t[0] ? 1.0 / (t_e - t[0]) : 1.0 / (t[n - 1] - t[0])};

    auto cost = [&](const double* q) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = q[0] + q[1] * std::exp(-q[2] * (t[i] - t[0])) - y[i];
            s += d * d;
        }
        return s;
    };

    Eigen::MatrixXd jac(n, 3);
    Eigen::VectorXd r(n);
    double lambda = 1e-3;
    double current = cost(th);
    bool converged = false;
    for (int iter = 0; iter < 200 && !converged; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::exp(-th[2] * (t[i] - t[0]));
            r(i) = th[0] + th[1] * e - y[i];
            jac(i, 0) = 1.0;
            jac(i, 1) = e;
            jac(i, 2) = -th[1] * (t[i] - t[0]) * e;
        }
        const Eigen::Matrix3d jtj = jac.transpose() * jac;
        const Eigen::Vector3d jtr = jac.transpose() * r;
        bool stepped = false;
        for (int tries = 0; tries < 12 && !stepped; ++tries) {
            Eigen::Matrix3d damped = jtj;
            for (int k = 0; k < 3; ++k) damped(k, k) += lambda * std::max(jtj(k, k), 1e-30);
            const Eigen::Vector3d delta = damped.ldlt().solve(-jtr);
            double trial[3] = {th[0] + delta(0), th[1] + delta(1), th[2] + delta(2)};
            const double trial_cost = cost(trial);
            if (trial_cost <= current * (1.0 + 1e-14)) {
                double rel = 0.0;
                for (int k = 0; k < 3; ++k)
                    rel = std::max(rel, std::abs(delta(k)) / std::max(std::abs(th[k]), 1e-30));
                std::copy(trial, trial + 3, th);
                if (rel < 1e-10 || (current - trial_cost) <= 1e-12 * std::max(current, 1e-300))
                    converged = true;
                current = trial_cost;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
            } else {
                lambda *= 4.0;
            }
        }
        if (!stepped) break;
    }

    // report against t = 0 rather than the first sample
    ExponentialFit fit;
    fit.rate = th[2];
    fit.amplitude = th[1] * std::exp(th[2] * t[0]);
    fit.offset = th[0];
    fit.converged = converged;
    return fit;
}

}  // namespace colddamp
