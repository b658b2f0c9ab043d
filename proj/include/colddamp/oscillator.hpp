#pragma once

#include <cmath>
#include <stdexcept>

#include "colddamp/constants.hpp"
#include "colddamp/errors.hpp"

namespace colddamp {

/// One mechanical mode: effective mass, angular resonance frequency,
/// angular damping rate and bath temperature. All SI.
struct OscillatorMode {
    double mass_eff;     // kg
    double omega_m;      // rad/s
    double gamma;        // rad/s
    double temperature;  // K

    OscillatorMode(double mass_eff_, double omega_m_, double gamma_, double temperature_)
        : mass_eff(mass_eff_), omega_m(omega_m_), gamma(gamma_), temperature(temperature_) {
        if (!(mass_eff > 0.0)) throw std::domain_error("OscillatorMode: mass_eff must be > 0");
        if (!(omega_m > 0.0)) throw std::domain_error("OscillatorMode: omega_m must be > 0");
        if (!(gamma > 0.0)) throw std::domain_error("OscillatorMode: gamma must be > 0");
        if (!(temperature >= 0.0)) throw std::domain_error("OscillatorMode: temperature must be >= 0");
    }

    static OscillatorMode from_quality(double mass_eff, double omega_m, double quality,
                                       double temperature) {
        if (!(quality > 0.0)) throw std::domain_error("OscillatorMode: quality must be > 0");
        return OscillatorMode(mass_eff, omega_m, omega_m / quality, temperature);
    }

    double quality() const { return omega_m / gamma; }

    /// Equipartition variance k_B T / (M Omega_M^2), in m^2.
    double thermal_variance() const {
        return constants::k_boltzmann * temperature / (mass_eff * omega_m * omega_m);
    }

    double thermal_rms() const { return std::sqrt(thermal_variance()); }
};

/// A dimensionless test oscillator: M = Omega_M = 1 and k_B T = 1,
/// so the thermal variance (and rms) is exactly 1.
inline OscillatorMode natural_mode(double quality) {
    return OscillatorMode::from_quality(1.0, 1.0, quality, 1.0 / constants::k_boltzmann);
}

/// Loss model entering the susceptibility through the loss angle phi(Omega):
/// viscous phi = Gamma Omega / Omega_M^2, structural phi = const.
struct DampingModel {
    enum class Kind { Viscous, Structural };

    Kind kind = Kind::Viscous;
    double phi_const = 0.0;  // loss angle, Structural only

    static DampingModel viscous() { return DampingModel{Kind::Viscous, 0.0}; }

    static DampingModel structural(double phi_const) {
        if (!(phi_const > 0.0) || phi_const >= 0.1)
            throw std::domain_error("DampingModel: structural loss angle must be in (0, 0.1)");
        return DampingModel{Kind::Structural, phi_const};
    }

    double loss_angle(const OscillatorMode& mode, double omega) const {
        if (kind == Kind::Viscous) return mode.gamma * omega / (mode.omega_m * mode.omega_m);
        return phi_const;
    }

    bool is_viscous() const { return kind == Kind::Viscous; }
};

/// Dimensionless feedback gain; g = 0 means open loop. Negative gain
/// (anti-damping) is rejected.
struct FeedbackGain {
    double g = 0.0;

    FeedbackGain() = default;
    explicit FeedbackGain(double g_) : g(g_) {
        if (!(g >= 0.0)) throw std::domain_error("FeedbackGain: g must be >= 0");
    }
};

}  // namespace colddamp
