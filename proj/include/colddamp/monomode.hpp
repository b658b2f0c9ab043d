#pragma once

// Single-mode thermal noise theory and its cold-damped (velocity feedback)
// counterpart.
//
// Spectral convention used throughout the library: displacement and force
// PSDs are two-sided in angular frequency, normalized so that
//
//     <x^2> = (1/2pi) Int_-inf^+inf S[Omega] dOmega = (1/pi) Int_0^inf S[Omega] dOmega.
//
// A white force of delta correlation <F(t)F(t')> = A delta(t-t') has S_F = A
// in this convention. Instrument-style one-sided spectra in m^2/Hz are
// obtained with psd_one_sided_hz() below; the conversion factor that keeps
// the variance integral invariant is exactly 2 (the one-sided folding; the
// rad/s -> Hz axis change cancels against the 1/2pi of the convention).

#include <cmath>
#include <complex>

#include "colddamp/constants.hpp"
#include "colddamp/errors.hpp"
#include "colddamp/oscillator.hpp"

namespace colddamp {

inline double hz_from_rad(double omega) { return omega / (2.0 * M_PI); }
inline double rad_from_hz(double f) { return 2.0 * M_PI * f; }

/// Two-sided angular-frequency PSD -> one-sided PSD in 1/Hz units
/// (value conversion; evaluate the input at Omega = 2 pi f).
inline double psd_one_sided_hz(double psd_two_sided_rad) { return 2.0 * psd_two_sided_rad; }

inline double psd_two_sided_rad(double psd_one_sided_hz) { return 0.5 * psd_one_sided_hz; }

namespace detail {
inline void require_positive_omega(double omega) {
    if (!(omega > 0.0)) throw std::domain_error("analysis frequency must be > 0");
}
}  // namespace detail

/// Mechanical susceptibility chi[Omega] = 1 / (M (Omega_M^2 - Omega^2
/// - i Omega_M^2 phi(Omega))), in m/N.
inline std::complex<double> susceptibility(const OscillatorMode& mode, const DampingModel& damping,
                                           double omega) {
    detail::require_positive_omega(omega);
    const double wm2 = mode.omega_m * mode.omega_m;
    const std::complex<double> inv_chi(mode.mass_eff * (wm2 - omega * omega),
                                       -mode.mass_eff * wm2 * damping.loss_angle(mode, omega));
    return 1.0 / inv_chi;
}

/// Thermal (Langevin) force PSD from the fluctuation-dissipation relation,
/// -(2 k_B T / Omega) Im(1/chi). Flat and equal to 2 M Gamma k_B T for
/// viscous loss. N^2/(rad/s), two-sided.
inline double langevin_force_psd(const OscillatorMode& mode, const DampingModel& damping,
                                 double omega) {
    detail::require_positive_omega(omega);
    if (mode.temperature == 0.0) return 0.0;
    const double kbt = constants::k_boltzmann * mode.temperature;
    const double phi = damping.loss_angle(mode, omega);
    return 2.0 * kbt * mode.mass_eff * mode.omega_m * mode.omega_m * phi / omega;
}

/// Open-loop displacement noise PSD |chi|^2 S_F, m^2/(rad/s) two-sided.
inline double thermal_psd(const OscillatorMode& mode, const DampingModel& damping, double omega) {
    const std::complex<double> chi = susceptibility(mode, damping, omega);
    return std::norm(chi) * langevin_force_psd(mode, damping, omega);
}

inline double thermal_psd(const OscillatorMode& mode, double omega) {
    return thermal_psd(mode, DampingModel::viscous(), omega);
}

inline double effective_damping(double gamma, FeedbackGain gain) { return (1.0 + gain.g) * gamma; }

inline double effective_temperature(double temperature, FeedbackGain gain) {
    return temperature / (1.0 + gain.g);
}

namespace detail {
inline void require_viscous(const DampingModel& damping, const char* op) {
    if (!damping.is_viscous())
        throw UnsupportedModelError(std::string(op) +
                                    ": the closed-loop theory is defined for viscous damping only");
}
}  // namespace detail

/// Closed-loop susceptibility 1 / (M (Omega_M^2 - Omega^2 - i (1+g) Gamma Omega)).
/// Defined for viscous damping only.
inline std::complex<double> closed_loop_susceptibility(const OscillatorMode& mode,
                                                       FeedbackGain gain, double omega) {
    detail::require_positive_omega(omega);
    const double wm2 = mode.omega_m * mode.omega_m;
    const double gamma_fb = effective_damping(mode.gamma, gain);
    const std::complex<double> inv_chi(mode.mass_eff * (wm2 - omega * omega),
                                       -mode.mass_eff * gamma_fb * omega);
    return 1.0 / inv_chi;
}

inline std::complex<double> closed_loop_susceptibility(const OscillatorMode& mode,
                                                       const DampingModel& damping,
                                                       FeedbackGain gain, double omega) {
    detail::require_viscous(damping, "closed_loop_susceptibility");
    return closed_loop_susceptibility(mode, gain, omega);
}

/// Cold-damped displacement PSD: same Langevin drive, widened Lorentzian of
/// width (1+g) Gamma. Integrates to thermal_variance()/(1+g).
inline double closed_loop_psd(const OscillatorMode& mode, FeedbackGain gain, double omega) {
    const std::complex<double> chi_fb = closed_loop_susceptibility(mode, gain, omega);
    return std::norm(chi_fb) * langevin_force_psd(mode, DampingModel::viscous(), omega);
}

/// Amplitude noise reduction R[Omega] = sqrt(S_x^T / S_x^fb); equals 1+g at
/// resonance and tends to 1 off resonance.
inline double noise_reduction(const OscillatorMode& mode, FeedbackGain gain, double omega) {
    detail::require_positive_omega(omega);
    const double d = mode.omega_m * mode.omega_m - omega * omega;
    const double gamma_fb = effective_damping(mode.gamma, gain);
    return std::sqrt((d * d + gamma_fb * gamma_fb * omega * omega) /
                     (d * d + mode.gamma * mode.gamma * omega * omega));
}

}  // namespace colddamp
