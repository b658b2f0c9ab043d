#pragma once

// Closed-form transients of the cold-damped oscillator: variance relaxation
// when the loop switches, the build-up/decay of a resonant drive, and the
// steady cycle of periodic (cyclic) cooling. All formulas assume viscous
// damping and Gamma << Omega_M.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "colddamp/monomode.hpp"
#include "colddamp/oscillator.hpp"

namespace colddamp {

/// A loop or drive toggle at a given time.
struct SwitchEvent {
    enum class Kind { LoopOn, LoopOff, DriveOn, DriveOff };

    double time;  // s, >= 0
    Kind kind;
};

inline void validate_schedule(const std::vector<SwitchEvent>& schedule) {
    double prev = -1.0;
    for (const SwitchEvent& e : schedule) {
        if (!(e.time >= 0.0)) throw std::domain_error("schedule times must be >= 0");
        if (!(e.time > prev)) throw std::domain_error("schedule times must be strictly increasing");
        prev = e.time;
    }
}

/// Resonant excitation F0 cos(Omega t + phi).
struct MonochromaticDrive {
    double amplitude;  // N
    double omega;      // rad/s
    double phase;      // rad

    MonochromaticDrive(double amplitude_, double omega_, double phase_ = 0.0)
        : amplitude(amplitude_), omega(omega_), phase(phase_) {
        if (!(amplitude >= 0.0)) throw std::domain_error("MonochromaticDrive: amplitude must be >= 0");
        if (!(omega >= 0.0)) throw std::domain_error("MonochromaticDrive: omega must be >= 0");
    }
};

/// Variance after the loop closes at t = 0 on a thermal-equilibrium state:
/// (dx_T^2/(1+g)) (1 + g exp(-Gamma_fb t)). Time constant 1/Gamma_fb.
inline double variance_after_loop_on(const OscillatorMode& mode, FeedbackGain gain, double t) {
    if (!(t >= 0.0)) throw std::domain_error("variance_after_loop_on: t must be >= 0");
    const double gamma_fb = effective_damping(mode.gamma, gain);
    return mode.thermal_variance() / (1.0 + gain.g) * (1.0 + gain.g * std::exp(-gamma_fb * t));
}

/// Variance after the loop opens at t = 0 on a cooled steady state:
/// dx_T^2 (1 - (g/(1+g)) exp(-Gamma t)). Time constant 1/Gamma.
inline double variance_after_loop_off(const OscillatorMode& mode, FeedbackGain gain, double t) {
    if (!(t >= 0.0)) throw std::domain_error("variance_after_loop_off: t must be >= 0");
    return mode.thermal_variance() * (1.0 - gain.g / (1.0 + gain.g) * std::exp(-mode.gamma * t));
}

/// Time-domain response to a force impulse at t = 0:
/// sin(Omega_M t)/(M Omega_M) exp(-Gamma_fb t / 2), in m/(N s).
inline double impulse_response(const OscillatorMode& mode, FeedbackGain gain, double t) {
    if (!(t >= 0.0)) throw std::domain_error("impulse_response: t must be >= 0");
    const double gamma_fb = effective_damping(mode.gamma, gain);
    return std::sin(mode.omega_m * t) / (mode.mass_eff * mode.omega_m) *
           std::exp(-0.5 * gamma_fb * t);
}

namespace detail {
inline void require_resonant(const OscillatorMode& mode, const MonochromaticDrive& drive,
                             const char* op) {
    if (std::abs(drive.omega - mode.omega_m) > 1e-9 * mode.omega_m)
        throw UnsupportedModelError(std::string(op) +
                                    ": closed form is derived for a drive at Omega_M only");
}
}  // namespace detail

/// Envelope amplitude while a resonant drive is on, switched on at t = 0:
/// (F0 / (M Omega_M Gamma')) (1 - exp(-Gamma' t / 2)), Gamma' = (1+g) Gamma.
/// Envelope quantities are independent of the drive phase.
inline double forced_response_on(const OscillatorMode& mode, FeedbackGain gain,
                                 const MonochromaticDrive& drive, double t) {
    detail::require_resonant(mode, drive, "forced_response_on");
    if (!(t >= 0.0)) throw std::domain_error("forced_response_on: t must be >= 0");
    const double gamma_fb = effective_damping(mode.gamma, gain);
    return drive.amplitude / (mode.mass_eff * mode.omega_m * gamma_fb) *
           (1.0 - std::exp(-0.5 * gamma_fb * t));
}

/// Resonant spectral power during drive build-up, (1/4) A(t)^2 with A from
/// forced_response_on.
inline double forced_power_on(const OscillatorMode& mode, FeedbackGain gain,
                              const MonochromaticDrive& drive, double t) {
    const double a = forced_response_on(mode, gain, drive, t);
    return 0.25 * a * a;
}

/// Envelope amplitude after the drive is cut at t = 0 from the forced steady
/// state: (F0 / (M Omega_M Gamma')) exp(-Gamma' t / 2).
inline double forced_response_off(const OscillatorMode& mode, FeedbackGain gain,
                                  const MonochromaticDrive& drive, double t) {
    detail::require_resonant(mode, drive, "forced_response_off");
    if (!(t >= 0.0)) throw std::domain_error("forced_response_off: t must be >= 0");
    const double gamma_fb = effective_damping(mode.gamma, gain);
    return drive.amplitude / (mode.mass_eff * mode.omega_m * gamma_fb) *
           std::exp(-0.5 * gamma_fb * t);
}

/// Resonant spectral power during free decay, (1/4) A(0)^2 exp(-Gamma' t).
inline double forced_power_off(const OscillatorMode& mode, FeedbackGain gain,
                               const MonochromaticDrive& drive, double t) {
    const double a = forced_response_off(mode, gain, drive, t);
    return 0.25 * a * a;
}

/// One steady cycle of periodic cooling: cool for t_cool at gain g, free for
/// t_free, repeated. The cycle-start variance is the fixed point of the
/// two-phase affine map; the average is the exact time integral over one
/// period.
struct CyclicCoolingResult {
    double average_variance;      // m^2, time-averaged over one steady cycle
    double duty_fraction;         // t_cool / (t_cool + t_free)
    double cycle_start_variance;  // m^2, at the start of the cooling phase
    double cycle_min_variance;    // m^2, at the end of the cooling phase
};

inline CyclicCoolingResult cyclic_cooling_average(const OscillatorMode& mode, FeedbackGain gain,
                                                  double t_cool, double t_free) {
    if (!(t_cool >= 0.0) || !(t_free >= 0.0))
        throw std::domain_error("cyclic_cooling_average: phase durations must be >= 0");
    const double period = t_cool + t_free;
    if (!(period > 0.0))
        throw std::domain_error("cyclic_cooling_average: cycle period must be > 0");

    const double v_hot = mode.thermal_variance();
    const double v_cold = v_hot / (1.0 + gain.g);
    const double gamma_fb = effective_damping(mode.gamma, gain);
    const double a = std::exp(-gamma_fb * t_cool);  // cooling-phase contraction
    const double b = std::exp(-mode.gamma * t_free);  // free-phase contraction

    // v0 -> cooling -> v1 -> free -> back to v0 in the steady cycle.
    double v0;
    if (a * b == 1.0) {
        v0 = v_hot;  // both phases degenerate (t_cool = t_free = 0 excluded above)
    } else {
        v0 = (b * (1.0 - a) * v_cold + (1.0 - b) * v_hot) / (1.0 - a * b);
    }
    const double v1 = v_cold + (v0 - v_cold) * a;

    const double cool_integral =
        v_cold * t_cool + (v0 - v_cold) * (gamma_fb > 0.0 ? (1.0 - a) / gamma_fb : 0.0);
    const double free_integral =
        v_hot * t_free + (v1 - v_hot) * (mode.gamma > 0.0 ? (1.0 - b) / mode.gamma : 0.0);

    return CyclicCoolingResult{(cool_integral + free_integral) / period, t_cool / period, v0, v1};
}

}  // namespace colddamp
