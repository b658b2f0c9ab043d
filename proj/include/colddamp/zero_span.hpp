#pragma once

// Emulation of a spectrum analyzer parked on one frequency (zero span):
// complex demodulation at the center frequency, a 4th-order Butterworth
// low-pass of cutoff rbw/2 on the baseband, square-law detection, and a
// first-order detector with time constant detector_tau.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "colddamp/trajectory.hpp"

namespace colddamp {

struct ZeroSpanTrace {
    std::vector<double> time_s;
    std::vector<double> band_power;  // m^2, in-band variance estimate
    double center_hz = 0.0;
    double rbw_hz = 0.0;
    double detector_tau = 0.0;
};

namespace detail {

// RBJ low-pass biquad over complex samples.
struct ComplexBiquad {
    double b0, b1, b2, a1, a2;
    std::complex<double> x1{0.0}, x2{0.0}, y1{0.0}, y2{0.0};

    ComplexBiquad(double cutoff_hz, double fs, double q) {
        const double w0 = 2.0 * M_PI * cutoff_hz / fs;
        const double alpha = std::sin(w0) / (2.0 * q);
        const double c = std::cos(w0);
        const double a0 = 1.0 + alpha;
        b0 = 0.5 * (1.0 - c) / a0;
        b1 = (1.0 - c) / a0;
        b2 = b0;
        a1 = -2.0 * c / a0;
        a2 = (1.0 - alpha) / a0;
    }

    std::complex<double> step(std::complex<double> x0) {
        const std::complex<double> y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x0;
        y2 = y1;
        y1 = y0;
        return y0;
    }
};

}  // namespace detail

inline ZeroSpanTrace zero_span(const Trajectory& traj, double center_hz, double rbw_hz,
                               double detector_tau_s) {
    if (!(center_hz > 0.0) || !(rbw_hz > 0.0))
        throw std::invalid_argument("zero_span: center and rbw must be > 0");
    if (!(center_hz > rbw_hz))
        throw std::invalid_argument("zero_span: center frequency must exceed the rbw");
    if (!(detector_tau_s >= 0.0))
        throw std::invalid_argument("zero_span: detector time constant must be >= 0");
    const double fs = traj.sample_rate;
    if (!(rbw_hz < fs / 2.0)) throw std::invalid_argument("zero_span: rbw exceeds Nyquist");

    // Butterworth-4 section Q values.
    detail::ComplexBiquad lp1(0.5 * rbw_hz, fs, 0.54119610014620);
    detail::ComplexBiquad lp2(0.5 * rbw_hz, fs, 1.30656296487638);

    ZeroSpanTrace trace;
    trace.center_hz = center_hz;
    trace.rbw_hz = rbw_hz;
    trace.detector_tau = detector_tau_s;
    trace.time_s.resize(traj.size());
    trace.band_power.resize(traj.size());

    const double wc = 2.0 * M_PI * center_hz;
    const double alpha = detector_tau_s > 0.0 ? std::exp(-1.0 / (fs * detector_tau_s)) : 0.0;
    double detector = 0.0;
    bool primed = false;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double t = traj.time_at(i);
        const std::complex<double> mixed =
            traj.displacement[i] * std::complex<double>(std::cos(wc * t), -std::sin(wc * t));
        const std::complex<double> base = lp2.step(lp1.step(mixed));
        const double power = 2.0 * std::norm(base);
        if (!primed) {
            detector = power;
            primed = true;
        } else {
            detector = alpha * detector + (1.0 - alpha) * power;
        }
        trace.time_s[i] = t;
        trace.band_power[i] = detector;
    }
    return trace;
}

}  // namespace colddamp
