#pragma once

// Welch PSD estimation: windowed, overlapped, power-compensated averaged
// periodograms. The FFT is an in-place radix-2, which is why segment
// lengths must be powers of two.

#include <cmath>
#include <complex>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "colddamp/spectrum.hpp"
#include "colddamp/trajectory.hpp"

namespace colddamp {

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void fft_radix2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline std::vector<double> make_window(Window kind, std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
        switch (kind) {
            case Window::Hann: w[i] = 0.5 * (1.0 - std::cos(x)); break;
            case Window::Hamming: w[i] = 0.54 - 0.46 * std::cos(x); break;
            case Window::Rectangular: w[i] = 1.0; break;
        }
    }
    return w;
}

}  // namespace detail

/// Averaged one-sided PSD of a trajectory in m^2/Hz. The overall mean is
/// removed before segmentation; windows are power-compensated so that
/// sum(psd) * df recovers the signal variance.
inline Spectrum welch_psd(const Trajectory& traj, std::size_t segment_length,
                          double overlap_fraction = 0.5, Window window = Window::Hann) {
    if (!detail::is_pow2(segment_length))
        throw std::invalid_argument("welch_psd: segment_length must be a power of two");
    if (!(overlap_fraction >= 0.0 && overlap_fraction <= 0.9))
        throw std::invalid_argument("welch_psd: overlap_fraction must lie in [0, 0.9]");
    if (traj.size() < segment_length) {
        char msg[128];
        std::snprintf(msg, sizeof msg,
                      "welch_psd: trajectory has %zu samples, needs at least %zu",
                      traj.size(), segment_length);
        throw std::invalid_argument(msg);
    }

    const std::size_t n = segment_length;
    const std::size_t hop =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::llround(static_cast<double>(n) * (1.0 - overlap_fraction))));
    const std::vector<double> w = detail::make_window(window, n);
    double wpow = 0.0, wsum = 0.0;
    for (double v : w) {
        wpow += v * v;
        wsum += v;
    }

    const double mean = traj.mean();
    const double fs = traj.sample_rate;
    std::vector<double> acc(n / 2 + 1, 0.0);
    std::vector<std::complex<double>> buf(n);
    std::size_t segments = 0;
    for (std::size_t start = 0; start + n <= traj.size(); start += hop) {
        for (std::size_t i = 0; i < n; ++i)
            buf[i] = {(traj.displacement[start + i] - mean) * w[i], 0.0};
        detail::fft_radix2(buf);
        for (std::size_t k = 0; k <= n / 2; ++k) acc[k] += std::norm(buf[k]);
        ++segments;
    }

    Spectrum spec;
    spec.frequency_hz.resize(n / 2 + 1);
    spec.psd.resize(n / 2 + 1);
    const double scale = 1.0 / (fs * wpow * static_cast<double>(segments));
    for (std::size_t k = 0; k <= n / 2; ++k) {
        spec.frequency_hz[k] = static_cast<double>(k) * fs / static_cast<double>(n);
        const double one_sided = (k == 0 || k == n / 2) ? 1.0 : 2.0;
        spec.psd[k] = one_sided * acc[k] * scale;
    }
    spec.rbw_hz = fs * wpow / (wsum * wsum);  // equivalent noise bandwidth
    spec.averages = segments;
    spec.window = window;
    spec.overlap = overlap_fraction;
    spec.sample_rate = fs;
    return spec;
}

}  // namespace colddamp
