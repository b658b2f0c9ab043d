#pragma once

// Time-domain simulation of the mirror + feedback experiment.
//
// Every configuration is a linear time-invariant stochastic system on each
// interval between switch events, so the integrator is exact: the state
// propagates with the matrix exponential of the drift and the process noise
// is drawn with the exact interval covariance (Van Loan construction). No
// step-size bias enters any statistic.
//
// State layout: (x_i, v_i) per mode, then two loop-filter states when a
// bandpass is configured, then a (cos, sin) pair generating the coherent
// drive when one is configured. Feedback couples through the beam profile
// weights, so a multimode stack sees the loop exactly as the measured total
// displacement does.

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "colddamp/constants.hpp"
#include "colddamp/environment.hpp"
#include "colddamp/errors.hpp"
#include "colddamp/monomode.hpp"
#include "colddamp/rng.hpp"
#include "colddamp/trajectory.hpp"
#include "colddamp/transient.hpp"

namespace colddamp {

/// Second-order bandpass inserted in the loop electronics,
/// H(s) = bw s / (s^2 + bw s + wc^2): unit gain and zero phase at wc.
struct LoopBandpass {
    double center;     // rad/s
    double bandwidth;  // rad/s

    std::complex<double> response(double omega) const {
        const std::complex<double> iw(0.0, omega);
        return bandwidth * iw / (center * center - omega * omega + bandwidth * iw);
    }
};

struct FeedbackLoop {
    double gain = 0.0;                 // dimensionless g
    double phase = 0.0;                // rad; 0 = pure viscous, pi/2 = pure spring
    double electronic_noise_psd = 0.0; // s_e, displacement-referred, m^2/(rad/s) two-sided
    std::optional<LoopBandpass> bandpass;
    // Either option below switches run() to the sampled-loop integrator
    // (zero-order-hold force per step); the bandpass is not applied there.
    double delay = 0.0;                // s
    bool finite_difference_velocity = false;  // estimate v from successive samples
};

/// Radiation-pressure force of a beam of photon flux I (photons/s) and wave
/// vector k: 2 hbar k I.
inline double radiation_pressure_force(double photon_flux, double wavevector) {
    if (!(photon_flux >= 0.0))
        throw std::domain_error("radiation_pressure_force: photon flux must be >= 0");
    return 2.0 * constants::hbar * wavevector * photon_flux;
}

inline double photon_flux_from_power(double power_w, double wavelength_m) {
    const double omega = 2.0 * M_PI * constants::speed_of_light / wavelength_m;
    return power_w / (constants::hbar * omega);
}

/// Instantaneous feedback force -M Gamma g [cos(theta)(v + n_e) +
/// sin(theta) Omega_M x]: a velocity force at theta = 0, rotated towards a
/// spring force as theta grows. M, Gamma, Omega_M are the loop's reference
/// mode; n_e is a velocity-referred electronic noise sample.
inline double feedback_force(const FeedbackLoop& loop, const OscillatorMode& mode,
                             double velocity_estimate, double displacement = 0.0,
                             double electronic_noise = 0.0) {
    return -mode.mass_eff * mode.gamma * loop.gain *
           (std::cos(loop.phase) * (velocity_estimate + electronic_noise) +
            std::sin(loop.phase) * mode.omega_m * displacement);
}

/// Run the configured loop bandpass over a sampled signal (bilinear biquad,
/// prewarped so the center frequency keeps unit gain and zero phase).
inline std::vector<double> apply_loop_bandpass(const LoopBandpass& bp,
                                               const std::vector<double>& signal,
                                               double sample_rate) {
    const double dt = 1.0 / sample_rate;
    const double wc = bp.center;
    const double k = wc / std::tan(0.5 * wc * dt);
    const double a0 = k * k + bp.bandwidth * k + wc * wc;
    const double b0 = bp.bandwidth * k / a0;
    const double a1 = 2.0 * (wc * wc - k * k) / a0;
    const double a2 = (k * k - bp.bandwidth * k + wc * wc) / a0;

    std::vector<double> out(signal.size());
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < signal.size(); ++i) {
        const double x0 = signal[i];
        const double y0 = b0 * (x0 - x2) - a1 * y1 - a2 * y2;
        out[i] = y0;
        x2 = x1;
        x1 = x0;
        y2 = y1;
        y1 = y0;
    }
    return out;
}

/// Per-mode initial phase-space point, used to override the random thermal
/// draw (e.g. a deterministic displaced start).
struct ModeState {
    double x = 0.0;
    double v = 0.0;
};

struct SimConfig {
    ModalDecomposition modes;
    std::size_t resonant_index = 0;  // loop reference mode (after frequency sorting)
    FeedbackLoop loop;
    std::optional<MonochromaticDrive> drive;
    std::vector<SwitchEvent> schedule;
    bool loop_initially_on = false;
    bool drive_initially_on = false;
    double sample_rate = 0.0;  // Hz
    double duration = 0.0;     // s
    std::uint64_t seed = 0;
    Units units = Units::SI;
    bool record_force = false;
    std::optional<std::vector<ModeState>> initial_conditions;

    static SimConfig single_mode(const OscillatorMode& mode, double sample_rate, double duration,
                                 std::uint64_t seed) {
        SimConfig cfg{ModalDecomposition::single(mode)};
        cfg.sample_rate = sample_rate;
        cfg.duration = duration;
        cfg.seed = seed;
        return cfg;
    }

    explicit SimConfig(ModalDecomposition m) : modes(std::move(m)) {}
};

namespace detail {

struct SimLayout {
    std::size_t n_modes;
    bool has_filter;
    bool has_drive;
    std::size_t dim;

    std::size_t xi(std::size_t i) const { return 2 * i; }
    std::size_t vi(std::size_t i) const { return 2 * i + 1; }
    std::size_t f1() const { return 2 * n_modes; }
    std::size_t f2() const { return 2 * n_modes + 1; }
    std::size_t dc() const { return 2 * n_modes + (has_filter ? 2 : 0); }
    std::size_t ds() const { return dc() + 1; }
};

// Drift matrix for one (loop, drive) switch state. Filter and drive states
// are always present when configured; only their couplings are gated.
inline Eigen::MatrixXd drift_matrix(const SimConfig& cfg, const SimLayout& lay, bool loop_on,
                                    bool drive_on) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(lay.dim, lay.dim);
    const auto& entries = cfg.modes.entries();
    const OscillatorMode& res = entries[cfg.resonant_index].mode;
    const double g = cfg.loop.gain;
    const double cth = std::cos(cfg.loop.phase);
    const double sth = std::sin(cfg.loop.phase);

    for (std::size_t i = 0; i < lay.n_modes; ++i) {
        const OscillatorMode& m = entries[i].mode;
        a(lay.xi(i), lay.vi(i)) = 1.0;
        a(lay.vi(i), lay.xi(i)) = -m.omega_m * m.omega_m;
        a(lay.vi(i), lay.vi(i)) = -m.gamma;
    }

    if (lay.has_filter) {
        const LoopBandpass& bp = *cfg.loop.bandpass;
        a(lay.f1(), lay.f2()) = 1.0;
        a(lay.f2(), lay.f1()) = -bp.center * bp.center;
        a(lay.f2(), lay.f2()) = -bp.bandwidth;
        // filter input: rotated measurement of the beam-weighted motion
        for (std::size_t j = 0; j < lay.n_modes; ++j) {
            const double cj = std::sqrt(entries[j].weight);
            a(lay.f2(), lay.xi(j)) += sth * res.omega_m * cj;
            a(lay.f2(), lay.vi(j)) += cth * cj;
        }
    }

    if (loop_on && g > 0.0) {
        for (std::size_t i = 0; i < lay.n_modes; ++i) {
            const OscillatorMode& m = entries[i].mode;
            const double ki = -std::sqrt(entries[i].weight) / m.mass_eff * res.mass_eff *
                              res.gamma * g;
            if (lay.has_filter) {
                a(lay.vi(i), lay.f2()) += ki * cfg.loop.bandpass->bandwidth;
            } else {
                for (std::size_t j = 0; j < lay.n_modes; ++j) {
                    const double cj = std::sqrt(entries[j].weight);
                    a(lay.vi(i), lay.xi(j)) += ki * sth * res.omega_m * cj;
                    a(lay.vi(i), lay.vi(j)) += ki * cth * cj;
                }
            }
        }
    }

    if (lay.has_drive) {
        const double wd = cfg.drive->omega;
        a(lay.dc(), lay.ds()) = -wd;
        a(lay.ds(), lay.dc()) = wd;
        if (drive_on) {
            for (std::size_t i = 0; i < lay.n_modes; ++i) {
                const OscillatorMode& m = entries[i].mode;
                a(lay.vi(i), lay.dc()) +=
                    std::sqrt(entries[i].weight) * cfg.drive->amplitude / m.mass_eff;
            }
        }
    }
    return a;
}

// Exact interval covariance of white noise of the given intensity entering
// through column l: Q = Int_0^dt exp(A s) l S l^T exp(A^T s) ds.
inline Eigen::MatrixXd noise_covariance(const Eigen::MatrixXd& a, const Eigen::VectorXd& l,
                                        double intensity, double dt) {
    const auto n = a.rows();
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = -a;
    block.topRightCorner(n, n) = l * intensity * l.transpose();
    block.bottomRightCorner(n, n) = a.transpose();
    const Eigen::MatrixXd e = (block * dt).exp();
    const Eigen::MatrixXd q =
        e.bottomRightCorner(n, n).transpose() * e.topRightCorner(n, n);
    return 0.5 * (q + q.transpose());
}

// Factor C with C C^T = Q for a positive semi-definite Q (eigen square
// root; safe at zero or rank-deficient covariance).
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& q) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lam.asDiagonal();
}

struct NoiseSource {
    Eigen::MatrixXd factor;
    std::size_t stream;  // index into the simulation's stream table
};

struct Propagator {
    Eigen::MatrixXd phi;
    std::vector<NoiseSource> sources;
};

inline bool stable(const Eigen::MatrixXd& a_mech) {
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(a_mech, false).eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i].real() >= 0.0) return false;
    return true;
}

}  // namespace detail

/// Time-domain run of the configured experiment. Deterministic per seed:
/// identical configs produce bit-identical trajectories.
inline Trajectory run(const SimConfig& cfg) {
    const auto& entries = cfg.modes.entries();
    const std::size_t n_modes = entries.size();
    if (cfg.resonant_index >= n_modes)
        throw std::invalid_argument("run: resonant_index out of range");
    if (!(cfg.duration > 0.0)) throw std::invalid_argument("run: duration must be > 0");

    double max_freq_hz = 0.0;
    for (const auto& e : entries) max_freq_hz = std::max(max_freq_hz, hz_from_rad(e.mode.omega_m));
    if (cfg.loop.bandpass)
        max_freq_hz = std::max(max_freq_hz, hz_from_rad(cfg.loop.bandpass->center));
    const double min_rate = 10.0 * max_freq_hz;
    if (!(cfg.sample_rate >= min_rate)) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "run: sample_rate %.6g Hz too low, need >= %.6g Hz (10x highest mode)",
                      cfg.sample_rate, min_rate);
        throw std::invalid_argument(msg);
    }
    validate_schedule(cfg.schedule);
    if (cfg.initial_conditions && cfg.initial_conditions->size() != n_modes)
        throw std::invalid_argument("run: initial_conditions must list every mode");

    const bool sampled_loop = cfg.loop.delay > 0.0 || cfg.loop.finite_difference_velocity;
    const detail::SimLayout lay{n_modes, cfg.loop.bandpass.has_value() && !sampled_loop,
                                cfg.drive.has_value(),
                                2 * n_modes + (cfg.loop.bandpass && !sampled_loop ? 2 : 0) +
                                    (cfg.drive ? 2 : 0)};
    const OscillatorMode& res = entries[cfg.resonant_index].mode;
    const double dt = 1.0 / cfg.sample_rate;
    const std::size_t n_samples =
        std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(cfg.duration * cfg.sample_rate)) + 1);

    // Reachable loop states must be stable (embedded-loop integrator only;
    // the sampled loop applies forces explicitly and cannot be pre-checked).
    bool loop_state = cfg.loop_initially_on;
    bool loop_ever_on = loop_state;
    for (const SwitchEvent& e : cfg.schedule)
        if (e.kind == SwitchEvent::Kind::LoopOn) loop_ever_on = true;
    if (loop_ever_on && !sampled_loop) {
        const Eigen::MatrixXd a_on = detail::drift_matrix(cfg, lay, true, false);
        const std::size_t mech = 2 * n_modes + (lay.has_filter ? 2 : 0);
        if (!detail::stable(a_on.topLeftCorner(mech, mech)))
            throw InstabilityError("run: closed loop is unstable (effective damping <= 0)");
    }

    // Noise streams, one per physical source.
    std::vector<NormalStream> streams;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> stream_keys;
    auto stream_index = [&](std::uint64_t domain, std::uint64_t index) {
        for (std::size_t s = 0; s < stream_keys.size(); ++s)
            if (stream_keys[s] == std::make_pair(domain, index)) return s;
        stream_keys.emplace_back(domain, index);
        streams.emplace_back(derive_seed(cfg.seed, domain, index));
        return streams.size() - 1;
    };

    const double kb = constants::k_boltzmann;
    auto build_propagator = [&](bool loop_on, bool drive_on) {
        detail::Propagator p;
        const Eigen::MatrixXd a = detail::drift_matrix(cfg, lay, loop_on, drive_on);
        p.phi = (a * dt).exp();
        for (std::size_t i = 0; i < n_modes; ++i) {
            const OscillatorMode& m = entries[i].mode;
            if (m.temperature <= 0.0 || m.gamma <= 0.0) continue;
            Eigen::VectorXd l = Eigen::VectorXd::Zero(lay.dim);
            l(lay.vi(i)) = 1.0 / m.mass_eff;
            const double intensity = 2.0 * m.mass_eff * m.gamma * kb * m.temperature;
            p.sources.push_back({detail::psd_factor(detail::noise_covariance(a, l, intensity, dt)),
                                 stream_index(SeedDomain::thermal, i)});
        }
        if (loop_on && cfg.loop.gain > 0.0 && cfg.loop.electronic_noise_psd > 0.0 && !sampled_loop) {
            Eigen::VectorXd l = Eigen::VectorXd::Zero(lay.dim);
            if (lay.has_filter) {
                l(lay.f2()) = res.omega_m;  // white displacement noise at the filter input
            } else {
                for (std::size_t i = 0; i < n_modes; ++i) {
                    const OscillatorMode& m = entries[i].mode;
                    l(lay.vi(i)) = -std::sqrt(entries[i].weight) / m.mass_eff * res.mass_eff *
                                   res.gamma * cfg.loop.gain * res.omega_m;
                }
            }
            p.sources.push_back(
                {detail::psd_factor(detail::noise_covariance(a, l, cfg.loop.electronic_noise_psd, dt)),
                 stream_index(SeedDomain::electronic, 0)});
        }
        return p;
    };

    // Sampled-loop mode: feedback force held constant over each step.
    Eigen::VectorXd force_input;  // integral of exp(A s) over the step times the force column
    if (sampled_loop) {
        const Eigen::MatrixXd a = detail::drift_matrix(cfg, lay, false, false);
        Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(lay.dim + 1, lay.dim + 1);
        aug.topLeftCorner(lay.dim, lay.dim) = a;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(lay.dim);
        for (std::size_t i = 0; i < n_modes; ++i)
            b(lay.vi(i)) = std::sqrt(entries[i].weight) / entries[i].mode.mass_eff;
        aug.topRightCorner(lay.dim, 1) = b;
        force_input = (aug * dt).exp().topRightCorner(lay.dim, 1);
    }

    // Initial state: thermal equilibrium draw, cooled for the reference mode
    // when the run starts with the loop closed, or the explicit override.
    Eigen::VectorXd z = Eigen::VectorXd::Zero(lay.dim);
    if (cfg.initial_conditions) {
        for (std::size_t i = 0; i < n_modes; ++i) {
            z(lay.xi(i)) = (*cfg.initial_conditions)[i].x;
            z(lay.vi(i)) = (*cfg.initial_conditions)[i].v;
        }
    } else {
        for (std::size_t i = 0; i < n_modes; ++i) {
            const OscillatorMode& m = entries[i].mode;
            if (m.temperature <= 0.0) continue;
            double var_x = m.thermal_variance();
            if (cfg.loop_initially_on && i == cfg.resonant_index)
                var_x /= 1.0 + cfg.loop.gain * entries[i].weight;
            NormalStream init(derive_seed(cfg.seed, SeedDomain::initial_state, i));
            z(lay.xi(i)) = std::sqrt(var_x) * init.next();
            z(lay.vi(i)) = m.omega_m * std::sqrt(var_x) * init.next();
        }
    }
    if (lay.has_drive) {
        z(lay.dc()) = std::cos(cfg.drive->phase);
        z(lay.ds()) = std::sin(cfg.drive->phase);
    }

    // Event times snap to the sample grid.
    struct Edge {
        std::size_t index;
        SwitchEvent::Kind kind;
    };
    std::vector<Edge> edges;
    for (const SwitchEvent& e : cfg.schedule) {
        const auto idx = static_cast<std::size_t>(
            std::min<long long>(std::llround(e.time * cfg.sample_rate),
                                static_cast<long long>(n_samples) - 1));
        edges.push_back({idx, e.kind});
    }

    bool drive_state = cfg.drive_initially_on;
    std::map<std::pair<bool, bool>, detail::Propagator> cache;
    auto propagator = [&](bool lo, bool dr) -> detail::Propagator& {
        auto key = std::make_pair(lo, dr);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, build_propagator(lo, dr)).first;
        return it->second;
    };

    Trajectory traj;
    traj.sample_rate = cfg.sample_rate;
    traj.units = cfg.units;
    traj.seed = cfg.seed;
    traj.displacement.resize(n_samples);
    if (cfg.record_force) traj.force.emplace(n_samples);

    std::vector<double> c(n_modes);
    for (std::size_t i = 0; i < n_modes; ++i) c[i] = std::sqrt(entries[i].weight);

    auto observed = [&](const Eigen::VectorXd& state) {
        double x = 0.0;
        for (std::size_t i = 0; i < n_modes; ++i) x += c[i] * state(lay.xi(i));
        return x;
    };
    auto observed_velocity = [&](const Eigen::VectorXd& state) {
        double v = 0.0;
        for (std::size_t i = 0; i < n_modes; ++i) v += c[i] * state(lay.vi(i));
        return v;
    };
    auto beam_force = [&](const Eigen::VectorXd& state, bool lo, bool dr) {
        double f = 0.0;
        if (lo && cfg.loop.gain > 0.0) {
            if (lay.has_filter) {
                f += -res.mass_eff * res.gamma * cfg.loop.gain * cfg.loop.bandpass->bandwidth *
                     state(lay.f2());
            } else {
                f += feedback_force(cfg.loop, res, observed_velocity(state), observed(state));
            }
        }
        if (dr && cfg.drive) f += cfg.drive->amplitude * state(lay.dc());
        return f;
    };

    // Sampled-loop support state.
    const std::size_t delay_samples =
        sampled_loop ? static_cast<std::size_t>(std::llround(cfg.loop.delay * cfg.sample_rate)) : 0;
    std::vector<double> measured;       // observed displacement history
    std::vector<double> measured_vel;   // observed velocity history
    if (sampled_loop) {
        measured.reserve(n_samples);
        measured_vel.reserve(n_samples);
    }
    const std::size_t e_stream =
        (sampled_loop && cfg.loop.electronic_noise_psd > 0.0) ? stream_index(SeedDomain::electronic, 0)
                                                              : SIZE_MAX;
    const double e_sigma = std::sqrt(cfg.loop.electronic_noise_psd * cfg.sample_rate);

    Eigen::VectorXd eta(lay.dim), znew(lay.dim);
    std::size_t edge_cursor = 0;
    while (edge_cursor < edges.size() && edges[edge_cursor].index == 0) {
        switch (edges[edge_cursor].kind) {
            case SwitchEvent::Kind::LoopOn: loop_state = true; break;
            case SwitchEvent::Kind::LoopOff: loop_state = false; break;
            case SwitchEvent::Kind::DriveOn: drive_state = true; break;
            case SwitchEvent::Kind::DriveOff: drive_state = false; break;
        }
        ++edge_cursor;
    }

    traj.displacement[0] = observed(z);
    if (sampled_loop) {
        measured.push_back(observed(z));
        measured_vel.push_back(observed_velocity(z));
    }
    if (cfg.record_force) (*traj.force)[0] = beam_force(z, loop_state, drive_state);

    for (std::size_t k = 1; k < n_samples; ++k) {
        // the sampled loop carries its feedback in the explicit force below
        detail::Propagator& p = propagator(loop_state && !sampled_loop, drive_state);
        znew.noalias() = p.phi * z;
        for (const detail::NoiseSource& s : p.sources) {
            for (Eigen::Index j = 0; j < eta.size(); ++j) eta(j) = streams[s.stream].next();
            znew.noalias() += s.factor * eta;
        }
        if (sampled_loop && loop_state && cfg.loop.gain > 0.0) {
            const std::size_t k0 = k - 1;
            const std::size_t ks = k0 >= delay_samples ? k0 - delay_samples : 0;
            const double x_est = measured[ks];
            double v_est;
            if (cfg.loop.finite_difference_velocity) {
                v_est = ks > 0 ? (measured[ks] - measured[ks - 1]) * cfg.sample_rate : 0.0;
            } else {
                v_est = measured_vel[ks];
            }
            const double noise =
                e_stream != SIZE_MAX ? res.omega_m * e_sigma * streams[e_stream].next() : 0.0;
            znew.noalias() +=
                force_input * feedback_force(cfg.loop, res, v_est, x_est, noise);
        }
        z.swap(znew);

        // events scheduled at sample k take effect for the step leaving k
        while (edge_cursor < edges.size() && edges[edge_cursor].index == k) {
            switch (edges[edge_cursor].kind) {
                case SwitchEvent::Kind::LoopOn: loop_state = true; break;
                case SwitchEvent::Kind::LoopOff: loop_state = false; break;
                case SwitchEvent::Kind::DriveOn: drive_state = true; break;
                case SwitchEvent::Kind::DriveOff: drive_state = false; break;
            }
            ++edge_cursor;
        }

        traj.displacement[k] = observed(z);
        if (sampled_loop) {
            measured.push_back(observed(z));
            measured_vel.push_back(observed_velocity(z));
        }
        if (cfg.record_force) (*traj.force)[k] = beam_force(z, loop_state, drive_state);
    }
    return traj;
}

}  // namespace colddamp
