#pragma once

// Uniformly sampled time series from the simulator, with a small binary
// container (little-endian float64) and a CSV form for plotting.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace colddamp {

enum class Units : std::uint8_t { SI = 0, Natural = 1 };

inline const char* units_name(Units u) { return u == Units::SI ? "si" : "natural"; }

struct Trajectory {
    std::vector<double> displacement;       // m
    std::optional<std::vector<double>> force;  // N, applied beam force, if recorded
    double sample_rate = 0.0;               // Hz
    double start_time = 0.0;                // s
    Units units = Units::SI;
    std::uint64_t seed = 0;

    std::size_t size() const { return displacement.size(); }
    double dt() const { return 1.0 / sample_rate; }
    double time_at(std::size_t i) const { return start_time + static_cast<double>(i) / sample_rate; }

    double mean() const {
        if (displacement.empty()) return 0.0;
        return std::accumulate(displacement.begin(), displacement.end(), 0.0) /
               static_cast<double>(displacement.size());
    }

    double variance() const {
        if (displacement.empty()) return 0.0;
        const double m = mean();
        double acc = 0.0;
        for (double v : displacement) acc += (v - m) * (v - m);
        return acc / static_cast<double>(displacement.size());
    }
};

namespace detail {

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64_le(std::ostream& os, double d) {
    write_u64_le(os, std::bit_cast<std::uint64_t>(d));
}

inline double read_f64_le(std::istream& is) { return std::bit_cast<double>(read_u64_le(is)); }

inline void write_f64_block(std::ostream& os, const std::vector<double>& v) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double)));
    } else {
        for (double d : v) write_f64_le(os, d);
    }
}

inline void read_f64_block(std::istream& is, std::vector<double>& v) {
    if constexpr (std::endian::native == std::endian::little) {
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    } else {
        for (double& d : v) d = read_f64_le(is);
    }
}

}  // namespace detail

inline constexpr char trajectory_magic[8] = {'C', 'D', 'T', 'R', 'A', 'J', '0', '1'};

inline void write_trajectory(const Trajectory& traj, std::ostream& os) {
    os.write(trajectory_magic, sizeof trajectory_magic);
    std::uint64_t flags = 0;
    if (traj.force) flags |= 1u;
    if (traj.units == Units::Natural) flags |= 2u;
    detail::write_u64_le(os, flags);
    detail::write_f64_le(os, traj.sample_rate);
    detail::write_f64_le(os, traj.start_time);
    detail::write_u64_le(os, traj.seed);
    detail::write_u64_le(os, traj.displacement.size());
    detail::write_f64_block(os, traj.displacement);
    if (traj.force) detail::write_f64_block(os, *traj.force);
    if (!os) throw std::runtime_error("write_trajectory: stream failure");
}

inline void write_trajectory(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_trajectory: cannot open " + path);
    write_trajectory(traj, os);
}

inline Trajectory read_trajectory(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, trajectory_magic, sizeof magic) != 0)
        throw std::runtime_error("read_trajectory: not a trajectory container");
    Trajectory traj;
    const std::uint64_t flags = detail::read_u64_le(is);
    traj.sample_rate = detail::read_f64_le(is);
    traj.start_time = detail::read_f64_le(is);
    traj.seed = detail::read_u64_le(is);
    const std::uint64_t n = detail::read_u64_le(is);
    traj.units = (flags & 2u) ? Units::Natural : Units::SI;
    traj.displacement.resize(n);
    detail::read_f64_block(is, traj.displacement);
    if (flags & 1u) {
        traj.force.emplace(n);
        detail::read_f64_block(is, *traj.force);
    }
    if (!is) throw std::runtime_error("read_trajectory: truncated container");
    return traj;
}

inline Trajectory read_trajectory(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_trajectory: cannot open " + path);
    return read_trajectory(is);
}

/// CSV columns: time_s, displacement_m[, force_N]. Values are written with
/// %.17g so a re-run reproduces files byte for byte.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "time_s,displacement_m" << (traj.force ? ",force_N" : "") << "\n";
    char buf[96];
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.force) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", traj.time_at(i),
                          traj.displacement[i], (*traj.force)[i]);
        } else {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", traj.time_at(i), traj.displacement[i]);
        }
        os << buf;
    }
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
    write_trajectory_csv(traj, os);
}

}  // namespace colddamp
