#pragma once

// One-sided instrument-style spectrum in m^2/Hz, plus CSV persistence.
// Metadata lines ride along as "# key=value" comments so a spectrum file
// round-trips through the CLI.

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace colddamp {

enum class Window { Hann, Rectangular, Hamming };

inline const char* window_name(Window w) {
    switch (w) {
        case Window::Hann: return "hann";
        case Window::Rectangular: return "rectangular";
        case Window::Hamming: return "hamming";
    }
    return "hann";
}

inline Window window_from_name(const std::string& name) {
    if (name == "hann") return Window::Hann;
    if (name == "rectangular" || name == "boxcar") return Window::Rectangular;
    if (name == "hamming") return Window::Hamming;
    throw std::invalid_argument("unknown window: " + name);
}

struct Spectrum {
    std::vector<double> frequency_hz;  // strictly increasing
    std::vector<double> psd;           // m^2/Hz, one-sided
    double rbw_hz = 0.0;               // equivalent noise bandwidth of one bin
    std::size_t averages = 1;
    Window window = Window::Hann;
    double overlap = 0.0;
    double sample_rate = 0.0;

    std::size_t size() const { return frequency_hz.size(); }

    double df() const {
        return frequency_hz.size() > 1 ? frequency_hz[1] - frequency_hz[0] : 0.0;
    }

    /// Sum of psd * df, the variance recovered from the spectrum.
    double total_power() const {
        double p = 0.0;
        const double d = df();
        for (double v : psd) p += v * d;
        return p;
    }

    /// Integral of the PSD over [f_lo, f_hi] by bin sums.
    double band_power(double f_lo, double f_hi) const {
        double p = 0.0;
        const double d = df();
        for (std::size_t i = 0; i < size(); ++i)
            if (frequency_hz[i] >= f_lo && frequency_hz[i] <= f_hi) p += psd[i] * d;
        return p;
    }
};

/// Restriction of a spectrum to [f_lo, f_hi], metadata preserved.
inline Spectrum crop(const Spectrum& s, double f_lo, double f_hi) {
    Spectrum out = s;
    out.frequency_hz.clear();
    out.psd.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.frequency_hz[i] >= f_lo && s.frequency_hz[i] <= f_hi) {
            out.frequency_hz.push_back(s.frequency_hz[i]);
            out.psd.push_back(s.psd[i]);
        }
    }
    if (out.frequency_hz.empty()) throw std::invalid_argument("crop: empty frequency window");
    return out;
}

inline void write_spectrum_csv(const Spectrum& s, std::ostream& os) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "# colddamp spectrum v1\n");
    os << buf;
    std::snprintf(buf, sizeof buf, "# rbw_hz=%.17g\n", s.rbw_hz);
    os << buf;
    os << "# averages=" << s.averages << "\n";
    os << "# window=" << window_name(s.window) << "\n";
    std::snprintf(buf, sizeof buf, "# overlap=%.17g\n", s.overlap);
    os << buf;
    std::snprintf(buf, sizeof buf, "# sample_rate_hz=%.17g\n", s.sample_rate);
    os << buf;
    os << "frequency_hz,psd_m2_per_hz\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", s.frequency_hz[i], s.psd[i]);
        os << buf;
    }
}

inline void write_spectrum_csv(const Spectrum& s, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_spectrum_csv: cannot open " + path);
    write_spectrum_csv(s, os);
}

inline Spectrum read_spectrum_csv(std::istream& is) {
    Spectrum s;
    std::string line;
    std::map<std::string, std::string> meta;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                auto key = line.substr(1, eq - 1);
                key.erase(0, key.find_first_not_of(' '));
                key.erase(key.find_last_not_of(' ') + 1);
                meta[key] = line.substr(eq + 1);
            }
            continue;
        }
        if (line.find("frequency_hz") == 0) continue;  // header row
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        s.frequency_hz.push_back(std::stod(line.substr(0, comma)));
        s.psd.push_back(std::stod(line.substr(comma + 1)));
    }
    if (auto it = meta.find("rbw_hz"); it != meta.end()) s.rbw_hz = std::stod(it->second);
    if (auto it = meta.find("averages"); it != meta.end())
        s.averages = static_cast<std::size_t>(std::stoull(it->second));
    if (auto it = meta.find("window"); it != meta.end()) s.window = window_from_name(it->second);
    if (auto it = meta.find("overlap"); it != meta.end()) s.overlap = std::stod(it->second);
    if (auto it = meta.find("sample_rate_hz"); it != meta.end())
        s.sample_rate = std::stod(it->second);
    if (s.frequency_hz.empty()) throw std::runtime_error("read_spectrum_csv: no data rows");
    return s;
}

inline Spectrum read_spectrum_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_spectrum_csv: cannot open " + path);
    return read_spectrum_csv(is);
}

}  // namespace colddamp
