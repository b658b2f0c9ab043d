#pragma once

#include <stdexcept>
#include <string>

namespace colddamp {

/// Requested a model combination the theory does not define
/// (e.g. a closed loop around structural damping).
class UnsupportedModelError : public std::logic_error {
public:
    explicit UnsupportedModelError(const std::string& what) : std::logic_error(what) {}
};

/// Simulation configuration whose closed loop is not stable.
class InstabilityError : public std::runtime_error {
public:
    explicit InstabilityError(const std::string& what) : std::runtime_error(what) {}
};

/// Spectrum handed to a peak estimator contains no usable peak.
class NoPeakError : public std::runtime_error {
public:
    explicit NoPeakError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad scenario/config input (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace colddamp
