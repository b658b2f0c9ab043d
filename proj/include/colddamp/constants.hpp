#pragma once

// Physical constants (2019 SI redefinition; k_B and h are exact by definition).

namespace colddamp::constants {

inline constexpr double k_boltzmann = 1.380649e-23;        // J/K
inline constexpr double planck = 6.62607015e-34;           // J s
inline constexpr double hbar = 1.054571817e-34;            // J s, h/2pi rounded to CODATA print
inline constexpr double speed_of_light = 299792458.0;      // m/s

}  // namespace colddamp::constants
