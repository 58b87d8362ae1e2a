#pragma once

#include <numbers>

namespace ionlight::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018 exact / recommended values.
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double speed_of_light = 299792458.0;           // m/s

inline constexpr double ca40_mass_u = 39.962590863;

// MHz (cycles) -> rad/s
constexpr double mhz(double f) { return two_pi * 1e6 * f; }
// rad/s -> MHz (cycles)
constexpr double to_mhz(double omega) { return omega / (two_pi * 1e6); }

}  // namespace ionlight::constants
