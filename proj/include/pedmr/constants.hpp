#pragma once

#include <numbers>

namespace pedmr::constants {

// CODATA 2018 exact / recommended values, SI units.
inline constexpr double planck = 6.62607015e-34;        // J s
inline constexpr double hbar = planck / (2.0 * std::numbers::pi);
inline constexpr double bohr_magneton = 9.2740100783e-24; // J / T

inline constexpr double two_pi = 2.0 * std::numbers::pi;

} // namespace pedmr::constants
