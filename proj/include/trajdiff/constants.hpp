#pragma once

#include <numbers>

namespace trajdiff {

inline constexpr double kMuSun = 1.32712440018e20;  // m^3/s^2
inline constexpr double kAu = 1.495978707e11;       // m
inline constexpr double kDay = 86400.0;             // s
inline constexpr double kJulianCentury = 36525.0;   // days

// Evaluation scales: positions in AU, velocities in units of 30 km/s.
inline constexpr double kPositionScale = kAu;
inline constexpr double kVelocityScale = 30.0e3;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

}  // namespace trajdiff
