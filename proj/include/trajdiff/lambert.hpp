#pragma once

#include "trajdiff/constants.hpp"
#include "trajdiff/vec2.hpp"

namespace trajdiff {

struct LambertProblem {
    Vec2 r1;           // m
    Vec2 r2;           // m
    double tof = 0.0;  // s
    double mu = kMuSun;
};

struct LambertSolution {
    Vec2 v1;  // m/s at r1
    Vec2 v2;  // m/s at r2
    int iterations = 0;
};

/// Zero-revolution prograde Lambert arc (counter-clockwise about +z) from r1 to r2.
///
/// Uses Izzo's formulation in the universal variable x with Householder iterations;
/// converges when the normalized time-of-flight residual is <= 1e-12. Transfer
/// angles above 180 degrees take the prograde branch. Throws LambertError for
/// collinear or zero-norm geometry, non-positive tof, or no convergence within
/// 60 iterations.
LambertSolution solve_lambert(const LambertProblem& problem);

/// Prograde (counter-clockwise) angle from r1 to r2, in degrees within [0, 360).
/// Throws std::invalid_argument for a zero-norm input.
double transfer_angle_deg(const Vec2& r1, const Vec2& r2);

}  // namespace trajdiff
