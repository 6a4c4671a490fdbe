#pragma once

#include <cstddef>
#include <vector>

#include "trajdiff/constants.hpp"
#include "trajdiff/vec2.hpp"

namespace trajdiff {

inline constexpr double kDefaultTolerance = 1e-12;

class TwoBodySystem {
public:
    /// Throws std::invalid_argument unless mu > 0 and finite.
    explicit TwoBodySystem(double mu = kMuSun);

    double mu() const { return mu_; }

private:
    double mu_;
};

/// -mu / |r|^3 * r. Throws std::invalid_argument for |r| == 0.
Vec2 acceleration(const Vec2& r, const TwoBodySystem& system);

/// Advances `state0` by `dt` seconds (negative for backward propagation) with an
/// adaptive 13-stage Runge-Kutta 8(7) pair under PI step control.
///
/// `tol` is used as both the relative and absolute per-step tolerance. The
/// integration runs in canonical units (length 1 AU, mu = 1), so the absolute
/// tolerance is measured in AU and AU per canonical time unit.
///
/// Throws PropagationError on step-size underflow or a non-finite state.
PlanarState propagate(const PlanarState& state0, double dt, const TwoBodySystem& system,
                      double tol = kDefaultTolerance);

struct TrajectoryNode {
    double t = 0.0;  // seconds since departure
    PlanarState state;
};

/// Time-stamped sequence of planar states.
///
/// Generated trajectories satisfy t[0] = 0 and strictly increasing t; decoded model
/// samples may violate that and are judged by the evaluator instead.
struct Trajectory {
    std::vector<TrajectoryNode> nodes;

    std::size_t size() const { return nodes.size(); }
    const TrajectoryNode& operator[](std::size_t i) const { return nodes[i]; }
    TrajectoryNode& operator[](std::size_t i) { return nodes[i]; }
    const TrajectoryNode& front() const { return nodes.front(); }
    const TrajectoryNode& back() const { return nodes.back(); }
    double time_of_flight() const { return nodes.back().t - nodes.front().t; }
};

/// Node time k of an n-node grid spanning [0, tof], both endpoints included.
inline double grid_time(std::size_t k, std::size_t n, double tof)
{
    return k == n - 1 ? tof : static_cast<double>(k) * tof / static_cast<double>(n - 1);
}

/// Samples the arc from `state0` on the grid t_k = k tof / (n - 1), propagating
/// segment by segment. Requires n >= 2 and tof > 0.
Trajectory sample_trajectory(const PlanarState& state0, double tof, std::size_t n,
                             const TwoBodySystem& system, double tol = kDefaultTolerance);

double specific_energy(const PlanarState& s, const TwoBodySystem& system);
double angular_momentum(const PlanarState& s);

}  // namespace trajdiff
