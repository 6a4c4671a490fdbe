#include "trajdiff/twobody.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "trajdiff/errors.hpp"

namespace trajdiff {

namespace {

using State = std::array<double, 4>;  // x, y, vx, vy in canonical units

// Fehlberg 7(8) tableau, propagated with the eighth-order weights.
constexpr int kStages = 13;

constexpr double kA[kStages][kStages - 1] = {
    {},
    {2.0 / 27.0},
    {1.0 / 36.0, 1.0 / 12.0},
    {1.0 / 24.0, 0.0, 1.0 / 8.0},
    {5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0},
    {1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0},
    {-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0},
    {31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0},
    {2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0},
    {-91.0 / 108.0, 0.0, 0.0, 23.0 / 108.0, -976.0 / 135.0, 311.0 / 54.0, -19.0 / 60.0,
     17.0 / 6.0, -1.0 / 12.0},
    {2383.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -301.0 / 82.0,
     2133.0 / 4100.0, 45.0 / 82.0, 45.0 / 164.0, 18.0 / 41.0},
    {3.0 / 205.0, 0.0, 0.0, 0.0, 0.0, -6.0 / 41.0, -3.0 / 205.0, -3.0 / 41.0, 3.0 / 41.0,
     6.0 / 41.0, 0.0},
    {-1777.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -289.0 / 82.0,
     2193.0 / 4100.0, 51.0 / 82.0, 33.0 / 164.0, 12.0 / 41.0, 0.0, 1.0},
};

constexpr double kB[kStages] = {0.0,           0.0,           0.0,          0.0,
                                0.0,           34.0 / 105.0,  9.0 / 35.0,   9.0 / 35.0,
                                9.0 / 280.0,   9.0 / 280.0,   0.0,          41.0 / 840.0,
                                41.0 / 840.0};

// Difference between the eighth- and seventh-order solutions, per unit step.
constexpr double kErrWeight = 41.0 / 840.0;

constexpr int kOrder = 8;
constexpr long kMaxSteps = 2'000'000;

State derivative(const State& y)
{
    const double r2 = y[0] * y[0] + y[1] * y[1];
    const double inv_r3 = 1.0 / (r2 * std::sqrt(r2));
    return {y[2], y[3], -y[0] * inv_r3, -y[1] * inv_r3};
}

double scaled_rms(const State& v, const State& ya, const State& yb, double tol)
{
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double sc = tol + tol * std::max(std::abs(ya[i]), std::abs(yb[i]));
        const double q = v[i] / sc;
        sum += q * q;
    }
    return std::sqrt(sum / 4.0);
}

bool finite(const State& y)
{
    return std::ranges::all_of(y, [](double v) { return std::isfinite(v); });
}

// Starting step per Hairer, Norsett & Wanner, Solving ODEs I, II.4.
double initial_step(const State& y0, const State& f0, double direction, double tol)
{
    const double d0 = scaled_rms(y0, y0, y0, tol);
    const double d1 = scaled_rms(f0, y0, y0, tol);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    State y1;
    for (int i = 0; i < 4; ++i) y1[i] = y0[i] + direction * h0 * f0[i];
    const State f1 = derivative(y1);
    State df;
    for (int i = 0; i < 4; ++i) df[i] = f1[i] - f0[i];
    const double d2 = scaled_rms(df, y0, y0, tol) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                    : std::pow(0.01 / dmax, 1.0 / (kOrder + 1));
    return std::min(100.0 * h0, h1);
}

struct StepResult {
    State y;
    double err;
};

StepResult rk_step(const State& y, const State& f0, double h, double tol)
{
    std::array<State, kStages> k;
    k[0] = f0;
    for (int s = 1; s < kStages; ++s) {
        State ys = y;
        for (int j = 0; j < s; ++j) {
            const double a = kA[s][j];
            if (a == 0.0) continue;
            for (int i = 0; i < 4; ++i) ys[i] += h * a * k[j][i];
        }
        k[s] = derivative(ys);
    }
    StepResult out{y, 0.0};
    State err;
    for (int i = 0; i < 4; ++i) {
        double acc = 0.0;
        for (int s = 0; s < kStages; ++s) acc += kB[s] * k[s][i];
        out.y[i] += h * acc;
        err[i] = h * kErrWeight * (k[11][i] + k[12][i] - k[0][i] - k[10][i]);
    }
    out.err = scaled_rms(err, y, out.y, tol);
    return out;
}

State integrate(State y, double duration, double tol)
{
    const double direction = duration < 0.0 ? -1.0 : 1.0;
    const double span = std::abs(duration);
    State f = derivative(y);
    double h = initial_step(y, f, direction, tol);
    double t = 0.0;
    double err_prev = 1e-4;
    bool last_rejected = false;

    for (long step = 0; step < kMaxSteps; ++step) {
        const bool final_step = t + h >= span;
        const double h_used = final_step ? span - t : h;
        if (h_used < 16.0 * std::numeric_limits<double>::epsilon() * std::max(t, 1.0)) {
            throw PropagationError("propagate: step-size underflow at t = " +
                                   std::to_string(t) + " canonical units");
        }
        const StepResult res = rk_step(y, f, direction * h_used, tol);
        if (!finite(res.y) || !std::isfinite(res.err)) {
            throw PropagationError("propagate: non-finite state encountered");
        }
        if (res.err <= 1.0) {
            y = res.y;
            if (final_step) return y;
            t += h_used;
            f = derivative(y);
            const double err = std::max(res.err, 1e-10);
            // PI controller (Gustafsson), exponents 0.7/p and 0.4/p.
            double fac = 0.9 * std::pow(err, -0.7 / kOrder) * std::pow(err_prev, 0.4 / kOrder);
            fac = std::clamp(fac, 0.2, 5.0);
            if (last_rejected) fac = std::min(fac, 1.0);
            h = h_used * fac;
            err_prev = std::max(err, 1e-4);
            last_rejected = false;
        } else {
            h = h_used * std::max(0.2, 0.9 * std::pow(res.err, -1.0 / kOrder));
            last_rejected = true;
        }
    }
    throw PropagationError("propagate: step budget exhausted");
}

}  // namespace

TwoBodySystem::TwoBodySystem(double mu) : mu_(mu)
{
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw std::invalid_argument("TwoBodySystem: mu must be positive and finite");
    }
}

Vec2 acceleration(const Vec2& r, const TwoBodySystem& system)
{
    const double rn = norm(r);
    if (rn == 0.0) throw std::invalid_argument("acceleration: zero-norm position");
    return r * (-system.mu() / (rn * rn * rn));
}

PlanarState propagate(const PlanarState& state0, double dt, const TwoBodySystem& system,
                      double tol)
{
    if (!isfinite(state0) || !std::isfinite(dt)) {
        throw PropagationError("propagate: non-finite initial state or duration");
    }
    if (norm(state0.r) == 0.0) throw std::invalid_argument("propagate: zero-norm position");
    if (!(tol > 0.0)) throw std::invalid_argument("propagate: tolerance must be positive");
    if (dt == 0.0) return state0;

    const double time_unit = std::sqrt(kAu * kAu * kAu / system.mu());
    const double velocity_unit = kAu / time_unit;
    const State y0{state0.r.x / kAu, state0.r.y / kAu, state0.v.x / velocity_unit,
                   state0.v.y / velocity_unit};
    const State y = integrate(y0, dt / time_unit, tol);
    return PlanarState{{y[0] * kAu, y[1] * kAu}, {y[2] * velocity_unit, y[3] * velocity_unit}};
}

Trajectory sample_trajectory(const PlanarState& state0, double tof, std::size_t n,
                             const TwoBodySystem& system, double tol)
{
    if (n < 2) throw std::invalid_argument("sample_trajectory: n must be >= 2");
    if (!(tof > 0.0) || !std::isfinite(tof)) {
        throw std::invalid_argument("sample_trajectory: tof must be positive");
    }
    Trajectory traj;
    traj.nodes.reserve(n);
    traj.nodes.push_back({0.0, state0});
    for (std::size_t k = 1; k < n; ++k) {
        const double t_prev = traj.nodes.back().t;
        const double t_k = grid_time(k, n, tof);
        traj.nodes.push_back({t_k, propagate(traj.nodes.back().state, t_k - t_prev, system, tol)});
    }
    return traj;
}

double specific_energy(const PlanarState& s, const TwoBodySystem& system)
{
    return 0.5 * dot(s.v, s.v) - system.mu() / norm(s.r);
}

double angular_momentum(const PlanarState& s) { return cross(s.r, s.v); }

}  // namespace trajdiff
