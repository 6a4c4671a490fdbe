#include "trajdiff/lambert.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "trajdiff/errors.hpp"

namespace trajdiff {

namespace {

constexpr int kMaxIterations = 60;
constexpr double kTofResidual = 1e-12;

// Normalized time of flight as a function of the universal variable x on the
// zero-revolution branch, for a fixed lambda.
class TofFunction {
public:
    explicit TofFunction(double lambda) : lambda_(lambda), lambda2_(lambda * lambda) {}

    double operator()(double x) const
    {
        const double dist = std::abs(x - 1.0);
        if (dist < 0.2 && dist > 0.01) return lagrange(x);
        const double e = x * x - 1.0;
        const double z = std::sqrt(1.0 + lambda2_ * e);
        if (dist < 0.01) {
            const double eta = z - lambda_ * x;
            const double s1 = 0.5 * (1.0 - lambda_ - x * eta);
            const double q = 4.0 / 3.0 * hypergeometric(s1);
            return (eta * eta * eta * q + 4.0 * lambda_ * eta) / 2.0;
        }
        const double y = std::sqrt(std::abs(e));
        const double g = x * z - lambda_ * e;
        const double d = e < 0.0 ? std::acos(g) : std::log(y * (z - lambda_ * x) + g);
        return (x - lambda_ * z - d / y) / e;
    }

    // First three derivatives of the normalized tof with respect to x, given tof(x).
    void derivatives(double x, double tof, double& d1, double& d2, double& d3) const
    {
        const double l3 = lambda2_ * lambda_;
        const double umx2 = 1.0 - x * x;
        const double y = std::sqrt(1.0 - lambda2_ * umx2);
        const double y2 = y * y;
        const double y3 = y2 * y;
        d1 = (3.0 * tof * x - 2.0 + 2.0 * l3 * x / y) / umx2;
        d2 = (3.0 * tof + 5.0 * x * d1 + 2.0 * (1.0 - lambda2_) * l3 / y3) / umx2;
        d3 = (7.0 * x * d2 + 8.0 * d1 - 6.0 * (1.0 - lambda2_) * lambda2_ * l3 * x / y3 / y2) /
             umx2;
    }

private:
    double lagrange(double x) const
    {
        const double a = 1.0 / (1.0 - x * x);
        if (a > 0.0) {
            const double alfa = 2.0 * std::acos(x);
            double beta = 2.0 * std::asin(std::sqrt(lambda2_ / a));
            if (lambda_ < 0.0) beta = -beta;
            return a * std::sqrt(a) * ((alfa - std::sin(alfa)) - (beta - std::sin(beta))) / 2.0;
        }
        const double alfa = 2.0 * std::acosh(x);
        double beta = 2.0 * std::asinh(std::sqrt(-lambda2_ / a));
        if (lambda_ < 0.0) beta = -beta;
        return -a * std::sqrt(-a) * ((beta - std::sinh(beta)) - (alfa - std::sinh(alfa))) / 2.0;
    }

    static double hypergeometric(double z)
    {
        double sum = 1.0;
        double term = 1.0;
        for (int j = 0; j < 200; ++j) {
            term = term * (3.0 + j) * (1.0 + j) / (2.5 + j) * z / (j + 1.0);
            sum += term;
            if (std::abs(term) < 1e-16) break;
        }
        return sum;
    }

    double lambda_;
    double lambda2_;
};

double initial_guess(double tof, double lambda)
{
    const double lambda2 = lambda * lambda;
    const double lambda3 = lambda2 * lambda;
    const double t00 = std::acos(lambda) + lambda * std::sqrt(1.0 - lambda2);
    const double t1 = 2.0 / 3.0 * (1.0 - lambda3);
    if (tof >= t00) return -(tof - t00) / (tof - t00 + 4.0);
    if (tof <= t1) return t1 * (t1 - tof) / (0.4 * (1.0 - lambda2 * lambda3) * tof) + 1.0;
    return std::pow(tof / t00, 0.69314718055994529 / std::log(t1 / t00)) - 1.0;
}

}  // namespace

double transfer_angle_deg(const Vec2& r1, const Vec2& r2)
{
    if (norm(r1) == 0.0 || norm(r2) == 0.0) {
        throw std::invalid_argument("transfer_angle_deg: zero-norm input");
    }
    double deg = std::atan2(cross(r1, r2), dot(r1, r2)) * kRadToDeg;
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg -= 360.0;
    return deg;
}

LambertSolution solve_lambert(const LambertProblem& p)
{
    const double r1n = norm(p.r1);
    const double r2n = norm(p.r2);
    if (r1n == 0.0 || r2n == 0.0) throw LambertError("solve_lambert: zero-norm position");
    if (!(p.tof > 0.0) || !std::isfinite(p.tof)) {
        throw LambertError("solve_lambert: time of flight must be positive");
    }
    if (!(p.mu > 0.0)) throw LambertError("solve_lambert: mu must be positive");

    const Vec2 ir1 = p.r1 / r1n;
    const Vec2 ir2 = p.r2 / r2n;
    const double sin_theta = cross(ir1, ir2);
    if (sin_theta == 0.0 && dot(ir1, ir2) > 0.0) {
        throw LambertError("solve_lambert: zero transfer angle (collinear positions)");
    }

    const double c = norm(p.r2 - p.r1);
    const double s = 0.5 * (c + r1n + r2n);
    double lambda = std::sqrt(std::max(0.0, 1.0 - c / s));
    if (sin_theta < 0.0) lambda = -lambda;  // transfer angle beyond 180 deg
    // Prograde tangential directions, z-hat cross r-hat.
    const Vec2 it1{-ir1.y, ir1.x};
    const Vec2 it2{-ir2.y, ir2.x};

    const double tof_norm = std::sqrt(2.0 * p.mu / (s * s * s)) * p.tof;
    const TofFunction tof_of(lambda);

    double x = initial_guess(tof_norm, lambda);
    int it = 0;
    for (;; ++it) {
        if (!std::isfinite(x)) throw LambertError("solve_lambert: iteration diverged");
        const double tof_x = tof_of(x);
        const double delta = tof_x - tof_norm;
        if (std::abs(delta) <= kTofResidual) break;
        if (it >= kMaxIterations) {
            throw LambertError("solve_lambert: no convergence after " +
                               std::to_string(kMaxIterations) + " iterations (residual " +
                               std::to_string(delta) + ")");
        }
        double d1, d2, d3;
        tof_of.derivatives(x, tof_x, d1, d2, d3);
        const double d1sq = d1 * d1;
        double x_new = x - delta * (d1sq - delta * d2 / 2.0) /
                               (d1 * (d1sq - delta * d2) + d3 * delta * delta / 6.0);
        if (x_new <= -1.0) x_new = 0.5 * (x - 1.0);
        if (x_new == x) {
            throw LambertError("solve_lambert: iteration stalled (residual " +
                               std::to_string(delta) + ")");
        }
        x = x_new;
    }

    const double gamma = std::sqrt(p.mu * s / 2.0);
    const double rho = (r1n - r2n) / c;
    const double sigma = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const double y = std::sqrt(1.0 - lambda * lambda + lambda * lambda * x * x);
    const double vr1 = gamma * ((lambda * y - x) - rho * (lambda * y + x)) / r1n;
    const double vr2 = -gamma * ((lambda * y - x) + rho * (lambda * y + x)) / r2n;
    const double vt = gamma * sigma * (y + lambda * x);

    LambertSolution sol;
    sol.v1 = ir1 * vr1 + it1 * (vt / r1n);
    sol.v2 = ir2 * vr2 + it2 * (vt / r2n);
    sol.iterations = it;
    if (!isfinite(sol.v1) || !isfinite(sol.v2)) {
        throw LambertError("solve_lambert: non-finite velocity");
    }
    return sol;
}

}  // namespace trajdiff
