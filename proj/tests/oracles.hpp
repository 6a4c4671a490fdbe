// Independent closed-form references shared by the unit tests and the acceptance suite.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "trajdiff/network.hpp"
#include "trajdiff/score_model.hpp"

namespace trajdiff::oracle {

/// Score of the equal mixture of N(-1, s^2) and N(+1, s^2).
inline double two_point_score(double x, double sigma)
{
    const double v = sigma * sigma;
    return (std::tanh(x / v) - x) / v;
}

/// Expected per-level DSM term 1/2 E (f(x0 + sigma z) + z)^2 over x0 in {-1, +1} and
/// z ~ N(0, 1), by the trapezoid rule on [-8, 8]. `f` maps a row of inputs to f values.
template <typename F>
double two_point_level_loss(F&& f, double sigma, std::size_t nodes = 4001)
{
    const double h = 16.0 / static_cast<double>(nodes - 1);
    Eigen::MatrixXf x(1, static_cast<Eigen::Index>(nodes));
    std::vector<double> z(nodes), weight(nodes);
    double total = 0.0;
    for (double x0 : {-1.0, 1.0}) {
        for (std::size_t k = 0; k < nodes; ++k) {
            z[k] = -8.0 + h * static_cast<double>(k);
            weight[k] = h * std::exp(-0.5 * z[k] * z[k]) / std::sqrt(2.0 * M_PI) * ((k == 0 || k + 1 == nodes) ? 0.5 : 1.0);
            x(0, static_cast<Eigen::Index>(k)) = static_cast<float>(x0 + sigma * z[k]);
        }
        const std::vector<double> fv = f(x, sigma);
        for (std::size_t k = 0; k < nodes; ++k) total += 0.5 * weight[k] * 0.5 * (fv[k] + z[k]) * (fv[k] + z[k]);
    }
    return total;
}

/// The minimum of the level loss, attained by the true marginal score.
inline double two_point_min_level_loss(double sigma)
{
    return two_point_level_loss(
        [](const Eigen::MatrixXf& x, double s) {
            std::vector<double> out(static_cast<std::size_t>(x.cols()));
            for (Eigen::Index k = 0; k < x.cols(); ++k) out[static_cast<std::size_t>(k)] = s * two_point_score(x(0, k), s);
            return out;
        },
        sigma);
}

/// Score of N(m, (s^2 + sigma^2) I), the Gaussian target perturbed at level sigma.
inline void gaussian_score(const Eigen::MatrixXd& x, double sigma, double m, double s, Eigen::MatrixXd& out)
{
    out = -(x.array() - m) / (s * s + sigma * sigma);
}

struct Moments {
    double mean;
    double var;
};

/// Exact per-component mean and variance of annealed Langevin on N(m, s^2 I) with the
/// analytic score, started from U(0, 1), including the final denoise step.
inline Moments langevin_gaussian_moments(const std::vector<double>& sigmas, double eps, std::size_t steps, double m,
                                         double s)
{
    double mean = 0.5, var = 1.0 / 12.0;
    const double last2 = sigmas.back() * sigmas.back();
    for (double sigma : sigmas) {
        const double alpha = eps * sigma * sigma / last2;
        const double k = 1.0 - alpha / (s * s + sigma * sigma);
        for (std::size_t t = 0; t < steps; ++t) {
            mean = m + k * (mean - m);
            var = k * k * var + 2.0 * alpha;
        }
    }
    const double g = s * s / (s * s + last2);
    return {m + g * (mean - m), g * g * var};
}

/// Central finite difference of `loss` with respect to w[i], in double precision.
template <typename F>
double central_difference(F&& loss, std::vector<double>& w, std::size_t i, double rel_step = 1e-6)
{
    const double orig = w[i];
    const double h = rel_step * std::max(1.0, std::abs(orig));
    w[i] = orig + h;
    const double up = loss(w);
    w[i] = orig - h;
    const double down = loss(w);
    w[i] = orig;
    return (up - down) / (2.0 * h);
}

}  // namespace trajdiff::oracle
