#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "trajdiff/io.hpp"
#include "trajdiff/schedule.hpp"
#include "trajdiff/score_model.hpp"

namespace trajdiff {

struct SamplerConfig {
    double epsilon = 2e-6;
    std::size_t steps_per_level = 5;  // T
    std::uint64_t seed = 0;
    std::size_t chains_per_batch = 100;

    void validate() const;
};

json to_json(const SamplerConfig& c);
SamplerConfig sampler_config_from_json(const json& j);

/// alpha_i = epsilon * sigma_i^2 / sigma_L^2 for level i (0-based).
double step_size(const SamplerConfig& config, const NoiseSchedule& schedule, std::size_t level);

/// s(x, sigma) for a [dim, B] batch of columns.
using ScoreFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x, double sigma)>;

/// s = f / sigma from a trained model, evaluated in float32. Columns whose output is
/// not finite come back as NaN instead of failing the whole batch.
ScoreFn model_score(const ScoreModel& model, std::span<const float> w);

/// x + sigma_L^2 s(x, sigma_L); the sampler applies it exactly once.
Eigen::MatrixXd denoise_final(const Eigen::MatrixXd& x, const ScoreFn& score, const NoiseSchedule& schedule);

struct ChainFailure {
    std::size_t chain = 0;
    std::size_t level = 0;
    std::size_t step = 0;
};

struct SampleBatch {
    Eigen::MatrixXd x;       // [dim, count]; failed chains hold NaN
    std::vector<char> ok;    // per chain
    std::vector<ChainFailure> failures;
    double seconds = 0.0;    // wall-clock for the whole batch
};

/// Annealed Langevin dynamics for one batch of chains, one generator per chain.
///
/// Each chain starts from U(0, 1) noise, takes T steps
/// x <- x + alpha_i s(x, sigma_i) + sqrt(2 alpha_i) z at every level in decreasing
/// sigma order, and ends with the final denoise. A chain whose state stops being
/// finite is frozen, recorded with its level and step, and left out of later
/// score evaluations.
SampleBatch anneal_sample(const ScoreFn& score, const NoiseSchedule& schedule, const SamplerConfig& config,
                          std::size_t dim, std::span<const std::uint64_t> chain_seeds);

/// Seed of chain c: a pure function of (config.seed, c).
std::uint64_t chain_seed(const SamplerConfig& config, std::size_t chain);

/// `count` chains in batches of config.chains_per_batch, spread over `workers`.
/// Output does not depend on the worker count.
SampleBatch sample_batch(const ScoreFn& score, const NoiseSchedule& schedule, const SamplerConfig& config,
                         std::size_t dim, std::size_t count, std::size_t workers = 1);

}  // namespace trajdiff
