#include "trajdiff/sampler.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "trajdiff/errors.hpp"
#include "trajdiff/parallel.hpp"
#include "trajdiff/rng.hpp"

namespace trajdiff {

void SamplerConfig::validate() const
{
    if (!(epsilon > 0.0) || steps_per_level == 0 || chains_per_batch == 0)
        throw std::invalid_argument("sampler needs epsilon > 0, T >= 1 and a positive batch size");
}

json to_json(const SamplerConfig& c)
{
    return {{"epsilon", c.epsilon}, {"T", c.steps_per_level}, {"seed", c.seed}, {"chains_per_batch", c.chains_per_batch}};
}

SamplerConfig sampler_config_from_json(const json& j)
{
    SamplerConfig c;
    c.epsilon = j.value("epsilon", c.epsilon);
    c.steps_per_level = j.value("T", c.steps_per_level);
    c.seed = j.value("seed", c.seed);
    c.chains_per_batch = j.value("chains_per_batch", c.chains_per_batch);
    c.validate();
    return c;
}

double step_size(const SamplerConfig& config, const NoiseSchedule& schedule, std::size_t level)
{
    const double s = schedule.sigmas.at(level);
    const double last = schedule.min();
    return config.epsilon * (s * s) / (last * last);
}

ScoreFn model_score(const ScoreModel& model, std::span<const float> w)
{
    return [&model, w](const Eigen::MatrixXd& x, double sigma) -> Eigen::MatrixXd {
        const Eigen::MatrixXf xf = x.cast<float>();
        auto eval = [&](const Eigen::MatrixXf& cols) {
            return model.forward(w, cols, Eigen::VectorXf::Constant(cols.cols(), static_cast<float>(sigma)));
        };
        try {
            return eval(xf).cast<double>() / sigma;
        } catch (const NonFiniteError&) {
            Eigen::MatrixXd out(x.rows(), x.cols());
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                try {
                    out.col(c) = eval(xf.col(c)).cast<double>() / sigma;
                } catch (const NonFiniteError&) {
                    out.col(c).setConstant(std::numeric_limits<double>::quiet_NaN());
                }
            }
            return out;
        }
    };
}

Eigen::MatrixXd denoise_final(const Eigen::MatrixXd& x, const ScoreFn& score, const NoiseSchedule& schedule)
{
    const double s = schedule.min();
    return x + (s * s) * score(x, s);
}

std::uint64_t chain_seed(const SamplerConfig& config, std::size_t chain)
{
    return derive_seed(config.seed, stream::kChain, chain);
}

SampleBatch anneal_sample(const ScoreFn& score, const NoiseSchedule& schedule, const SamplerConfig& config,
                          std::size_t dim, std::span<const std::uint64_t> chain_seeds)
{
    config.validate();
    schedule.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t count = chain_seeds.size();
    const auto d = static_cast<Eigen::Index>(dim);
    std::vector<std::mt19937_64> rng;
    rng.reserve(count);
    for (auto s : chain_seeds) rng.emplace_back(s);
    // One distribution per chain: normal_distribution caches half of each pair.
    std::vector<std::normal_distribution<double>> normal(count);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    SampleBatch out;
    out.ok.assign(count, 1);
    Eigen::MatrixXd x(d, static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c)
        for (Eigen::Index k = 0; k < d; ++k) x(k, static_cast<Eigen::Index>(c)) = uniform(rng[c]);

    std::vector<Eigen::Index> live;
    auto refresh_live = [&] {
        live.clear();
        for (std::size_t c = 0; c < count; ++c)
            if (out.ok[c]) live.push_back(static_cast<Eigen::Index>(c));
    };
    refresh_live();
    auto live_score = [&](double sigma) {
        if (live.size() == count) return score(x, sigma);
        Eigen::MatrixXd sub(d, static_cast<Eigen::Index>(live.size()));
        for (std::size_t j = 0; j < live.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = x.col(live[j]);
        return score(sub, sigma);
    };
    auto mark_failures = [&](std::size_t level, std::size_t step) {
        bool changed = false;
        for (auto c : live) {
            if (!x.col(c).allFinite()) {
                out.ok[static_cast<std::size_t>(c)] = 0;
                out.failures.push_back({static_cast<std::size_t>(c), level, step});
                x.col(c).setConstant(std::numeric_limits<double>::quiet_NaN());
                changed = true;
            }
        }
        if (changed) refresh_live();
    };

    for (std::size_t level = 0; level < schedule.size() && !live.empty(); ++level) {
        const double sigma = schedule.sigmas[level];
        const double alpha = step_size(config, schedule, level);
        const double noise_scale = std::sqrt(2.0 * alpha);
        for (std::size_t step = 0; step < config.steps_per_level && !live.empty(); ++step) {
            const Eigen::MatrixXd s = live_score(sigma);
            for (std::size_t j = 0; j < live.size(); ++j) {
                const Eigen::Index c = live[j];
                auto& gen = rng[static_cast<std::size_t>(c)];
                auto& z = normal[static_cast<std::size_t>(c)];
                for (Eigen::Index k = 0; k < d; ++k)
                    x(k, c) += alpha * s(k, static_cast<Eigen::Index>(j)) + noise_scale * z(gen);
            }
            mark_failures(level, step);
        }
    }
    if (!live.empty()) {
        const double last = schedule.min();
        const Eigen::MatrixXd s = live_score(last);
        for (std::size_t j = 0; j < live.size(); ++j)
            x.col(live[j]) += (last * last) * s.col(static_cast<Eigen::Index>(j));
        mark_failures(schedule.size(), 0);
    }
    out.x = std::move(x);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

SampleBatch sample_batch(const ScoreFn& score, const NoiseSchedule& schedule, const SamplerConfig& config,
                         std::size_t dim, std::size_t count, std::size_t workers)
{
    if (count == 0) throw std::invalid_argument("sample count must be at least 1");
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t per = config.chains_per_batch;
    const std::size_t batches = (count + per - 1) / per;
    std::vector<SampleBatch> parts(batches);
    parallel_for(batches, workers, [&](std::size_t b) {
        const std::size_t first = b * per;
        const std::size_t n = std::min(per, count - first);
        std::vector<std::uint64_t> seeds(n);
        for (std::size_t i = 0; i < n; ++i) seeds[i] = chain_seed(config, first + i);
        parts[b] = anneal_sample(score, schedule, config, dim, seeds);
    });
    SampleBatch out;
    out.x.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
    for (std::size_t b = 0; b < batches; ++b) {
        const std::size_t first = b * per;
        out.x.middleCols(static_cast<Eigen::Index>(first), parts[b].x.cols()) = parts[b].x;
        out.ok.insert(out.ok.end(), parts[b].ok.begin(), parts[b].ok.end());
        for (auto f : parts[b].failures) {
            f.chain += first;
            out.failures.push_back(f);
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace trajdiff
