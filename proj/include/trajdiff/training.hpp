#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trajdiff/io.hpp"
#include "trajdiff/schedule.hpp"
#include "trajdiff/score_model.hpp"

namespace trajdiff {

/// Column-major [dim, count] float images.
struct ImageSet {
    std::span<const float> values;
    std::size_t dim = 0;

    std::size_t count() const { return dim == 0 ? 0 : values.size() / dim; }
};

/// Denoising score matching with one noise level per column.
///
/// For column b with level i_b and noise z_b: x~ = x_b + sigma z_b and the term is
/// 1/2 ||f(x~, sigma) + z_b||^2 (equivalently ||sigma s + (x~ - x)/sigma||^2 / 2). The
/// result is L times the column mean, an unbiased estimate of the sum over all L
/// levels. When grad_w is non-empty the gradient is added to it.
double dsm_loss(const ScoreModel& model, std::span<const float> w, const Eigen::MatrixXf& x0,
                const NoiseSchedule& schedule, const std::vector<std::size_t>& levels, const Eigen::MatrixXf& z,
                std::span<float> grad_w = {});

/// As above with levels drawn uniformly and z standard normal from `rng`.
double dsm_loss(const ScoreModel& model, std::span<const float> w, const Eigen::MatrixXf& x0,
                const NoiseSchedule& schedule, std::mt19937_64& rng, std::span<float> grad_w = {});

struct TrainOpts {
    double lr = 1e-4;
    std::size_t batch = 128;
    std::size_t steps = 20000;
    double ema_rate = 0.999;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 2000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool cosine_decay = false;
    std::size_t validation_batch = 512;

    void validate() const;
};

json to_json(const TrainOpts& o);
TrainOpts train_opts_from_json(const json& j);

struct LossRecord {
    std::size_t step = 0;   // optimizer steps completed
    std::size_t epoch = 0;  // epoch that just finished
    double train = 0.0;     // mean minibatch loss over the epoch
    double validation = 0.0;
};

struct TrainState {
    std::vector<float> weights;
    std::vector<float> ema;
    std::vector<float> adam_m;
    std::vector<float> adam_v;
    std::size_t step = 0;
    double epoch_loss_sum = 0.0;
    std::size_t epoch_loss_count = 0;
    std::vector<LossRecord> history;
};

TrainState init_train_state(const ScoreModel& model, std::uint64_t seed);

/// One bias-corrected Adam update; `t` is the 1-based step number.
void adam_step(std::span<float> w, std::span<const float> g, std::span<float> m, std::span<float> v, std::size_t t,
               double lr, double beta1, double beta2, double eps);

/// ema <- rate * ema + (1 - rate) * w
void ema_update(std::span<float> ema, std::span<const float> w, double rate);

/// Mean DSM loss over the whole set with noise fixed by `seed`, so repeated calls agree.
double validation_loss(const ScoreModel& model, std::span<const float> w, const ImageSet& images,
                       const NoiseSchedule& schedule, std::uint64_t seed, std::size_t batch = 512);

using CheckpointFn = std::function<void(const TrainState&)>;

/// Runs optimizer steps until state.step == opts.steps.
///
/// Step k draws its noise from a generator seeded by (seed, k) and its minibatch from
/// the permutation of epoch k / steps_per_epoch, so resuming from a saved state
/// reproduces an uninterrupted run exactly. Validation runs after every epoch.
/// `on_checkpoint` fires every checkpoint_every steps and after the final step.
/// Throws NonFiniteError naming the step if the loss or gradient stops being finite.
void train(const ScoreModel& model, TrainState& state, const ImageSet& train_set, const ImageSet& validation_set,
           const NoiseSchedule& schedule, const TrainOpts& opts, const CheckpointFn& on_checkpoint = {},
           std::vector<float>* step_losses = nullptr);

inline constexpr const char* kWeightsFile = "weights.bin";

/// Writes weights.bin (float32 weights, ema, adam m, adam v) and manifest.json.
/// `meta` is merged into the manifest (model config, schedule, row stats, upstream
/// hashes). Returns the manifest hash.
std::string save_checkpoint(const std::filesystem::path& dir, const json& meta, const TrainState& state,
                            const std::vector<TensorSpec>& layout, const json& timing = {});

struct LoadedCheckpoint {
    json manifest;
    TrainState state;
    std::string manifest_hash;
};

/// Throws FormatError on a missing file, size mismatch, or hash mismatch.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

/// CSV: step,epoch,train_loss,validation_loss
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history);

}  // namespace trajdiff
