#include "trajdiff/training.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <algorithm>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "trajdiff/errors.hpp"
#include "trajdiff/rng.hpp"

namespace trajdiff {

double dsm_loss(const ScoreModel& model, std::span<const float> w, const Eigen::MatrixXf& x0,
                const NoiseSchedule& schedule, const std::vector<std::size_t>& levels, const Eigen::MatrixXf& z,
                std::span<float> grad_w)
{
    const Eigen::Index batch = x0.cols();
    if (batch == 0) throw std::invalid_argument("empty batch");
    if (static_cast<Eigen::Index>(levels.size()) != batch || z.rows() != x0.rows() || z.cols() != batch)
        throw std::invalid_argument("levels and noise must match the batch");
    Eigen::VectorXf sigma(batch);
    for (Eigen::Index b = 0; b < batch; ++b) sigma[b] = static_cast<float>(schedule.sigmas.at(levels[static_cast<std::size_t>(b)]));
    const Eigen::MatrixXf noisy = x0 + z * sigma.asDiagonal();
    Tape<float> tape;
    const Eigen::MatrixXf f = model.forward(w, noisy, sigma, grad_w.empty() ? nullptr : &tape);
    const Eigen::MatrixXf resid = f + z;
    const double scale = static_cast<double>(schedule.size()) / static_cast<double>(batch);
    const double loss = 0.5 * scale * static_cast<double>(resid.squaredNorm());
    if (!grad_w.empty()) model.backward(w, tape, static_cast<float>(scale) * resid, grad_w);
    return loss;
}

double dsm_loss(const ScoreModel& model, std::span<const float> w, const Eigen::MatrixXf& x0,
                const NoiseSchedule& schedule, std::mt19937_64& rng, std::span<float> grad_w)
{
    std::uniform_int_distribution<std::size_t> pick(0, schedule.size() - 1);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::vector<std::size_t> levels(static_cast<std::size_t>(x0.cols()));
    for (auto& l : levels) l = pick(rng);
    Eigen::MatrixXf z(x0.rows(), x0.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    return dsm_loss(model, w, x0, schedule, levels, z, grad_w);
}

void TrainOpts::validate() const
{
    if (!(lr > 0.0) || batch == 0 || !(ema_rate >= 0.0 && ema_rate < 1.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
        !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0) || validation_batch == 0)
        throw std::invalid_argument("invalid training options");
}

json to_json(const TrainOpts& o)
{
    return {{"lr", o.lr},
            {"batch", o.batch},
            {"steps", o.steps},
            {"ema_rate", o.ema_rate},
            {"seed", o.seed},
            {"checkpoint_every", o.checkpoint_every},
            {"beta1", o.beta1},
            {"beta2", o.beta2},
            {"adam_eps", o.adam_eps},
            {"cosine_decay", o.cosine_decay},
            {"validation_batch", o.validation_batch}};
}

TrainOpts train_opts_from_json(const json& j)
{
    TrainOpts o;
    o.lr = j.value("lr", o.lr);
    o.batch = j.value("batch", o.batch);
    o.steps = j.value("steps", o.steps);
    o.ema_rate = j.value("ema_rate", o.ema_rate);
    o.seed = j.value("seed", o.seed);
    o.checkpoint_every = j.value("checkpoint_every", o.checkpoint_every);
    o.beta1 = j.value("beta1", o.beta1);
    o.beta2 = j.value("beta2", o.beta2);
    o.adam_eps = j.value("adam_eps", o.adam_eps);
    o.cosine_decay = j.value("cosine_decay", o.cosine_decay);
    o.validation_batch = j.value("validation_batch", o.validation_batch);
    o.validate();
    return o;
}

TrainState init_train_state(const ScoreModel& model, std::uint64_t seed)
{
    TrainState s;
    const std::size_t p = model.param_count();
    s.weights.resize(p);
    model.init(seed, s.weights);
    s.ema = s.weights;
    s.adam_m.assign(p, 0.0f);
    s.adam_v.assign(p, 0.0f);
    return s;
}

void adam_step(std::span<float> w, std::span<const float> g, std::span<float> m, std::span<float> v, std::size_t t,
               double lr, double beta1, double beta2, double eps)
{
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i];
        const double mi = beta1 * m[i] + (1.0 - beta1) * gi;
        const double vi = beta2 * v[i] + (1.0 - beta2) * gi * gi;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        w[i] = static_cast<float>(w[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
    }
}

void ema_update(std::span<float> ema, std::span<const float> w, double rate)
{
    for (std::size_t i = 0; i < ema.size(); ++i)
        ema[i] = static_cast<float>(rate * ema[i] + (1.0 - rate) * w[i]);
}

namespace {

Eigen::MatrixXf gather(const ImageSet& set, std::span<const std::size_t> idx)
{
    Eigen::MatrixXf x(static_cast<Eigen::Index>(set.dim), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t b = 0; b < idx.size(); ++b)
        x.col(static_cast<Eigen::Index>(b)) =
            Eigen::Map<const Eigen::VectorXf>(set.values.data() + idx[b] * set.dim, static_cast<Eigen::Index>(set.dim));
    return x;
}

std::vector<std::size_t> epoch_permutation(std::size_t count, std::uint64_t seed, std::size_t epoch)
{
    std::vector<std::size_t> perm(count);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, stream::kEpoch, epoch));
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

}  // namespace

double validation_loss(const ScoreModel& model, std::span<const float> w, const ImageSet& images,
                       const NoiseSchedule& schedule, std::uint64_t seed, std::size_t batch)
{
    const std::size_t count = images.count();
    if (count == 0) return std::nan("");
    double total = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0, chunk = 0; start < count; start += batch, ++chunk) {
        const std::size_t end = std::min(count, start + batch);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        std::mt19937_64 rng(derive_seed(seed, stream::kValidation, chunk));
        total += dsm_loss(model, w, gather(images, idx), schedule, rng) * static_cast<double>(idx.size());
    }
    return total / static_cast<double>(count);
}

void train(const ScoreModel& model, TrainState& state, const ImageSet& train_set, const ImageSet& validation_set,
           const NoiseSchedule& schedule, const TrainOpts& opts, const CheckpointFn& on_checkpoint,
           std::vector<float>* step_losses)
{
    opts.validate();
    schedule.validate();
    if (train_set.count() == 0) throw std::invalid_argument("training set is empty");
    if (train_set.dim != model.input_dim()) throw std::invalid_argument("image size does not match the model");
    if (state.weights.size() != model.param_count()) throw std::invalid_argument("state does not match the model");
    const std::size_t batch = std::min(opts.batch, train_set.count());
    const std::size_t per_epoch = train_set.count() / batch;
    std::vector<float> grad(model.param_count());
    std::vector<std::size_t> perm;
    std::size_t perm_epoch = static_cast<std::size_t>(-1);

    while (state.step < opts.steps) {
        const std::size_t step = state.step;
        const std::size_t epoch = step / per_epoch;
        if (epoch != perm_epoch) {
            perm = epoch_permutation(train_set.count(), opts.seed, epoch);
            perm_epoch = epoch;
        }
        const std::span<const std::size_t> idx(perm.data() + (step % per_epoch) * batch, batch);
        std::mt19937_64 rng(derive_seed(opts.seed, stream::kTrainStep, step));
        std::fill(grad.begin(), grad.end(), 0.0f);
        double loss = 0.0;
        try {
            loss = dsm_loss(model, state.weights, gather(train_set, idx), schedule, rng, grad);
        } catch (const NonFiniteError& e) {
            throw NonFiniteError(std::string(e.what()) + " at training step " + std::to_string(step));
        }
        const bool grad_ok = std::all_of(grad.begin(), grad.end(), [](float g) { return std::isfinite(g); });
        if (!std::isfinite(loss) || !grad_ok)
            throw NonFiniteError("non-finite loss or gradient at training step " + std::to_string(step));

        double lr = opts.lr;
        if (opts.cosine_decay)
            lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(opts.steps)));
        adam_step(state.weights, grad, state.adam_m, state.adam_v, step + 1, lr, opts.beta1, opts.beta2, opts.adam_eps);
        ema_update(state.ema, state.weights, opts.ema_rate);
        ++state.step;
        state.epoch_loss_sum += loss;
        ++state.epoch_loss_count;
        if (step_losses) step_losses->push_back(static_cast<float>(loss));

        if (state.step % per_epoch == 0) {
            LossRecord rec{state.step, epoch, state.epoch_loss_sum / static_cast<double>(state.epoch_loss_count),
                           validation_loss(model, state.weights, validation_set, schedule, opts.seed,
                                           opts.validation_batch)};
            state.history.push_back(rec);
            state.epoch_loss_sum = 0.0;
            state.epoch_loss_count = 0;
            spdlog::info("epoch {} step {}: train {:.5f} validation {:.5f}", rec.epoch, rec.step, rec.train,
                         rec.validation);
        }
        const bool due = opts.checkpoint_every > 0 && state.step % opts.checkpoint_every == 0;
        if (on_checkpoint && (due || state.step == opts.steps)) on_checkpoint(state);
    }
}

std::string save_checkpoint(const std::filesystem::path& dir, const json& meta, const TrainState& state,
                            const std::vector<TensorSpec>& layout, const json& timing)
{
    std::filesystem::create_directories(dir);
    const std::size_t p = state.weights.size();
    std::vector<std::byte> blob;
    blob.reserve(4 * p * sizeof(float));
    for (const auto* v : {&state.weights, &state.ema, &state.adam_m, &state.adam_v}) {
        if (v->size() != p) throw std::invalid_argument("train state sections differ in length");
        append_bytes(blob, std::span<const float>(*v));
    }
    const std::string digest = sha256_hex(blob);
    write_bytes(dir / kWeightsFile, blob);

    json history = json::array();
    for (const auto& r : state.history) history.push_back({r.step, r.epoch, r.train, r.validation});
    json manifest = meta;
    manifest["format_version"] = kFormatVersion;
    manifest["kind"] = "checkpoint";
    manifest["step"] = state.step;
    manifest["epoch_loss"] = {state.epoch_loss_sum, state.epoch_loss_count};
    manifest["history"] = history;
    manifest["tensors"] = to_json(layout);
    manifest["weights"] = {{"file", kWeightsFile},
                           {"dtype", "float32-le"},
                           {"count", p},
                           {"sections", {"weights", "ema", "adam_m", "adam_v"}},
                           {"sha256", digest}};
    if (!timing.is_null()) manifest["timing"] = timing;
    write_json(dir / kManifestFile, manifest);
    return manifest_hash(manifest);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir)
{
    LoadedCheckpoint out;
    out.manifest = read_json(dir / kManifestFile);
    const json& m = out.manifest;
    try {
        if (m.at("format_version").get<int>() != kFormatVersion) throw FormatError("unsupported format_version");
        if (m.at("kind") != "checkpoint") throw FormatError(dir.string() + " is not a checkpoint");
        const std::size_t p = m.at("weights").at("count").get<std::size_t>();
        const std::vector<std::byte> blob = read_bytes(dir / kWeightsFile);
        if (blob.size() != 4 * p * sizeof(float)) throw FormatError("weights.bin size does not match manifest");
        if (sha256_hex(blob) != m.at("weights").at("sha256").get<std::string>())
            throw FormatError("checkpoint hash mismatch in " + dir.string());
        TrainState& s = out.state;
        s.weights = take<float>(blob, 0, p);
        s.ema = take<float>(blob, p * sizeof(float), p);
        s.adam_m = take<float>(blob, 2 * p * sizeof(float), p);
        s.adam_v = take<float>(blob, 3 * p * sizeof(float), p);
        s.step = m.at("step").get<std::size_t>();
        s.epoch_loss_sum = m.at("epoch_loss").at(0).get<double>();
        s.epoch_loss_count = m.at("epoch_loss").at(1).get<std::size_t>();
        for (const auto& r : m.at("history"))
            s.history.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>(), r.at(2).get<double>(),
                                 r.at(3).is_null() ? std::nan("") : r.at(3).get<double>()});
    } catch (const json::exception& e) {
        throw FormatError(dir.string() + "/manifest.json: " + e.what());
    }
    out.manifest_hash = manifest_hash(m);
    return out;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "step,epoch,train_loss,validation_loss\n";
    out.precision(9);
    for (const auto& r : history) out << r.step << ',' << r.epoch << ',' << r.train << ',' << r.validation << '\n';
}

}  // namespace trajdiff
