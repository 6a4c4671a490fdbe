#include "trajdiff/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "trajdiff/errors.hpp"
#include "trajdiff/evalmetrics.hpp"
#include "trajdiff/lambert.hpp"
#include "trajdiff/parallel.hpp"
#include "trajdiff/schedule.hpp"
#include "trajdiff/score_model.hpp"

namespace trajdiff {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// JSON has no NaN; missing metrics are written as null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct MeanStd {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std = std::numeric_limits<double>::quiet_NaN();
};

MeanStd mean_std(const std::vector<double>& v)
{
    if (v.empty()) return {};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

json to_json(const MeanStd& m) { return {{"mean", number_or_null(m.mean)}, {"std", number_or_null(m.std)}}; }

std::string dataset_hash(const fs::path& dir) { return manifest_hash(read_json(dir / kManifestFile)); }

json train_config_json(const PipelineConfig& c)
{
    return {{"resolution", c.resolution},
            {"network", to_json(c.network)},
            {"schedule", {{"levels", c.schedule.levels}, {"sigma_min", c.schedule.sigma_min}}},
            {"train", to_json(c.train)}};
}

}  // namespace

void PipelineConfig::set_resolution(std::size_t n)
{
    resolution = n;
    grid.resolution = n;
    network.n = n;
}

void PipelineConfig::validate() const
{
    if (grid.resolution != resolution || network.n != resolution)
        throw std::invalid_argument(fmt::format("resolution {} disagrees with grid ({}) or network ({})", resolution,
                                                grid.resolution, network.n));
    grid.validate();
    network.validate();
    train.validate();
    sampler.validate();
    if (schedule.levels < 2 || !(schedule.sigma_min > 0.0))
        throw std::invalid_argument("schedule needs at least 2 levels and sigma_min > 0");
    if (sample_count == 0) throw std::invalid_argument("sample_count must be at least 1");
    if (!(eval.tol > 0.0) || eval.bins == 0) throw std::invalid_argument("eval needs tol > 0 and bins >= 1");
}

json to_json(const PipelineConfig& c)
{
    return {{"format_version", kFormatVersion},
            {"resolution", c.resolution},
            {"grid", to_json(c.grid)},
            {"network", to_json(c.network)},
            {"schedule", {{"levels", c.schedule.levels}, {"sigma_min", c.schedule.sigma_min}}},
            {"train", to_json(c.train)},
            {"sampler", to_json(c.sampler)},
            {"sample_count", c.sample_count},
            {"eval", {{"tol", c.eval.tol}, {"bins", c.eval.bins}}},
            {"thresholds", c.thresholds}};
}

PipelineConfig pipeline_config_from_json(const json& j)
{
    try {
        if (!j.contains("format_version")) throw FormatError("config has no format_version");
        if (j.at("format_version").get<int>() != kFormatVersion)
            throw FormatError(fmt::format("unsupported config format_version {}", j.at("format_version").dump()));
        PipelineConfig c;
        const std::size_t n = j.value("resolution", c.resolution);
        if (j.contains("grid")) c.grid = grid_config_from_json(j.at("grid"));
        if (j.contains("network")) {
            const json& net = j.at("network");
            if (net.size() == 1 && net.contains("preset")) {
                c.network = NetworkConfig::from_preset(net.at("preset").get<std::string>(), n);
            } else {
                c.network = network_config_from_json(net);
            }
        }
        c.set_resolution(n);
        if (j.contains("schedule")) {
            c.schedule.levels = j.at("schedule").value("levels", c.schedule.levels);
            c.schedule.sigma_min = j.at("schedule").value("sigma_min", c.schedule.sigma_min);
        }
        if (j.contains("train")) c.train = train_opts_from_json(j.at("train"));
        if (j.contains("sampler")) c.sampler = sampler_config_from_json(j.at("sampler"));
        c.sample_count = j.value("sample_count", c.sample_count);
        if (j.contains("eval")) {
            c.eval.tol = j.at("eval").value("tol", c.eval.tol);
            c.eval.bins = j.at("eval").value("bins", c.eval.bins);
        }
        if (j.contains("thresholds")) c.thresholds = j.at("thresholds").get<std::map<std::string, double>>();
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad config: ") + e.what());
    }
}

PipelineConfig load_pipeline_config(const fs::path& path) { return pipeline_config_from_json(read_json(path)); }

DirectoryLock::DirectoryLock(const fs::path& dir)
{
    fs::create_directories(dir);
    const fs::path path = dir / ".trajdiff.lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot create lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        throw std::runtime_error("another trajdiff command holds " + path.string());
    }
}

DirectoryLock::~DirectoryLock()
{
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

std::string cmd_gen_data(const PipelineConfig& config, const fs::path& out, std::size_t workers, std::ostream& log)
{
    config.validate();
    DirectoryLock lock(out);
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset ds = build_dataset(config.grid, workers);
    const double seconds = seconds_since(t0);
    const std::string hash = save_dataset(ds, out, {{"seconds", seconds}, {"workers", workers}});
    log << fmt::format("candidates {}\nexcluded {}\nfailed {}\naccepted {}\nwall-clock {:.1f} s ({} workers)\n",
                       ds.grid.candidates, ds.grid.excluded, ds.skipped.size(), ds.size(), seconds, workers)
        << "dataset " << hash << '\n';
    return hash;
}

std::string cmd_train(const PipelineConfig& config, const fs::path& data, const fs::path& out, std::ostream& log)
{
    config.validate();
    const Dataset ds = load_dataset(data);
    if (ds.n != config.resolution)
        throw std::invalid_argument(fmt::format("dataset resolution n={} does not match network resolution n={}",
                                                ds.n, config.resolution));
    DirectoryLock lock(out);
    const UNetScoreModel model(config.network);
    const std::size_t dim = model.input_dim();
    const std::vector<float> train_images = scaled_images(ds, ds.train);
    const std::vector<float> val_images = scaled_images(ds, ds.validation);
    const NoiseSchedule schedule =
        make_schedule(train_images, dim, config.schedule.levels, config.schedule.sigma_min, config.train.seed);

    json meta = {{"config", train_config_json(config)},
                 {"schedule", to_json(schedule)},
                 {"row_stats", to_json(ds.stats)},
                 {"param_count", model.param_count()},
                 {"upstream", {{"dataset", dataset_hash(data)}}}};

    TrainState state;
    double prior_seconds = 0.0;
    if (fs::exists(out / kManifestFile)) {
        LoadedCheckpoint ck = load_checkpoint(out);
        if (ck.manifest.at("config") != meta.at("config") || ck.manifest.at("upstream") != meta.at("upstream"))
            throw std::runtime_error(out.string() + " holds a checkpoint from a different config or dataset");
        if (ck.state.step >= config.train.steps) {
            log << "checkpoint already at step " << ck.state.step << "\ncheckpoint " << ck.manifest_hash << '\n';
            return ck.manifest_hash;
        }
        log << "resuming from step " << ck.state.step << '\n';
        prior_seconds = ck.manifest.value("timing", json::object()).value("train_seconds", 0.0);
        state = std::move(ck.state);
    } else {
        state = init_train_state(model, config.train.seed);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t start_step = state.step;
    std::string hash;
    const auto save = [&](const TrainState& s) {
        const double secs = prior_seconds + seconds_since(t0);
        const double rate = static_cast<double>(s.step - start_step) / std::max(seconds_since(t0), 1e-9);
        hash = save_checkpoint(out, meta, s, model.net().layout(),
                               {{"train_seconds", secs}, {"steps_per_second", rate}});
        write_loss_csv(out / "losses.csv", s.history);
        spdlog::info("checkpoint at step {} ({:.0f} s)", s.step, secs);
    };
    train(model, state, {train_images, dim}, {val_images, dim}, schedule, config.train, save);
    log << fmt::format("trained {} steps, {} parameters, {:.1f} s\n", state.step, model.param_count(),
                       prior_seconds + seconds_since(t0))
        << "checkpoint " << hash << '\n';
    return hash;
}

std::string cmd_sample(const PipelineConfig& config, const fs::path& checkpoint, const fs::path& out,
                       std::size_t count, std::size_t workers, std::ostream& log)
{
    config.sampler.validate();
    if (count == 0) throw std::invalid_argument("sample count must be at least 1");
    const LoadedCheckpoint ck = load_checkpoint(checkpoint);
    const json& m = ck.manifest;
    const NetworkConfig net = network_config_from_json(m.at("config").at("network"));
    if (net.n != config.resolution)
        throw std::invalid_argument(
            fmt::format("checkpoint resolution n={} does not match requested n={}", net.n, config.resolution));
    DirectoryLock lock(out);
    const NoiseSchedule schedule = schedule_from_json(m.at("schedule"));
    const RowStats stats = row_stats_from_json(m.at("row_stats"));
    const UNetScoreModel model(net);
    const ScoreFn score = model_score(model, ck.state.ema);
    const std::size_t dim = model.input_dim();

    const SampleBatch batch = sample_batch(score, schedule, config.sampler, dim, count, workers);
    const std::vector<std::uint64_t> one{chain_seed(config.sampler, 0)};
    const double single = anneal_sample(score, schedule, config.sampler, dim, one).seconds;

    std::vector<double> data(count * kStateRows * net.n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < count; ++c) {
        if (!batch.ok[c]) continue;
        const auto col = batch.x.col(static_cast<Eigen::Index>(c));
        ScaledImage img{net.n, std::vector<double>(col.data(), col.data() + col.size())};
        const std::vector<double> rows = to_rows(decode(img, stats));
        std::copy(rows.begin(), rows.end(), data.begin() + static_cast<std::ptrdiff_t>(c * kStateRows * net.n));
    }
    std::vector<std::byte> blob;
    append_bytes(blob, std::span<const double>(data));
    const std::string digest = sha256_hex(blob);
    write_bytes(out / kSamplesFile, blob);

    json failures = json::array();
    for (const auto& f : batch.failures) failures.push_back({{"chain", f.chain}, {"level", f.level}, {"step", f.step}});
    const json manifest = {
        {"format_version", kFormatVersion},
        {"kind", "samples"},
        {"count", count},
        {"n", net.n},
        {"sampler", to_json(config.sampler)},
        {"seeds", {{"base", config.sampler.seed}, {"chain", "derive_seed(base, 6, chain_index)"}}},
        {"schedule", to_json(schedule)},
        {"row_stats", to_json(stats)},
        {"network", {{"preset", net.preset}, {"param_count", model.param_count()}}},
        {"train_steps", ck.state.step},
        {"failures", failures},
        {"upstream", {{"checkpoint", ck.manifest_hash}, {"dataset", m.at("upstream").at("dataset")}}},
        {"data",
         {{"file", kSamplesFile},
          {"dtype", "float64-le"},
          {"shape", {count, kStateRows, net.n}},
          {"units", "s, m, m, m/s, m/s"},
          {"sha256", digest}}},
        {"timing",
         {{"total_seconds", batch.seconds},
          {"per_sample_seconds", batch.seconds / static_cast<double>(count)},
          {"single_chain_seconds", single},
          {"workers", workers},
          {"train_seconds", m.value("timing", json::object()).value("train_seconds", 0.0)}}}};
    write_json(out / kManifestFile, manifest);
    const std::string hash = manifest_hash(manifest);
    log << fmt::format("{} samples, {} failed chains, {:.4f} s per sample amortized, {:.3f} s single chain\n", count,
                       batch.failures.size(), batch.seconds / static_cast<double>(count), single)
        << "samples " << hash << '\n';
    return hash;
}

SampleSet load_samples(const fs::path& dir)
{
    SampleSet s;
    s.manifest = read_json(dir / kManifestFile);
    const json& m = s.manifest;
    try {
        if (m.at("format_version").get<int>() != kFormatVersion) throw FormatError("unsupported format_version");
        const std::string kind = m.at("kind").get<std::string>();
        if (kind == "dataset") {
            // A dataset evaluates as its own sample set.
            const Dataset ds = load_dataset(dir);
            s.n = ds.n;
            s.data = ds.data;
            return s;
        }
        if (kind != "samples") throw FormatError(dir.string() + " holds neither samples nor a dataset");
        s.n = m.at("n").get<std::size_t>();
        const std::size_t count = m.at("count").get<std::size_t>();
        const std::vector<std::byte> blob = read_bytes(dir / kSamplesFile);
        if (blob.size() != count * kStateRows * s.n * sizeof(double))
            throw FormatError("samples.bin size does not match manifest");
        if (sha256_hex(blob) != m.at("data").at("sha256").get<std::string>())
            throw FormatError("samples hash mismatch in " + dir.string());
        s.data = take<double>(blob, 0, count * kStateRows * s.n);
    } catch (const json::exception& e) {
        throw FormatError(dir.string() + "/manifest.json: " + e.what());
    }
    return s;
}

namespace {

struct SampleMetrics {
    Validity validity;
    std::string failure;  // metric failure on a valid sample
    LambertComparison lambert;
    DefectReport drn;
    double edrn = std::numeric_limits<double>::quiet_NaN();
    bool scored() const { return validity.ok && failure.empty(); }
};

SampleMetrics score_sample(const Trajectory& tr, double tol)
{
    SampleMetrics r;
    r.validity = validate_sample(tr);
    if (!r.validity.ok) return r;
    try {
        r.lambert = lambert_compare(tr);
        r.drn = drn(tr, tol);
        if (tr.size() >= kEdrnNodes) r.edrn = edrn(tr, tol).drn;
    } catch (const LambertError& e) {
        r.failure = std::string("lambert: ") + e.what();
    } catch (const PropagationError& e) {
        r.failure = std::string("propagation: ") + e.what();
    }
    return r;
}

}  // namespace

std::string cmd_eval(const PipelineConfig& config, const fs::path& samples, const fs::path& data, const fs::path& out,
                     std::size_t workers, std::ostream& log)
{
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const SampleSet set = load_samples(samples);
    const Dataset ds = load_dataset(data);
    const std::string data_hash = dataset_hash(data);
    const std::string samples_hash = manifest_hash(set.manifest);
    const bool self_eval = set.manifest.at("kind") == "dataset";
    const std::string upstream_data = self_eval ? samples_hash : set.manifest.at("upstream").at("dataset").get<std::string>();
    if (upstream_data != data_hash)
        throw std::invalid_argument("samples were not generated from the dataset in " + data.string());
    if (set.n < kEdrnNodes) throw std::invalid_argument("EDRN needs samples with at least 16 nodes");
    DirectoryLock lock(out);

    const std::size_t count = set.size();
    std::vector<SampleMetrics> rows(count);
    parallel_for(count, workers, [&](std::size_t i) { rows[i] = score_sample(set.trajectory(i), config.eval.tol); });

    std::vector<double> dv_i, dv_f, drns, edrns, gen_x, gen_y;
    std::vector<DefectReport> reports;
    std::map<std::string, std::size_t> reasons;
    std::size_t invalid = 0, failed = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const SampleMetrics& r = rows[i];
        if (!r.validity.ok) {
            ++invalid;
            ++reasons[r.validity.reason.substr(0, r.validity.reason.find(" at node"))];
            continue;
        }
        const Trajectory tr = set.trajectory(i);
        for (const auto& node : tr.nodes) {
            gen_x.push_back(node.state.r.x / kAu);
            gen_y.push_back(node.state.r.y / kAu);
        }
        if (!r.failure.empty()) {
            ++failed;
            continue;
        }
        dv_i.push_back(r.lambert.dv_i);
        dv_f.push_back(r.lambert.dv_f);
        drns.push_back(r.drn.drn);
        edrns.push_back(r.edrn);
        reports.push_back(r.drn);
    }

    std::vector<double> train_x, train_y;
    for (std::size_t i : ds.train) {
        const auto rws = ds.rows(i);
        for (std::size_t k = 0; k < ds.n; ++k) {
            train_x.push_back(rws[ds.n + k] / kAu);
            train_y.push_back(rws[2 * ds.n + k] / kAu);
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    json metrics = {{"rejection_rate", static_cast<double>(invalid) / static_cast<double>(count)},
                    {"metric_failure_rate", static_cast<double>(failed) / static_cast<double>(count)}};
    const MeanStd m_dvi = mean_std(dv_i), m_dvf = mean_std(dv_f), m_drn = mean_std(drns), m_edrn = mean_std(edrns);
    metrics["dv_i_mean"] = number_or_null(m_dvi.mean);
    metrics["dv_f_mean"] = number_or_null(m_dvf.mean);
    metrics["drn_mean"] = number_or_null(m_drn.mean);
    metrics["edrn_mean"] = number_or_null(m_edrn.mean);

    json files = json::object();
    const auto record = [&](const char* name) { files[name] = sha256_file(out / name); };
    json node_json = nullptr;
    double ratio = nan, slope_excess = nan;
    if (!reports.empty()) {
        const NodeDefectStats ns = per_node_defect_stats(reports);
        write_node_stats_csv(out / "node_stats.csv", ns);
        record("node_stats.csv");
        ratio = ns.norm_mean.maxCoeff() / ns.norm_mean.minCoeff();
        const std::vector<double> y(ns.norm_mean.data(), ns.norm_mean.data() + ns.norm_mean.size());
        const SlopeTest st = slope_trend(y);
        slope_excess = st.t - st.critical;
        node_json = {{"mean_norm", y},
                     {"max_over_min", number_or_null(ratio)},
                     {"slope", st.slope},
                     {"slope_stderr", st.stderr_slope},
                     {"slope_t", number_or_null(st.t)},
                     {"t_critical_95", st.critical},
                     {"significant_increase", st.significant_increase}};
    }
    metrics["node_defect_ratio"] = number_or_null(ratio);
    metrics["node_slope_excess"] = number_or_null(slope_excess);

    double tv_x = nan, tv_y = nan;
    if (!gen_x.empty()) {
        const Histogram hx = shared_histogram(train_x, gen_x, config.eval.bins);
        const Histogram hy = shared_histogram(train_y, gen_y, config.eval.bins);
        tv_x = total_variation(hx);
        tv_y = total_variation(hy);
        write_histogram_csv(out / "hist_x.csv", hx);
        write_histogram_csv(out / "hist_y.csv", hy);
        record("hist_x.csv");
        record("hist_y.csv");
    }
    metrics["tv_x"] = number_or_null(tv_x);
    metrics["tv_y"] = number_or_null(tv_y);

    {
        std::ofstream csv(out / "per_sample.csv");
        if (!csv) throw std::runtime_error("cannot write per_sample.csv");
        csv.precision(17);
        csv << "index,valid,reason,dv_i,dv_f,drn,edrn\n";
        for (std::size_t i = 0; i < count; ++i) {
            const SampleMetrics& r = rows[i];
            csv << i << ',' << (r.validity.ok ? 1 : 0) << ",\"" << (r.validity.ok ? r.failure : r.validity.reason)
                << "\",";
            if (r.scored()) {
                csv << r.lambert.dv_i << ',' << r.lambert.dv_f << ',' << r.drn.drn << ',' << r.edrn;
            } else {
                csv << ",,,";
            }
            csv << '\n';
        }
    }
    record("per_sample.csv");

    json reasons_json = json::object();
    for (const auto& [k, v] : reasons) reasons_json[k] = v;
    const json sample_timing = set.manifest.value("timing", json::object());
    json upstream = {{"samples", samples_hash}, {"dataset", data_hash}};
    if (!self_eval) upstream["checkpoint"] = set.manifest.at("upstream").at("checkpoint");

    json summary = {
        {"format_version", kFormatVersion},
        {"kind", "report"},
        {"statistics",
         {{"dv_i", to_json(m_dvi)},
          {"dv_f", to_json(m_dvf)},
          {"drn", to_json(m_drn)},
          {"edrn", to_json(m_edrn)},
          {"rejection_rate", metrics.at("rejection_rate")}}},
        {"metrics", metrics},
        {"thresholds", config.thresholds},
        {"details",
         {{"count", count},
          {"valid", count - invalid},
          {"scored", reports.size()},
          {"rejected", invalid},
          {"metric_failures", failed},
          {"rejection_reasons", reasons_json},
          {"n", set.n},
          {"network", set.manifest.value("network", json(nullptr))},
          {"train_steps", set.manifest.value("train_steps", json(nullptr))},
          {"sampler", set.manifest.value("sampler", json(nullptr))},
          {"node_defects", node_json},
          {"eval", {{"tol", config.eval.tol}, {"bins", config.eval.bins}}}}},
        {"files", files},
        {"upstream", upstream},
        {"timing", {{"eval_seconds", seconds_since(t0)}, {"sampling", sample_timing}}}};
    write_json(out / kSummaryFile, summary);
    const std::string hash = manifest_hash(summary);
    log << fmt::format("{} samples: {} rejected, {} metric failures; mean DRN {:.3e}, dv_i {:.3e}, dv_f {:.3e}\n",
                       count, invalid, failed, m_drn.mean, m_dvi.mean, m_dvf.mean)
        << "report " << hash << '\n';
    return hash;
}

int cmd_report(const std::vector<fs::path>& reports, std::ostream& out)
{
    if (reports.empty()) throw std::invalid_argument("no report directories given");
    const auto num = [](const json& v) { return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN(); };
    const auto sci = [&](const json& v) { return v.is_number() ? fmt::format("{:.3e}", v.get<double>()) : std::string("n/a"); };
    int status = 0;
    std::vector<json> summaries;
    for (const auto& dir : reports) {
        if (!fs::exists(dir / kSummaryFile)) throw std::runtime_error("missing " + (dir / kSummaryFile).string());
        const json s = read_json(dir / kSummaryFile);
        summaries.push_back(s);
        const json& t = s.at("statistics");
        const json& d = s.at("details");
        out << "== " << dir.string() << '\n';
        out << fmt::format("{:<16}{:>12}{:>12}\n", "metric", "mean", "std");
        for (const char* k : {"dv_i", "dv_f", "drn", "edrn"})
            out << fmt::format("{:<16}{:>12}{:>12}\n", k, sci(t.at(k).at("mean")), sci(t.at(k).at("std")));
        out << fmt::format("{:<16}{:>12.4f}\n", "rejection rate", num(t.at("rejection_rate")));
        out << fmt::format("samples {} valid {} scored {} metric failures {}\n", d.at("count").get<std::size_t>(),
                           d.at("valid").get<std::size_t>(), d.at("scored").get<std::size_t>(),
                           d.at("metric_failures").get<std::size_t>());
        const json& m = s.at("metrics");
        out << fmt::format("node defect max/min {}  slope t - t95 {}  TV x {}  TV y {}\n", sci(m.at("node_defect_ratio")),
                           sci(m.at("node_slope_excess")), sci(m.at("tv_x")), sci(m.at("tv_y")));
        out << "provenance:\n";
        for (const auto& [k, v] : s.at("upstream").items()) out << "  " << k << ' ' << v.get<std::string>() << '\n';
        out << "  report " << manifest_hash(s) << '\n';
        for (const auto& [name, limit] : s.at("thresholds").items()) {
            const double value = m.contains(name) ? num(m.at(name)) : std::numeric_limits<double>::quiet_NaN();
            const bool ok = value <= limit.get<double>();
            out << fmt::format("{} {}: {} (limit {})\n", ok ? "PASS" : "FAIL", name,
                               m.contains(name) ? sci(m.at(name)) : "missing", sci(limit));
            if (!ok) status = 1;
        }
    }
    if (summaries.size() > 1) {
        out << "== size ablation\n";
        out << fmt::format("{:<8}{:>12}{:>10}{:>12}{:>12}{:>12}{:>12}{:>12}{:>12}\n", "preset", "params", "steps",
                           "train h", "DRN", "dv_i", "dv_f", "rejected", "s/sample");
        for (const json& s : summaries) {
            const json& d = s.at("details");
            const json net = d.value("network", json::object());
            const json timing = s.at("timing").value("sampling", json::object());
            out << fmt::format("{:<8}{:>12}{:>10}{:>12.2f}{:>12}{:>12}{:>12}{:>12.4f}{:>12.4f}\n",
                               net.is_object() ? net.value("preset", "-") : "-",
                               net.is_object() ? net.value("param_count", std::size_t{0}) : 0,
                               d.value("train_steps", json(0)).is_number() ? d.at("train_steps").get<std::size_t>() : 0,
                               timing.value("train_seconds", 0.0) / 3600.0, sci(s.at("statistics").at("drn").at("mean")),
                               sci(s.at("statistics").at("dv_i").at("mean")), sci(s.at("statistics").at("dv_f").at("mean")),
                               num(s.at("statistics").at("rejection_rate")), timing.value("per_sample_seconds", 0.0));
        }
    }
    return status;
}

}  // namespace trajdiff
