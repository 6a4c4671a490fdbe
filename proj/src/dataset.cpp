#include "trajdiff/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>

#include "trajdiff/errors.hpp"
#include "trajdiff/parallel.hpp"

namespace trajdiff {

namespace {

std::size_t inclusive_count(double lo, double hi, double step)
{
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

void require(bool ok, const char* what)
{
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void GridConfig::validate() const
{
    require(std::isfinite(launch_start.mjd2000) && std::isfinite(launch_end.mjd2000), "launch window not finite");
    require(launch_start.mjd2000 < launch_end.mjd2000, "launch_start must precede launch_end");
    require(launch_step > 0.0, "launch_step must be positive");
    require(tof_min > 0.0 && tof_min < tof_max, "need 0 < tof_min < tof_max");
    require(tof_step > 0.0, "tof_step must be positive");
    require(exclusion_lo <= exclusion_hi, "exclusion band reversed");
    require(resolution >= 2 && resolution % 2 == 0, "resolution must be even and >= 2");
    require(tol > 0.0, "tolerance must be positive");
}

std::size_t GridConfig::launch_count() const
{
    return inclusive_count(launch_start.mjd2000, launch_end.mjd2000, launch_step);
}

std::size_t GridConfig::tof_count() const { return inclusive_count(tof_min, tof_max, tof_step); }

json to_json(const GridConfig& c)
{
    return {{"launch_start", c.launch_start.mjd2000},
            {"launch_end", c.launch_end.mjd2000},
            {"launch_step", c.launch_step},
            {"tof_min", c.tof_min},
            {"tof_max", c.tof_max},
            {"tof_step", c.tof_step},
            {"exclusion", {c.exclusion_lo, c.exclusion_hi}},
            {"resolution", c.resolution},
            {"seed", c.seed},
            {"tol", c.tol}};
}

GridConfig grid_config_from_json(const json& j)
{
    GridConfig c;
    c.launch_start.mjd2000 = j.value("launch_start", c.launch_start.mjd2000);
    c.launch_end.mjd2000 = j.value("launch_end", c.launch_end.mjd2000);
    c.launch_step = j.value("launch_step", c.launch_step);
    c.tof_min = j.value("tof_min", c.tof_min);
    c.tof_max = j.value("tof_max", c.tof_max);
    c.tof_step = j.value("tof_step", c.tof_step);
    if (j.contains("exclusion")) {
        c.exclusion_lo = j.at("exclusion").at(0).get<double>();
        c.exclusion_hi = j.at("exclusion").at(1).get<double>();
    }
    c.resolution = j.value("resolution", c.resolution);
    c.seed = j.value("seed", c.seed);
    c.tol = j.value("tol", c.tol);
    c.validate();
    return c;
}

bool in_exclusion_band(double theta, const GridConfig& config)
{
    return theta > config.exclusion_lo && theta < config.exclusion_hi;
}

std::vector<GridProblem> build_grid(const GridConfig& config, GridSummary* summary)
{
    config.validate();
    const std::size_t nl = config.launch_count();
    const std::size_t nt = config.tof_count();
    std::vector<GridProblem> out;
    out.reserve(nl * nt);
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < nl; ++i) {
        const Epoch launch{config.launch_start.mjd2000 + static_cast<double>(i) * config.launch_step};
        const Vec2 r1 = planet_state(Body::Earth, launch).r;
        for (std::size_t k = 0; k < nt; ++k) {
            const double tof_days = config.tof_min + static_cast<double>(k) * config.tof_step;
            const Vec2 r2 = planet_state(Body::Mars, Epoch{launch.mjd2000 + tof_days}).r;
            const double theta = transfer_angle_deg(r1, r2);
            if (in_exclusion_band(theta, config)) {
                ++excluded;
                continue;
            }
            out.push_back({{r1, r2, tof_days * kDay, kMuSun}, launch, tof_days, theta, i * nt + k});
        }
    }
    if (summary) *summary = {nl * nt, excluded};
    return out;
}

void RowStats::validate() const
{
    for (std::size_t r = 0; r < kStateRows; ++r) {
        if (!std::isfinite(min[r]) || !std::isfinite(max[r]) || !(min[r] < max[r]))
            throw std::invalid_argument("degenerate row statistics for row " + std::to_string(r));
    }
}

json to_json(const RowStats& s) { return {{"rows", {"t", "x", "y", "vx", "vy"}}, {"min", s.min}, {"max", s.max}}; }

RowStats row_stats_from_json(const json& j)
{
    RowStats s;
    s.min = j.at("min").get<std::array<double, kStateRows>>();
    s.max = j.at("max").get<std::array<double, kStateRows>>();
    s.validate();
    return s;
}

std::vector<double> to_rows(const Trajectory& traj)
{
    const std::size_t n = traj.size();
    std::vector<double> rows(kStateRows * n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& node = traj[k];
        rows[0 * n + k] = node.t;
        rows[1 * n + k] = node.state.r.x;
        rows[2 * n + k] = node.state.r.y;
        rows[3 * n + k] = node.state.v.x;
        rows[4 * n + k] = node.state.v.y;
    }
    return rows;
}

Trajectory from_rows(std::span<const double> rows, std::size_t n)
{
    if (rows.size() != kStateRows * n) throw std::invalid_argument("row tensor does not hold 5 x n values");
    Trajectory traj;
    traj.nodes.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        traj[k].t = rows[k];
        traj[k].state = {{rows[n + k], rows[2 * n + k]}, {rows[3 * n + k], rows[4 * n + k]}};
    }
    return traj;
}

ScaledImage encode(const Trajectory& traj, const RowStats& stats)
{
    stats.validate();
    const std::size_t n = traj.size();
    const std::vector<double> rows = to_rows(traj);
    ScaledImage img{n, std::vector<double>(kImageRows * n, 0.0)};
    for (std::size_t r = 0; r < kStateRows; ++r) {
        const double span = stats.max[r] - stats.min[r];
        for (std::size_t k = 0; k < n; ++k) img(r, k) = (rows[r * n + k] - stats.min[r]) / span;
    }
    return img;
}

Trajectory decode(const ScaledImage& img, const RowStats& stats)
{
    stats.validate();
    if (img.values.size() != kImageRows * img.n) throw std::invalid_argument("image is not [6, n]");
    const std::size_t n = img.n;
    std::vector<double> rows(kStateRows * n);
    for (std::size_t r = 0; r < kStateRows; ++r) {
        const double span = stats.max[r] - stats.min[r];
        for (std::size_t k = 0; k < n; ++k) rows[r * n + k] = stats.min[r] + img(r, k) * span;
    }
    return from_rows(rows, n);
}

RowStats compute_row_stats(std::span<const double> data, std::size_t n)
{
    RowStats s;
    s.min.fill(std::numeric_limits<double>::infinity());
    s.max.fill(-std::numeric_limits<double>::infinity());
    const std::size_t m = data.size() / (kStateRows * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t r = 0; r < kStateRows; ++r) {
            const double* row = data.data() + (i * kStateRows + r) * n;
            const auto [lo, hi] = std::minmax_element(row, row + n);
            s.min[r] = std::min(s.min[r], *lo);
            s.max[r] = std::max(s.max[r], *hi);
        }
    }
    s.validate();
    return s;
}

void split_indices(std::size_t m, std::uint64_t seed, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& validation)
{
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t n_train = (9 * m + 9) / 10;  // ceil(0.9 m)
    train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
}

Dataset build_dataset(const GridConfig& config, std::size_t workers)
{
    Dataset ds;
    ds.config = config;
    ds.n = config.resolution;
    const std::vector<GridProblem> grid = build_grid(config, &ds.grid);
    const TwoBodySystem sun{kMuSun};
    const std::size_t n = ds.n;

    std::vector<std::optional<std::vector<double>>> rows(grid.size());
    std::vector<std::string> failure(grid.size());
    parallel_for(grid.size(), workers, [&](std::size_t i) {
        const GridProblem& g = grid[i];
        try {
            const LambertSolution sol = solve_lambert(g.problem);
            const Trajectory tr = sample_trajectory({g.problem.r1, sol.v1}, g.problem.tof, n, sun, config.tol);
            const double miss = norm(tr.back().state.r - g.problem.r2) / kAu;
            if (!(miss <= 1e-6)) {
                failure[i] = "round-trip miss " + std::to_string(miss) + " AU";
                return;
            }
            rows[i] = to_rows(tr);
        } catch (const LambertError& e) {
            failure[i] = std::string("lambert: ") + e.what();
        } catch (const PropagationError& e) {
            failure[i] = std::string("propagation: ") + e.what();
        }
    });

    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!rows[i]) {
            spdlog::warn("skipping candidate {} (launch {}, tof {} d): {}", grid[i].candidate_index,
                         grid[i].launch.mjd2000, grid[i].tof_days, failure[i]);
            ds.skipped.push_back({grid[i].candidate_index, failure[i]});
            continue;
        }
        ds.data.insert(ds.data.end(), rows[i]->begin(), rows[i]->end());
        ds.launch_epochs.push_back(grid[i].launch.mjd2000);
        ds.candidate_index.push_back(grid[i].candidate_index);
    }
    if (ds.size() == 0) throw std::runtime_error("dataset is empty");
    ds.stats = compute_row_stats(ds.data, n);
    split_indices(ds.size(), config.seed, ds.train, ds.validation);
    return ds;
}

std::vector<float> scaled_images(const Dataset& ds, std::span<const std::size_t> indices)
{
    const std::size_t n = ds.n;
    std::vector<float> out(indices.size() * kImageRows * n, 0.0f);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto rows = ds.rows(indices[b]);
        float* img = out.data() + b * kImageRows * n;
        for (std::size_t r = 0; r < kStateRows; ++r) {
            const double lo = ds.stats.min[r];
            const double span = ds.stats.max[r] - lo;
            for (std::size_t k = 0; k < n; ++k) img[r * n + k] = static_cast<float>((rows[r * n + k] - lo) / span);
        }
    }
    return out;
}

json dataset_manifest(const Dataset& ds, const std::string& data_sha256)
{
    json skipped = json::array();
    for (const auto& s : ds.skipped) skipped.push_back({{"candidate", s.candidate_index}, {"reason", s.reason}});
    return {{"format_version", kFormatVersion},
            {"kind", "dataset"},
            {"config", to_json(ds.config)},
            {"counts",
             {{"candidates", ds.grid.candidates},
              {"excluded", ds.grid.excluded},
              {"failed", ds.skipped.size()},
              {"accepted", ds.size()}}},
            {"skipped", skipped},
            {"row_stats", to_json(ds.stats)},
            {"split", {{"train", ds.train}, {"validation", ds.validation}}},
            {"candidate_index", ds.candidate_index},
            {"data",
             {{"file", kDataFile},
              {"dtype", "float64-le"},
              {"shape", {ds.size(), kStateRows, ds.n}},
              {"units", "s, m, m, m/s, m/s"},
              {"trailer", "launch epoch float64 [M], days since J2000"},
              {"sha256", data_sha256}}}};
}

std::string save_dataset(const Dataset& ds, const std::filesystem::path& dir, const json& timing)
{
    std::filesystem::create_directories(dir);
    std::vector<std::byte> blob;
    blob.reserve((ds.data.size() + ds.launch_epochs.size()) * sizeof(double));
    append_bytes(blob, std::span<const double>(ds.data));
    append_bytes(blob, std::span<const double>(ds.launch_epochs));
    const std::string digest = sha256_hex(blob);
    write_bytes(dir / kDataFile, blob);
    json manifest = dataset_manifest(ds, digest);
    if (!timing.is_null()) manifest["timing"] = timing;
    write_json(dir / kManifestFile, manifest);
    return manifest_hash(manifest);
}

Dataset load_dataset(const std::filesystem::path& dir)
{
    const json m = read_json(dir / kManifestFile);
    try {
        if (m.at("format_version").get<int>() != kFormatVersion) throw FormatError("unsupported format_version");
        if (m.at("kind") != "dataset") throw FormatError(dir.string() + " is not a dataset");
        Dataset ds;
        ds.config = grid_config_from_json(m.at("config"));
        const auto shape = m.at("data").at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 3 || shape[1] != kStateRows) throw FormatError("bad data shape");
        ds.n = shape[2];
        if (ds.n != ds.config.resolution) throw FormatError("data shape disagrees with resolution");
        const std::size_t count = shape[0];
        const std::vector<std::byte> blob = read_bytes(dir / kDataFile);
        if (blob.size() != count * (kStateRows * ds.n + 1) * sizeof(double))
            throw FormatError("data.bin size does not match manifest shape");
        if (sha256_hex(blob) != m.at("data").at("sha256").get<std::string>())
            throw FormatError("data.bin hash mismatch");
        ds.data = take<double>(blob, 0, count * kStateRows * ds.n);
        ds.launch_epochs = take<double>(blob, ds.data.size() * sizeof(double), count);
        ds.stats = row_stats_from_json(m.at("row_stats"));
        ds.train = m.at("split").at("train").get<std::vector<std::size_t>>();
        ds.validation = m.at("split").at("validation").get<std::vector<std::size_t>>();
        ds.candidate_index = m.at("candidate_index").get<std::vector<std::size_t>>();
        ds.grid.candidates = m.at("counts").at("candidates").get<std::size_t>();
        ds.grid.excluded = m.at("counts").at("excluded").get<std::size_t>();
        for (const auto& s : m.at("skipped"))
            ds.skipped.push_back({s.at("candidate").get<std::size_t>(), s.at("reason").get<std::string>()});
        if (ds.train.size() + ds.validation.size() != count) throw FormatError("split does not cover the dataset");
        return ds;
    } catch (const json::exception& e) {
        throw FormatError(dir.string() + "/manifest.json: " + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(dir.string() + "/manifest.json: " + e.what());
    }
}

}  // namespace trajdiff
