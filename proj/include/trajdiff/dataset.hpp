#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajdiff/ephemeris.hpp"
#include "trajdiff/io.hpp"
#include "trajdiff/lambert.hpp"
#include "trajdiff/twobody.hpp"

namespace trajdiff {

/// Launch-date x time-of-flight grid. Days throughout; both ranges are inclusive.
struct GridConfig {
    Epoch launch_start{1827.0};  // 2005-01-01 12:00 TT
    Epoch launch_end{2192.0};    // 2006-01-01 12:00 TT
    double launch_step = 1.0;
    double tof_min = 120.0;
    double tof_max = 270.0;
    double tof_step = 2.0;
    double exclusion_lo = 175.0;  // open band (lo, hi) in degrees
    double exclusion_hi = 185.0;
    std::size_t resolution = 16;
    std::uint64_t seed = 0;
    double tol = kDefaultTolerance;

    /// Throws std::invalid_argument on an inconsistent config.
    void validate() const;
    std::size_t launch_count() const;
    std::size_t tof_count() const;
};

json to_json(const GridConfig& c);
GridConfig grid_config_from_json(const json& j);

struct GridProblem {
    LambertProblem problem;
    Epoch launch;
    double tof_days = 0.0;
    double transfer_angle = 0.0;  // degrees
    std::size_t candidate_index = 0;
};

struct GridSummary {
    std::size_t candidates = 0;
    std::size_t excluded = 0;
};

bool in_exclusion_band(double transfer_angle_deg, const GridConfig& config);

/// One problem per (launch, tof) pair outside the exclusion band, launch-major.
std::vector<GridProblem> build_grid(const GridConfig& config, GridSummary* summary = nullptr);

inline constexpr std::size_t kStateRows = 5;  // t, x, y, vx, vy
inline constexpr std::size_t kImageRows = 6;  // plus one padding row

/// Per-row extrema of (t, x, y, vx, vy) in physical units.
struct RowStats {
    std::array<double, kStateRows> min{};
    std::array<double, kStateRows> max{};

    /// Throws std::invalid_argument if any row has min >= max or a non-finite bound.
    void validate() const;
};

json to_json(const RowStats& s);
RowStats row_stats_from_json(const json& j);

/// [6, n] row-major image: rows 0-4 min-max scaled, row 5 zero padding.
struct ScaledImage {
    std::size_t n = 0;
    std::vector<double> values;

    double operator()(std::size_t row, std::size_t col) const { return values[row * n + col]; }
    double& operator()(std::size_t row, std::size_t col) { return values[row * n + col]; }
};

/// Row-major [5, n] physical rows of a trajectory.
std::vector<double> to_rows(const Trajectory& traj);
Trajectory from_rows(std::span<const double> rows, std::size_t n);

ScaledImage encode(const Trajectory& traj, const RowStats& stats);

/// Inverse affine map per row; the padding row is dropped. Time is not checked for
/// monotonicity. Throws std::invalid_argument if values.size() != 6 n.
Trajectory decode(const ScaledImage& img, const RowStats& stats);

struct SkippedProblem {
    std::size_t candidate_index = 0;
    std::string reason;
};

/// Accepted trajectories stored as a [M, 5, n] physical tensor.
struct Dataset {
    GridConfig config;
    std::size_t n = 0;
    std::vector<double> data;
    std::vector<double> launch_epochs;  // days since J2000, one per trajectory
    std::vector<std::size_t> candidate_index;
    RowStats stats;
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    GridSummary grid;
    std::vector<SkippedProblem> skipped;

    std::size_t size() const { return launch_epochs.size(); }
    std::span<const double> rows(std::size_t i) const { return {data.data() + i * kStateRows * n, kStateRows * n}; }
    Trajectory trajectory(std::size_t i) const { return from_rows(rows(i), n); }
};

RowStats compute_row_stats(std::span<const double> data, std::size_t n);

/// Seeded permutation of [0, m): first ceil(0.9 m) entries train, the rest validation.
void split_indices(std::size_t m, std::uint64_t seed, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& validation);

/// Solves and propagates every grid problem in parallel. Failures, including arcs
/// whose final node misses r2 by more than 1e-6 AU, are recorded in `skipped`.
Dataset build_dataset(const GridConfig& config, std::size_t workers);

/// Scaled float images [count, 6, n] for the given trajectory indices.
std::vector<float> scaled_images(const Dataset& ds, std::span<const std::size_t> indices);

/// Physical [M, 5, n] float64 tensor followed by M float64 launch epochs.
inline constexpr const char* kDataFile = "data.bin";

json dataset_manifest(const Dataset& ds, const std::string& data_sha256);

/// Writes data.bin and manifest.json into `dir`; returns the manifest hash.
std::string save_dataset(const Dataset& ds, const std::filesystem::path& dir, const json& timing = {});

/// Reads and verifies a dataset directory. Throws FormatError on any mismatch.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace trajdiff
