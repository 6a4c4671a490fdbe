#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "trajdiff/dataset.hpp"
#include "trajdiff/io.hpp"
#include "trajdiff/network.hpp"
#include "trajdiff/sampler.hpp"
#include "trajdiff/training.hpp"

namespace trajdiff {

struct ScheduleOpts {
    std::size_t levels = 64;
    double sigma_min = 0.01;
};

struct EvalOpts {
    double tol = kDefaultTolerance;
    std::size_t bins = 100;
};

/// Everything the five commands need. Stored as JSON with an explicit format_version:
///
///   { "format_version": 1, "resolution": 16,
///     "grid": {...}, "network": {"preset": "S1", ...}, "schedule": {"levels", "sigma_min"},
///     "train": {...}, "sampler": {...}, "sample_count": 1000, "eval": {"tol", "bins"},
///     "thresholds": {"drn_mean": 0.03, ...} }
///
/// Missing sections take their defaults. Thresholds are upper bounds on the metrics
/// named in an evaluation summary and are checked by `report`.
struct PipelineConfig {
    std::size_t resolution = 16;
    GridConfig grid;
    NetworkConfig network;
    ScheduleOpts schedule;
    TrainOpts train;
    SamplerConfig sampler;
    std::size_t sample_count = 1000;
    EvalOpts eval;
    std::map<std::string, double> thresholds;

    /// Pushes `resolution` into the grid and network sections.
    void set_resolution(std::size_t n);
    /// Throws std::invalid_argument on inconsistent sections.
    void validate() const;
};

json to_json(const PipelineConfig& c);
PipelineConfig pipeline_config_from_json(const json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Exclusive flock on <dir>/.trajdiff.lock for the lifetime of the object.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    int fd_ = -1;
};

// Each command writes one artifact directory and returns its manifest hash.

std::string cmd_gen_data(const PipelineConfig& config, const std::filesystem::path& out, std::size_t workers,
                         std::ostream& log);

/// Resumes from a checkpoint already in `out` when it was produced by the same
/// config and dataset; refuses a checkpoint from anything else.
std::string cmd_train(const PipelineConfig& config, const std::filesystem::path& data,
                      const std::filesystem::path& out, std::ostream& log);

std::string cmd_sample(const PipelineConfig& config, const std::filesystem::path& checkpoint,
                       const std::filesystem::path& out, std::size_t count, std::size_t workers, std::ostream& log);

std::string cmd_eval(const PipelineConfig& config, const std::filesystem::path& samples,
                     const std::filesystem::path& data, const std::filesystem::path& out, std::size_t workers,
                     std::ostream& log);

/// Prints the summary table for every report directory and returns 1 if any metric
/// exceeds its threshold, naming it.
int cmd_report(const std::vector<std::filesystem::path>& reports, std::ostream& out);

inline constexpr const char* kSamplesFile = "samples.bin";
inline constexpr const char* kSummaryFile = "summary.json";

/// Physical trajectories of a sample directory, [count, 5, n] float64; failed chains are NaN.
struct SampleSet {
    json manifest;
    std::size_t n = 0;
    std::vector<double> data;
    std::size_t size() const { return n == 0 ? 0 : data.size() / (kStateRows * n); }
    Trajectory trajectory(std::size_t i) const
    {
        return from_rows(std::span<const double>(data.data() + i * kStateRows * n, kStateRows * n), n);
    }
};

/// Throws FormatError on a missing file or hash mismatch.
SampleSet load_samples(const std::filesystem::path& dir);

}  // namespace trajdiff
