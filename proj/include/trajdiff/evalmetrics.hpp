#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajdiff/twobody.hpp"

namespace trajdiff {

// Bounds a decoded sample must satisfy before any metric is computed.
inline constexpr double kMinTofDays = 60.0;
inline constexpr double kMaxTofDays = 400.0;
inline constexpr double kMinRadiusAu = 0.3;
inline constexpr double kMaxRadiusAu = 4.0;

inline constexpr std::size_t kEdrnNodes = 16;

struct Validity {
    bool ok = true;
    std::string reason;
};

/// Valid iff every state is finite, t is strictly increasing, the time of flight
/// t[n-1] - t[0] lies in [60, 400] days and every |r| lies in [0.3, 4] AU.
Validity validate_sample(const Trajectory& traj);

struct LambertComparison {
    double dv_i = 0.0;  // |v_model(0) - v1_lambert| / 30 km/s
    double dv_f = 0.0;  // |v_model(n-1) - v2_lambert| / 30 km/s
};

/// Solves Lambert between the first and last node positions over t[n-1] - t[0].
/// Throws LambertError when the solver fails.
LambertComparison lambert_compare(const Trajectory& traj, const TwoBodySystem& system = TwoBodySystem{});

using DefectMatrix = Eigen::Matrix<double, Eigen::Dynamic, 4>;

struct DefectReport {
    DefectMatrix defects;  // row i: scaled (dx, dy, dvx, dvy) at the midpoint of segment i
    double drn = 0.0;
};

/// sqrt(sum D_ij^2 / rows); the RMS over segments of the defect norm.
double defect_rms(const DefectMatrix& defects);

/// Midpoint defects between every pair of adjacent nodes.
///
/// Node i is propagated forward and node i+1 backward to (t_i + t_{i+1}) / 2; the
/// defect is forward - backward with positions over 1 AU and velocities over 30 km/s.
/// Throws std::invalid_argument for fewer than 2 nodes and PropagationError naming the
/// segment when a propagation fails.
DefectReport drn(const Trajectory& traj, double tol = kDefaultTolerance,
                 const TwoBodySystem& system = TwoBodySystem{});

/// Indices of the 16-node condensation: both terminals plus the stored node nearest
/// each of 14 evenly spaced target times. Ties go to the earlier node and a node
/// already taken is never reused. Throws std::invalid_argument for fewer than 16 nodes.
std::vector<std::size_t> edrn_nodes(const Trajectory& traj);

DefectReport edrn(const Trajectory& traj, double tol = kDefaultTolerance,
                  const TwoBodySystem& system = TwoBodySystem{});

/// Batch statistics per midpoint index. `mean` and `stddev` hold the absolute defect
/// components; `norm_mean` is the batch mean of each segment's defect norm.
struct NodeDefectStats {
    DefectMatrix mean;
    DefectMatrix stddev;
    Eigen::VectorXd norm_mean;
};

/// Throws std::invalid_argument on an empty batch or mixed segment counts.
NodeDefectStats per_node_defect_stats(std::span<const DefectReport> reports);

void write_node_stats_csv(const std::filesystem::path& path, const NodeDefectStats& stats);

struct SlopeTest {
    double slope = 0.0;
    double stderr_slope = 0.0;
    double t = 0.0;
    double critical = 0.0;  // one-sided 95% Student-t quantile
    bool significant_increase = false;
};

/// Least-squares slope of y against its index with a one-sided t-test for slope > 0.
/// Requires at least 3 points.
SlopeTest slope_trend(std::span<const double> y);

struct Histogram {
    std::vector<double> edges;  // bins + 1 shared edges
    std::vector<double> a;      // normalized counts, population a
    std::vector<double> b;
};

/// Shared-edge histograms over the pooled range of both populations.
Histogram shared_histogram(std::span<const double> a, std::span<const double> b, std::size_t bins = 100);

/// 1/2 sum |p - q| over two normalized histograms.
double total_variation(const Histogram& h);

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);

}  // namespace trajdiff
