#include "trajdiff/evalmetrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "trajdiff/errors.hpp"
#include "trajdiff/lambert.hpp"

namespace trajdiff {

namespace {

bool finite_state(const PlanarState& s)
{
    return std::isfinite(s.r.x) && std::isfinite(s.r.y) && std::isfinite(s.v.x) && std::isfinite(s.v.y);
}

std::ofstream open_csv(const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    return out;
}

}  // namespace

Validity validate_sample(const Trajectory& traj)
{
    if (traj.size() < 2) return {false, "fewer than 2 nodes"};
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (!std::isfinite(traj[k].t) || !finite_state(traj[k].state))
            return {false, "non-finite value at node " + std::to_string(k)};
    }
    for (std::size_t k = 1; k < traj.size(); ++k) {
        if (!(traj[k].t > traj[k - 1].t)) return {false, "time not increasing at node " + std::to_string(k)};
    }
    const double tof_days = traj.time_of_flight() / kDay;
    if (tof_days < kMinTofDays || tof_days > kMaxTofDays) return {false, "time of flight out of range"};
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double r = norm(traj[k].state.r) / kAu;
        if (r < kMinRadiusAu || r > kMaxRadiusAu) return {false, "radius out of range at node " + std::to_string(k)};
    }
    return {};
}

LambertComparison lambert_compare(const Trajectory& traj, const TwoBodySystem& system)
{
    if (traj.size() < 2) throw std::invalid_argument("lambert comparison needs at least 2 nodes");
    const LambertSolution sol =
        solve_lambert({traj.front().state.r, traj.back().state.r, traj.time_of_flight(), system.mu()});
    return {norm(traj.front().state.v - sol.v1) / kVelocityScale, norm(traj.back().state.v - sol.v2) / kVelocityScale};
}

double defect_rms(const DefectMatrix& defects)
{
    if (defects.rows() == 0) throw std::invalid_argument("empty defect matrix");
    return std::sqrt(defects.squaredNorm() / static_cast<double>(defects.rows()));
}

DefectReport drn(const Trajectory& traj, double tol, const TwoBodySystem& system)
{
    if (traj.size() < 2) throw std::invalid_argument("DRN needs at least 2 nodes");
    DefectReport rep;
    rep.defects.resize(static_cast<Eigen::Index>(traj.size() - 1), 4);
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        const double t_mid = 0.5 * (traj[i].t + traj[i + 1].t);
        PlanarState fwd, bwd;
        try {
            fwd = propagate(traj[i].state, t_mid - traj[i].t, system, tol);
            bwd = propagate(traj[i + 1].state, t_mid - traj[i + 1].t, system, tol);
        } catch (const PropagationError& e) {
            throw PropagationError("segment " + std::to_string(i) + ": " + e.what());
        }
        const auto row = static_cast<Eigen::Index>(i);
        rep.defects(row, 0) = (fwd.r.x - bwd.r.x) / kPositionScale;
        rep.defects(row, 1) = (fwd.r.y - bwd.r.y) / kPositionScale;
        rep.defects(row, 2) = (fwd.v.x - bwd.v.x) / kVelocityScale;
        rep.defects(row, 3) = (fwd.v.y - bwd.v.y) / kVelocityScale;
    }
    rep.drn = defect_rms(rep.defects);
    return rep;
}

std::vector<std::size_t> edrn_nodes(const Trajectory& traj)
{
    const std::size_t n = traj.size();
    if (n < kEdrnNodes) throw std::invalid_argument("EDRN needs at least 16 nodes");
    const double t0 = traj.front().t;
    const double t1 = traj.back().t;
    std::vector<std::size_t> picked{0};
    for (std::size_t k = 1; k + 1 < kEdrnNodes; ++k) {
        const double target = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(kEdrnNodes - 1);
        // Candidates exclude nodes already used and leave room for the remaining picks.
        const std::size_t lo = picked.back() + 1;
        const std::size_t hi = n - 1 - (kEdrnNodes - 1 - k);
        std::size_t best = lo;
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t j = lo; j <= hi; ++j) {
            const double gap = std::abs(traj[j].t - target);
            if (gap < best_gap) {
                best_gap = gap;
                best = j;
            }
        }
        picked.push_back(best);
    }
    picked.push_back(n - 1);
    return picked;
}

DefectReport edrn(const Trajectory& traj, double tol, const TwoBodySystem& system)
{
    Trajectory condensed;
    for (std::size_t i : edrn_nodes(traj)) condensed.nodes.push_back(traj[i]);
    return drn(condensed, tol, system);
}

NodeDefectStats per_node_defect_stats(std::span<const DefectReport> reports)
{
    if (reports.empty()) throw std::invalid_argument("no defect reports");
    const Eigen::Index rows = reports.front().defects.rows();
    NodeDefectStats s;
    s.mean = DefectMatrix::Zero(rows, 4);
    s.stddev = DefectMatrix::Zero(rows, 4);
    s.norm_mean = Eigen::VectorXd::Zero(rows);
    for (const auto& r : reports) {
        if (r.defects.rows() != rows) throw std::invalid_argument("defect reports mix trajectory resolutions");
        s.mean += r.defects.cwiseAbs();
        s.norm_mean += r.defects.rowwise().norm();
    }
    const auto count = static_cast<double>(reports.size());
    s.mean /= count;
    s.norm_mean /= count;
    for (const auto& r : reports) s.stddev.array() += (r.defects.cwiseAbs() - s.mean).array().square();
    s.stddev = (s.stddev / count).cwiseSqrt();
    return s;
}

void write_node_stats_csv(const std::filesystem::path& path, const NodeDefectStats& stats)
{
    auto out = open_csv(path);
    out << "segment,mean_dx,mean_dy,mean_dvx,mean_dvy,std_dx,std_dy,std_dvx,std_dvy,mean_norm\n";
    for (Eigen::Index i = 0; i < stats.mean.rows(); ++i) {
        out << i;
        for (int j = 0; j < 4; ++j) out << ',' << stats.mean(i, j);
        for (int j = 0; j < 4; ++j) out << ',' << stats.stddev(i, j);
        out << ',' << stats.norm_mean(i) << '\n';
    }
}

SlopeTest slope_trend(std::span<const double> y)
{
    const std::size_t n = y.size();
    if (n < 3) throw std::invalid_argument("slope test needs at least 3 points");
    double xm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        xm += static_cast<double>(i);
        ym += y[i];
    }
    xm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - xm;
        sxx += dx * dx;
        sxy += dx * (y[i] - ym);
    }
    SlopeTest out;
    out.slope = sxy / sxx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - ym - out.slope * (static_cast<double>(i) - xm);
        sse += e * e;
    }
    const double dof = static_cast<double>(n - 2);
    out.stderr_slope = std::sqrt(sse / dof / sxx);
    out.critical = boost::math::quantile(boost::math::students_t(dof), 0.95);
    if (out.stderr_slope > 0.0) {
        out.t = out.slope / out.stderr_slope;
    } else {
        out.t = out.slope > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    out.significant_increase = out.t > out.critical;
    return out;
}

Histogram shared_histogram(std::span<const double> a, std::span<const double> b, std::size_t bins)
{
    if (a.empty() || b.empty() || bins == 0) throw std::invalid_argument("histogram needs data and bins");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (auto span : {a, b}) {
        for (double v : span) {
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite histogram value");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi == lo) hi = lo + 1.0;
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k)
        h.edges[k] = k == bins ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
    auto fill = [&](std::span<const double> v, std::vector<double>& counts) {
        counts.assign(bins, 0.0);
        for (double x : v) {
            auto k = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
            counts[std::min(k, bins - 1)] += 1.0;
        }
        for (double& c : counts) c /= static_cast<double>(v.size());
    };
    fill(a, h.a);
    fill(b, h.b);
    return h;
}

double total_variation(const Histogram& h)
{
    if (h.a.size() != h.b.size()) throw std::invalid_argument("histograms do not share bins");
    double tv = 0.0;
    for (std::size_t k = 0; k < h.a.size(); ++k) tv += std::abs(h.a[k] - h.b[k]);
    return 0.5 * tv;
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h)
{
    auto out = open_csv(path);
    out << "bin,lo,hi,training,generated\n";
    for (std::size_t k = 0; k < h.a.size(); ++k)
        out << k << ',' << h.edges[k] << ',' << h.edges[k + 1] << ',' << h.a[k] << ',' << h.b[k] << '\n';
}

}  // namespace trajdiff
