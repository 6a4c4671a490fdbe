#include "trajdiff/evalmetrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "trajdiff/ephemeris.hpp"
#include "trajdiff/errors.hpp"
#include "trajdiff/lambert.hpp"

namespace trajdiff {
namespace {

const TwoBodySystem kSun{};

// Earth-to-Mars Lambert arc sampled on n nodes, as the dataset builds them.
Trajectory transfer(double launch_day, double tof_days, std::size_t n)
{
    const PlanarState earth = planet_state(Body::Earth, Epoch{launch_day});
    const PlanarState mars = planet_state(Body::Mars, Epoch{launch_day + tof_days});
    const LambertSolution sol = solve_lambert({earth.r, mars.r, tof_days * kDay, kMuSun});
    return sample_trajectory({earth.r, sol.v1}, tof_days * kDay, n, kSun);
}

std::vector<Trajectory> true_set(std::size_t n, int count)
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> launch(1827.0, 2192.0);
    std::uniform_real_distribution<double> tof(120.0, 170.0);
    std::vector<Trajectory> out;
    for (int i = 0; i < count; ++i) out.push_back(transfer(launch(rng), tof(rng) + (i % 2 ? 100.0 : 0.0), n));
    return out;
}

TEST(Validate, TrueTrajectoriesAreValid)
{
    for (const auto& tr : true_set(16, 6)) EXPECT_TRUE(validate_sample(tr).ok);
}

TEST(Validate, RejectsEachRuleWithAReason)
{
    const Trajectory base = transfer(1900.0, 200.0, 16);
    Trajectory t = base;
    t[5].t = t[4].t;
    Validity v = validate_sample(t);
    EXPECT_FALSE(v.ok);
    EXPECT_NE(v.reason.find("time not increasing"), std::string::npos);

    t = base;
    t[3].state.v.x = NAN;
    EXPECT_FALSE(validate_sample(t).ok);

    t = base;
    for (auto& node : t.nodes) node.t *= 0.25;  // 50 days
    EXPECT_FALSE(validate_sample(t).ok);

    t = base;
    t[7].state.r = t[7].state.r * 5.0;
    v = validate_sample(t);
    EXPECT_FALSE(v.ok);
    EXPECT_NE(v.reason.find("radius"), std::string::npos);
}

TEST(LambertCompare, TrueTrajectoriesSitAtTheFloor)
{
    for (const auto& tr : true_set(16, 10)) {
        const LambertComparison c = lambert_compare(tr);
        EXPECT_LE(c.dv_i, 1e-6);
        EXPECT_LE(c.dv_f, 1e-6);
    }
}

TEST(LambertCompare, ThirtyMetresPerSecondIsOneThousandth)
{
    Trajectory tr = transfer(2000.0, 210.0, 16);
    const Vec2 v = tr[0].state.v;
    tr[0].state.v = v + v * (30.0 / norm(v));
    const LambertComparison c = lambert_compare(tr);
    EXPECT_NEAR(c.dv_i, 1e-3, 1e-9);
    EXPECT_LE(c.dv_f, 1e-6);
}

TEST(Drn, TrueTrajectoriesSitAtTheFloor)
{
    for (std::size_t n : {16u, 64u}) {
        for (const auto& tr : true_set(n, 4)) {
            const DefectReport rep = drn(tr);
            EXPECT_EQ(rep.defects.rows(), static_cast<Eigen::Index>(n - 1));
            EXPECT_LE(rep.drn, 1e-8);
        }
    }
}

TEST(Drn, FloorDropsWithIntegratorTolerance)
{
    double loose = 0.0, tight = 0.0;
    for (const auto& tr : true_set(16, 4)) {
        loose += drn(tr, 1e-9).drn;
        tight += drn(tr, 1e-12).drn;
    }
    EXPECT_LT(tight, loose);
}

TEST(Drn, RiggedTwoNodeDefectIsItsMagnitude)
{
    const PlanarState mid{{1.2 * kAu, 0.3 * kAu}, {-6.0e3, 27.0e3}};
    const double half = 40.0 * kDay;
    const double d = 2.5e-4;
    Trajectory tr;
    tr.nodes.push_back({0.0, propagate(mid, -half, kSun)});
    const PlanarState shifted{{mid.r.x - d * kAu, mid.r.y}, mid.v};
    tr.nodes.push_back({2.0 * half, propagate(shifted, half, kSun)});
    const DefectReport rep = drn(tr);
    ASSERT_EQ(rep.defects.rows(), 1);
    EXPECT_NEAR(rep.defects(0, 0), d, 1e-10);
    EXPECT_NEAR(rep.drn, d, 1e-10);
}

TEST(Drn, InvariantUnderTimeTranslation)
{
    Trajectory tr = transfer(1950.0, 180.0, 16);
    for (std::size_t k = 0; k < tr.size(); ++k) tr[k].state.v.y += 20.0 * std::sin(static_cast<double>(k));
    const double base = drn(tr).drn;
    ASSERT_GT(base, 1e-5);
    Trajectory shifted = tr;
    for (auto& node : shifted.nodes) node.t += 37.0 * kDay;
    EXPECT_NEAR(drn(shifted).drn / base, 1.0, 1e-9);
}

TEST(Drn, RmsIsLinearInTheDefects)
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    DefectMatrix d(15, 4);
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = g(rng);
    EXPECT_NEAR(defect_rms(3.5 * d), 3.5 * defect_rms(d), 1e-12);
    DefectMatrix one = DefectMatrix::Zero(1, 4);
    one(0, 2) = -0.7;
    EXPECT_DOUBLE_EQ(defect_rms(one), 0.7);
}

TEST(Drn, PropagationFailureNamesTheSegment)
{
    Trajectory tr = transfer(1950.0, 180.0, 16);
    tr[6].state = {{kAu, 0.0}, {0.0, 0.0}};
    tr[7].t = tr[6].t + 200.0 * kDay;
    for (std::size_t k = 8; k < tr.size(); ++k) tr[k].t = tr[7].t + static_cast<double>(k) * kDay;
    try {
        drn(tr);
        FAIL() << "expected a propagation failure";
    } catch (const PropagationError& e) {
        EXPECT_NE(std::string(e.what()).find("segment 6"), std::string::npos) << e.what();
    }
}

TEST(Edrn, SixteenNodesIsTheIdentity)
{
    const Trajectory tr = transfer(2050.0, 230.0, 16);
    std::vector<std::size_t> all(16);
    for (std::size_t i = 0; i < 16; ++i) all[i] = i;
    EXPECT_EQ(edrn_nodes(tr), all);
    Trajectory noisy = tr;
    noisy[4].state.r.x += 1e-4 * kAu;
    EXPECT_EQ(edrn(noisy).drn, drn(noisy).drn);
}

TEST(Edrn, PicksNearestNodesOnUniformGrids)
{
    const Trajectory tr = transfer(2050.0, 225.0, 64);
    const auto idx = edrn_nodes(tr);
    ASSERT_EQ(idx.size(), 16u);
    // 63 intervals, target k sits at node 4.2 k.
    for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(idx[k], static_cast<std::size_t>(std::lround(4.2 * k)));
    const DefectReport rep = edrn(tr);
    EXPECT_EQ(rep.defects.rows(), 15);
    EXPECT_LE(rep.drn, 1e-8);
}

TEST(Edrn, TiesGoToTheEarlierNode)
{
    Trajectory tr;
    tr.nodes.push_back({0.0, {}});
    for (int k = 0; k < 15; ++k) tr.nodes.push_back({k + 0.5, {}});
    tr.nodes.push_back({15.0, {}});
    const auto idx = edrn_nodes(tr);
    for (std::size_t k = 0; k < 15; ++k) EXPECT_EQ(idx[k], k);
    EXPECT_EQ(idx[15], 16u);
}

TEST(Edrn, NeverDuplicatesNodes)
{
    std::mt19937_64 rng(9);
    std::exponential_distribution<double> gap(1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Trajectory tr;
        double t = 0.0;
        const std::size_t n = 16 + static_cast<std::size_t>(trial % 7);
        for (std::size_t k = 0; k < n; ++k) {
            tr.nodes.push_back({t, {}});
            t += (k < n / 2 ? 0.01 : 1.0) * gap(rng);
        }
        const auto idx = edrn_nodes(tr);
        ASSERT_EQ(idx.size(), 16u);
        EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 16u);
        EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
        EXPECT_EQ(idx.front(), 0u);
        EXPECT_EQ(idx.back(), n - 1);
    }
    Trajectory shortone;
    shortone.nodes.resize(15);
    EXPECT_THROW(edrn_nodes(shortone), std::invalid_argument);
}

TEST(NodeStats, IdenticalReportsHaveZeroSpread)
{
    const DefectReport rep = drn(transfer(2010.0, 150.0, 16));
    const std::vector<DefectReport> batch(5, rep);
    const NodeDefectStats s = per_node_defect_stats(batch);
    EXPECT_EQ(s.stddev.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(s.mean.isApprox(rep.defects.cwiseAbs()));
    EXPECT_LE(s.mean.maxCoeff(), 1e-8);
}

TEST(NodeStats, RejectsMixedResolutions)
{
    std::vector<DefectReport> batch(2);
    batch[0].defects = DefectMatrix::Zero(15, 4);
    batch[1].defects = DefectMatrix::Zero(63, 4);
    EXPECT_THROW(per_node_defect_stats(batch), std::invalid_argument);
    EXPECT_THROW(per_node_defect_stats({}), std::invalid_argument);
}

TEST(NodeStats, CsvHasOneRowPerSegment)
{
    std::vector<DefectReport> batch(3);
    for (auto& r : batch) r.defects = DefectMatrix::Constant(15, 4, 1e-3);
    const auto path = std::filesystem::temp_directory_path() / "trajdiff_node_stats.csv";
    write_node_stats_csv(path, per_node_defect_stats(batch));
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    EXPECT_EQ(lines, 16);
    std::filesystem::remove(path);
}

TEST(Metrics, DoNotMutateTheSample)
{
    Trajectory tr = transfer(2020.0, 190.0, 64);
    tr[10].state.v.x += 5.0;
    const Trajectory copy = tr;
    validate_sample(tr);
    lambert_compare(tr);
    drn(tr);
    edrn(tr);
    for (std::size_t k = 0; k < tr.size(); ++k) {
        EXPECT_EQ(tr[k].t, copy[k].t);
        EXPECT_EQ(tr[k].state, copy[k].state);
    }
}

TEST(SlopeTrend, FlatSeriesIsNotSignificant)
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(1.0, 0.1);
    std::vector<double> y(15);
    for (double& v : y) v = g(rng);
    const SlopeTest s = slope_trend(y);
    EXPECT_NEAR(s.critical, 1.7709, 1e-4);  // t(0.95, 13)
    EXPECT_FALSE(s.significant_increase);
}

TEST(SlopeTrend, GrowingSeriesIsSignificant)
{
    std::vector<double> y(15);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 + 0.05 * static_cast<double>(i) + 0.01 * std::sin(3.0 * i);
    const SlopeTest s = slope_trend(y);
    EXPECT_NEAR(s.slope, 0.05, 2e-3);
    EXPECT_TRUE(s.significant_increase);
    std::vector<double> down(y.rbegin(), y.rend());
    EXPECT_FALSE(slope_trend(down).significant_increase);
    EXPECT_THROW(slope_trend(std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST(Histogram, SharedEdgesAndTotalVariation)
{
    const std::vector<double> a{0.0, 0.1, 0.2, 0.3};
    const std::vector<double> b{0.7, 0.8, 0.9, 1.0};
    const Histogram h = shared_histogram(a, b, 100);
    EXPECT_EQ(h.edges.size(), 101u);
    EXPECT_EQ(h.edges.front(), 0.0);
    EXPECT_EQ(h.edges.back(), 1.0);
    EXPECT_DOUBLE_EQ(total_variation(h), 1.0);
    EXPECT_DOUBLE_EQ(total_variation(shared_histogram(a, a, 100)), 0.0);
    EXPECT_THROW(shared_histogram(a, std::vector<double>{NAN}, 10), std::invalid_argument);
}

}  // namespace
}  // namespace trajdiff
