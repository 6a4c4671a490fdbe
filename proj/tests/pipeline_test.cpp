#include "trajdiff/pipeline.hpp"

#include <gtest/gtest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "trajdiff/errors.hpp"

namespace trajdiff {
namespace {

namespace fs = std::filesystem;

PipelineConfig tiny_config()
{
    PipelineConfig c = pipeline_config_from_json(json{{"format_version", 1},
                                                      {"grid", {{"launch_end", 1847.0}, {"tof_step", 10.0}}},
                                                      {"schedule", {{"levels", 8}}},
                                                      {"train", {{"steps", 30}, {"batch", 16}, {"checkpoint_every", 10}}},
                                                      {"sampler", {{"epsilon", 1e-5}, {"T", 2}}},
                                                      {"sample_count", 24}});
    return c;
}

class PipelineTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        root_ = fs::temp_directory_path() /
                ("trajdiff_pipeline_" + std::to_string(::getpid()) + "_" +
                 ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    fs::path root_;
    std::ostringstream log_;
};

TEST(PipelineConfig, JsonRoundTripAndVersionCheck)
{
    PipelineConfig c = tiny_config();
    c.thresholds["drn_mean"] = 0.03;
    const PipelineConfig back = pipeline_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_THROW(pipeline_config_from_json(json{{"resolution", 16}}), FormatError);
    EXPECT_THROW(pipeline_config_from_json(json{{"format_version", 99}}), FormatError);
}

TEST(PipelineConfig, PresetFollowsResolution)
{
    const PipelineConfig c =
        pipeline_config_from_json(json{{"format_version", 1}, {"resolution", 64}, {"network", {{"preset", "S2"}}}});
    EXPECT_EQ(c.network.n, 64u);
    EXPECT_EQ(c.grid.resolution, 64u);
    EXPECT_EQ(c.network.base_width, 16u);
    PipelineConfig bad = c;
    bad.network.n = 16;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST_F(PipelineTest, LockIsExclusive)
{
    DirectoryLock first(root_);
    EXPECT_THROW(DirectoryLock second(root_), std::runtime_error);
}

TEST_F(PipelineTest, StagesAreDeterministicAndChained)
{
    const PipelineConfig c = tiny_config();
    const std::string d1 = cmd_gen_data(c, root_ / "d1", 1, log_);
    const std::string d2 = cmd_gen_data(c, root_ / "d2", 3, log_);
    EXPECT_EQ(d1, d2);
    EXPECT_NE(log_.str().find("accepted"), std::string::npos);

    const std::string c1 = cmd_train(c, root_ / "d1", root_ / "c1", log_);
    const std::string c2 = cmd_train(c, root_ / "d2", root_ / "c2", log_);
    EXPECT_EQ(c1, c2);
    EXPECT_EQ(cmd_train(c, root_ / "d1", root_ / "c1", log_), c1);  // already complete

    std::ifstream losses(root_ / "c1" / "losses.csv");
    std::string header;
    std::getline(losses, header);
    EXPECT_EQ(header, "step,epoch,train_loss,validation_loss");

    const std::string s1 = cmd_sample(c, root_ / "c1", root_ / "s1", 24, 1, log_);
    const std::string s2 = cmd_sample(c, root_ / "c2", root_ / "s2", 24, 2, log_);
    EXPECT_EQ(s1, s2);
    PipelineConfig other = c;
    other.sampler.seed = 1;
    EXPECT_NE(cmd_sample(other, root_ / "c1", root_ / "s3", 24, 1, log_), s1);

    const json sm = read_json(root_ / "s1" / kManifestFile);
    EXPECT_EQ(sm.at("upstream").at("checkpoint"), c1);
    EXPECT_EQ(sm.at("upstream").at("dataset"), d1);
    EXPECT_EQ(sm.at("sampler").at("seed"), 0);
    EXPECT_TRUE(sm.at("timing").contains("per_sample_seconds"));
    EXPECT_EQ(load_samples(root_ / "s1").size(), 24u);

    const std::string r1 = cmd_eval(c, root_ / "s1", root_ / "d1", root_ / "r1", 1, log_);
    const std::string r2 = cmd_eval(c, root_ / "s2", root_ / "d2", root_ / "r2", 2, log_);
    EXPECT_EQ(r1, r2);
    const json summary = read_json(root_ / "r1" / kSummaryFile);
    EXPECT_EQ(summary.at("upstream").at("checkpoint"), c1);
    std::vector<std::string> keys;
    for (const auto& [k, v] : summary.at("statistics").items()) keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string>{"drn", "dv_f", "dv_i", "edrn", "rejection_rate"}));
}

TEST_F(PipelineTest, ResumeAfterKillMatchesUninterruptedRun)
{
    PipelineConfig c = tiny_config();
    c.train.steps = 400;
    cmd_gen_data(c, root_ / "data", 1, log_);
    const std::string full = cmd_train(c, root_ / "data", root_ / "full", log_);

    const fs::path part = root_ / "part";
    const pid_t child = ::fork();
    ASSERT_GE(child, 0);
    if (child == 0) {
        std::ostringstream sink;
        try {
            cmd_train(c, root_ / "data", part, sink);
        } catch (...) {
        }
        ::_exit(0);
    }
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(120);
    while (!fs::exists(part / kManifestFile) && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    ::kill(child, SIGKILL);
    int status = 0;
    ::waitpid(child, &status, 0);

    std::size_t reached = c.train.steps;
    if (fs::exists(part / kManifestFile)) reached = read_json(part / kManifestFile).at("step").get<std::size_t>();
    EXPECT_LT(reached, c.train.steps) << "child finished before it could be interrupted";
    const std::string resumed = cmd_train(c, root_ / "data", part, log_);
    EXPECT_EQ(resumed, full);
    EXPECT_EQ(read_json(part / kManifestFile).at("step"), c.train.steps);
}

TEST_F(PipelineTest, RefusesMismatchedInputs)
{
    const PipelineConfig c = tiny_config();
    cmd_gen_data(c, root_ / "data", 1, log_);
    PipelineConfig wide = c;
    wide.set_resolution(64);
    EXPECT_THROW(cmd_train(wide, root_ / "data", root_ / "ck", log_), std::invalid_argument);

    cmd_train(c, root_ / "data", root_ / "ck", log_);
    PipelineConfig changed = c;
    changed.train.lr = 5e-4;
    EXPECT_THROW(cmd_train(changed, root_ / "data", root_ / "ck", log_), std::runtime_error);

    PipelineConfig other_grid = c;
    other_grid.grid.seed = 7;
    cmd_gen_data(other_grid, root_ / "data2", 1, log_);
    cmd_sample(c, root_ / "ck", root_ / "smp", 4, 1, log_);
    EXPECT_THROW(cmd_eval(c, root_ / "smp", root_ / "data2", root_ / "rep", 1, log_), std::invalid_argument);

    {
        std::fstream f(root_ / "ck" / kWeightsFile, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        f.put('\x7f');
    }
    EXPECT_THROW(cmd_sample(c, root_ / "ck", root_ / "smp2", 4, 1, log_), FormatError);
}

TEST_F(PipelineTest, DatasetEvaluatesAtTheMetricFloor)
{
    PipelineConfig c = tiny_config();
    c.thresholds = {{"drn_mean", 1e-8}, {"dv_i_mean", 1e-6}, {"dv_f_mean", 1e-6}, {"rejection_rate", 0.0}};
    cmd_gen_data(c, root_ / "data", 1, log_);
    cmd_eval(c, root_ / "data", root_ / "data", root_ / "null", 1, log_);
    const json s = read_json(root_ / "null" / kSummaryFile);
    EXPECT_LE(s.at("statistics").at("drn").at("mean").get<double>(), 1e-8);
    EXPECT_LE(s.at("statistics").at("dv_i").at("mean").get<double>(), 1e-6);
    EXPECT_EQ(s.at("statistics").at("rejection_rate").get<double>(), 0.0);
    EXPECT_LT(s.at("metrics").at("tv_x").get<double>(), 0.05);

    std::ifstream hx(root_ / "null" / "hist_x.csv");
    std::string line;
    int lines = 0;
    while (std::getline(hx, line)) ++lines;
    EXPECT_EQ(lines, 101);

    std::ostringstream out;
    EXPECT_EQ(cmd_report({root_ / "null"}, out), 0);
    EXPECT_NE(out.str().find("dataset "), std::string::npos);

    json tight = s;
    tight["thresholds"]["drn_mean"] = 1e-30;
    fs::create_directories(root_ / "tight");
    write_json(root_ / "tight" / kSummaryFile, tight);
    std::ostringstream out2;
    EXPECT_EQ(cmd_report({root_ / "tight"}, out2), 1);
    EXPECT_NE(out2.str().find("FAIL drn_mean"), std::string::npos);
    EXPECT_THROW(cmd_report({root_ / "missing"}, out2), std::runtime_error);
}

}  // namespace
}  // namespace trajdiff
