#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "trajdiff/parallel.hpp"
#include "trajdiff/pipeline.hpp"

namespace fs = std::filesystem;
using namespace trajdiff;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> resolution;
    std::optional<std::string> preset;
    std::optional<std::size_t> count;
    std::optional<std::size_t> steps;
    std::string out;
    std::string data;
    std::string checkpoint;
    std::string samples;
    std::vector<std::string> reports;
};

// Config file first, then flags on top.
PipelineConfig resolve(const Flags& f)
{
    PipelineConfig c = f.config.empty() ? pipeline_config_from_json(json{{"format_version", kFormatVersion}})
                                        : load_pipeline_config(f.config);
    json j = to_json(c);
    if (f.resolution) j["resolution"] = *f.resolution;
    if (f.preset) j["network"] = {{"preset", *f.preset}};
    if (f.count) j["sample_count"] = *f.count;
    if (f.steps) j["train"]["steps"] = *f.steps;
    if (f.seed) {
        j["grid"]["seed"] = *f.seed;
        j["train"]["seed"] = *f.seed;
        j["sampler"]["seed"] = *f.seed;
    }
    return pipeline_config_from_json(j);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Earth-Mars transfer trajectory generation with a score-based diffusion model"};
    app.require_subcommand(1);
    Flags f;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "pipeline config JSON")->check(CLI::ExistingFile);
        sub->add_option("--seed", f.seed, "seed for this stage");
        sub->add_option("--resolution", f.resolution, "nodes per trajectory")->check(CLI::IsMember({16, 64, 256, 1024}));
    };

    auto* gen = app.add_subcommand("gen-data", "solve the launch grid and write a dataset");
    common(gen);
    gen->add_option("--out", f.out, "dataset directory")->required();

    auto* tr = app.add_subcommand("train", "train a score network on a dataset");
    common(tr);
    tr->add_option("--preset", f.preset, "network size")->check(CLI::IsMember({"S1", "S2", "S3", "S4"}));
    tr->add_option("--steps", f.steps, "optimizer steps");
    tr->add_option("--data", f.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--out", f.out, "checkpoint directory")->required();

    auto* sm = app.add_subcommand("sample", "generate trajectories from a checkpoint");
    common(sm);
    sm->add_option("--count", f.count, "number of samples (default 1000)");
    sm->add_option("--checkpoint", f.checkpoint, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
    sm->add_option("--out", f.out, "sample directory")->required();

    auto* ev = app.add_subcommand("eval", "score samples against the dataset");
    common(ev);
    ev->add_option("--samples", f.samples, "sample or dataset directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--data", f.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--out", f.out, "report directory")->required();

    auto* rp = app.add_subcommand("report", "print report tables and check thresholds");
    rp->add_option("reports", f.reports, "report directories")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);
    const std::size_t workers = worker_count();
    try {
        if (rp->parsed()) return cmd_report({f.reports.begin(), f.reports.end()}, std::cout);
        const PipelineConfig config = resolve(f);
        if (gen->parsed()) {
            cmd_gen_data(config, f.out, workers, std::cout);
        } else if (tr->parsed()) {
            cmd_train(config, f.data, f.out, std::cout);
        } else if (sm->parsed()) {
            // The checkpoint fixes the resolution unless one is asked for explicitly.
            PipelineConfig c = config;
            if (!f.resolution) {
                const json m = read_json(fs::path(f.checkpoint) / kManifestFile);
                c.set_resolution(m.at("config").at("resolution").get<std::size_t>());
            }
            cmd_sample(c, f.checkpoint, f.out, c.sample_count, workers, std::cout);
        } else if (ev->parsed()) {
            cmd_eval(config, f.samples, f.data, f.out, workers, std::cout);
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
    return 0;
}
