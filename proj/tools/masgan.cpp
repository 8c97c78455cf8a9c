// masgan - calibrate a multi-agent LOB simulator against a critic trained on
// price/volume features.
//
//   masgan simulate      --config cfg.ini [--seed S]
//   masgan build-dataset --config cfg.ini
//   masgan train         --config cfg.ini [--seed S]
//   masgan calibrate     --config cfg.ini [--jobs K]
//   masgan evaluate      --config cfg.ini
//
// Exit codes: 0 success, 2 validation/config error, 3 runtime/data error.

#include "masgan/errors.hpp"
#include "masgan/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>

using namespace masgan;

int main(int argc, char** argv) {
    CLI::App app{"multi-agent simulator calibration via an adversarially trained critic"};
    app.require_subcommand(1);

    std::string config_path;
    int jobs = 1;
    std::optional<uint64_t> seed_override;

    const auto add_common = [&](CLI::App* cmd, bool with_jobs, bool with_seed) {
        cmd->add_option("--config", config_path, "path to the run config")->required();
        if (with_jobs) cmd->add_option("--jobs", jobs, "worker threads for (cell, seed) jobs")->check(CLI::PositiveNumber);
        if (with_seed) cmd->add_option("--seed", seed_override, "seed override (simulate: seed list; train: gan seed)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run sessions, one bars CSV per seed");
    add_common(simulate, false, true);
    CLI::App* build = app.add_subcommand("build-dataset", "build the feature dataset archive from session CSVs");
    add_common(build, false, false);
    CLI::App* train = app.add_subcommand("train", "train the WGAN-GP critic/generator pair");
    add_common(train, false, true);
    CLI::App* calibrate = app.add_subcommand("calibrate", "grid-search simulator parameters against the critic");
    add_common(calibrate, true, false);
    CLI::App* evaluate = app.add_subcommand("evaluate", "score distributions, KS report, return diagnostics");
    add_common(evaluate, false, false);

    CLI11_PARSE(app, argc, argv);

    try {
        cli::RunConfig config = cli::parse_config_file(config_path);
        cli::StageResult result;
        if (simulate->parsed()) {
            std::vector<uint64_t> seeds = config.simulate_seeds;
            if (seed_override) seeds = {*seed_override};
            result = cli::cmd_simulate(config, seeds);
        } else if (build->parsed()) {
            result = cli::cmd_build_dataset(config);
        } else if (train->parsed()) {
            if (seed_override) config.gan.seed = *seed_override;
            result = cli::cmd_train(config);
        } else if (calibrate->parsed()) {
            result = cli::cmd_calibrate(config, jobs);
        } else if (evaluate->parsed()) {
            result = cli::cmd_evaluate(config);
        }
        for (const auto& path : result.artifacts) std::printf("wrote %s\n", path.c_str());
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const InvalidInputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
