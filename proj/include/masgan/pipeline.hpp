#pragma once
#include "masgan/config.hpp"

#include <string>
#include <vector>

namespace masgan::cli {

// File-based pipeline stages behind the five subcommands. Each stage writes
// its artifacts plus manifest_<command>.json and is byte-idempotent for a
// fixed config and seed set.
struct StageResult {
    std::vector<std::string> artifacts; // paths written, manifest last
};

StageResult cmd_simulate(const RunConfig& config, const std::vector<uint64_t>& seeds);
StageResult cmd_build_dataset(const RunConfig& config);
StageResult cmd_train(const RunConfig& config);
StageResult cmd_calibrate(const RunConfig& config, int jobs);
StageResult cmd_evaluate(const RunConfig& config);

// Manifest helper shared by the stages (exposed for tests).
void write_manifest(const RunConfig& config, const std::string& command, const std::vector<uint64_t>& seeds,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                    const std::string& started_utc, const std::string& path);

} // namespace masgan::cli
