#pragma once
#include "masgan/calibration.hpp"
#include "masgan/gan.hpp"
#include "masgan/simulator.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace masgan::cli {

// Key/value config with [simulator], [data], [gan] and [calibration] sections;
// `output_dir` sits above the sections and MASGAN_OUT overrides it.
struct RunConfig {
    std::string output_dir = "out";

    sim::SimParams simulator;
    std::vector<uint64_t> simulate_seeds = {1};
    bool emit_trades = false;

    int bar_seconds = 60;   // T
    int window_len = 390;   // L
    std::string input_dir;  // session CSVs for build-dataset/evaluate; default <output_dir>/sessions
    std::string dataset_dir; // dataset archive; default <output_dir>/dataset

    gan::GanConfig gan;

    cal::Grid grid;
    std::vector<uint64_t> calibration_seeds;

    std::string source_path; // config file this was parsed from
    std::string source_hash; // sha256 of the raw config bytes

    void validate() const; // throws ConfigError listing every violated field
    std::string resolved_input_dir() const;
    std::string resolved_dataset_dir() const;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& source_name = "<inline>");

} // namespace masgan::cli
