#pragma once
#include "masgan/gan.hpp"
#include "masgan/marketdata.hpp"
#include "masgan/simulator.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace masgan::cal {

struct Grid {
    std::vector<int64_t> n_values;      // ascending noise-agent counts
    std::vector<double> lambda_values;  // ascending value-agent arrival rates

    void validate() const;
    size_t rows() const { return n_values.size(); }
    size_t cols() const { return lambda_values.size(); }
};

struct CellStats {
    double mean_score = 0.0;
    double score_std = 0.0;
    int seed_count = 0;
};

struct ScoreMatrix {
    std::vector<int64_t> n_values;
    std::vector<double> lambda_values;
    std::vector<CellStats> cells; // row-major, rows = n_values

    const CellStats& at(size_t row, size_t col) const { return cells[row * lambda_values.size() + col]; }
    CellStats& at(size_t row, size_t col) { return cells[row * lambda_values.size() + col]; }
};

struct CalibrationResult {
    size_t best_row = 0;
    size_t best_col = 0;
    int64_t best_n = 0;
    double best_lambda = 0.0;
    ScoreMatrix matrix;
    std::vector<uint64_t> seeds;
    std::string critic_checkpoint_id; // sha256 of the weights blob
};

// Mean and sample std of sigmoid-critic scores of run_simulation(v, seed)
// features over the given seeds (std 0 for a single seed).
std::pair<double, double> score_config(const sim::SimParams& params, const std::vector<uint64_t>& seeds,
                                       const gan::CriticNet& critic, const md::NormStats& norm, int bar_seconds,
                                       int window_len);

// Grid argmax of the mean score; ties break to the smallest (row, col).
// Cells share the seed list (common random numbers) and evaluate
// independently across `jobs` workers with a deterministic reduction.
CalibrationResult calibrate(const Grid& grid, const sim::SimParams& base, const std::vector<uint64_t>& seeds,
                            const gan::CriticNet& critic, const md::NormStats& norm, int bar_seconds, int window_len,
                            int jobs = 1, const std::string& critic_checkpoint_id = "");

// Same grid sweep with an arbitrary per-(cell, seed) scorer; calibrate() is
// this with the simulate-featurize-score pipeline plugged in.
using CellScorer = std::function<double(size_t row, size_t col, uint64_t seed)>;
CalibrationResult calibrate_with_scorer(const Grid& grid, const std::vector<uint64_t>& seeds, const CellScorer& scorer,
                                        int jobs = 1);

struct NeighborhoodReport {
    bool pass = false;
    double neighbor_mean = 0.0; // mean over the best cell's in-grid 4-neighbors
    double corner_mean = 0.0;   // mean over the grid's 4 corner cells
};

NeighborhoodReport neighborhood_report(const CalibrationResult& result);

void save_score_matrix_csv(const ScoreMatrix& matrix, const std::string& mean_path, const std::string& std_path);
void save_calibration_json(const CalibrationResult& result, const std::string& config_hash, const std::string& path);
void render_heatmap_svg(const ScoreMatrix& matrix, size_t best_row, size_t best_col, const std::string& path);

} // namespace masgan::cal
