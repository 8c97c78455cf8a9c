#include "masgan/calibration.hpp"

#include "masgan/errors.hpp"
#include "masgan/gan.hpp"

#include <doctest.h>

#include <cmath>

using namespace masgan;
using namespace masgan::cal;

namespace {

gan::CriticNet critic_with_weights(int dim, const std::vector<double>& w, double bias = 0.0) {
    Rng rng(1, 0);
    nn::LayerSpec dense;
    dense.kind = nn::LayerKind::Dense;
    dense.units = 1;
    gan::CriticNet net = nn::make_net(dim, 1, {dense}, rng);
    net.layers[0].params[0].value = w;
    net.layers[0].params[1].value = {bias};
    return net;
}

sim::SimParams fast_params() {
    sim::SimParams p;
    p.n_noise = 60;
    p.value_rate = 1e-12;
    p.n_value = 4;
    p.session_seconds = 600;
    return p;
}

} // namespace

TEST_CASE("score_config: constant critic scores 0.5 with zero std") {
    const int L = 5;
    const gan::CriticNet critic = critic_with_weights(2 * L, std::vector<double>(2 * L, 0.0));
    const md::NormStats norm{0.0, 1.0, 0.0, 1.0};
    const auto [mean, std_dev] = score_config(fast_params(), {1, 2, 3}, critic, norm, 60, L);
    CHECK(mean == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std_dev == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("score_config: single seed has zero std by convention") {
    const int L = 5;
    Rng wrng(3, 0);
    std::vector<double> w(2 * L);
    for (double& v : w) v = wrng.normal(0.0, 0.1);
    const gan::CriticNet critic = critic_with_weights(2 * L, w);
    const md::NormStats norm{0.0, 0.01, 5.0, 1.0};
    const auto [mean, std_dev] = score_config(fast_params(), {9}, critic, norm, 60, L);
    CHECK(std_dev == 0.0);
    CHECK(mean > 0.0);
    CHECK(mean < 1.0);
}

TEST_CASE("score_config equals an independently scripted loop") {
    const int L = 5;
    Rng wrng(4, 0);
    std::vector<double> w(2 * L);
    for (double& v : w) v = wrng.normal(0.0, 0.2);
    const gan::CriticNet critic = critic_with_weights(2 * L, w, 0.1);
    const md::NormStats norm{0.0001, 0.01, 5.0, 1.5};
    const sim::SimParams params = fast_params();
    const std::vector<uint64_t> seeds = {4, 5, 6, 7};

    const auto [mean, std_dev] = score_config(params, seeds, critic, norm, 60, L);

    double expect = 0.0;
    for (uint64_t seed : seeds) {
        const md::BarSeries bars = sim::run_simulation(params, seed, 60);
        const md::FeatureVector fv = md::build_feature_vector(bars, norm, L);
        double dot = 0.1; // bias
        for (size_t i = 0; i < fv.values.size(); ++i) dot += w[i] * fv.values[i];
        expect += 1.0 / (1.0 + std::exp(-dot));
    }
    expect /= static_cast<double>(seeds.size());
    CHECK(mean == doctest::Approx(expect).epsilon(1e-12));
    (void)std_dev;
}

TEST_CASE("score_config: too short a session is a configuration error") {
    const int L = 100; // 600 s session at T=60 yields only 10 returns
    const gan::CriticNet critic = critic_with_weights(2 * L, std::vector<double>(2 * L, 0.0));
    const md::NormStats norm{0.0, 1.0, 0.0, 1.0};
    CHECK_THROWS_AS(score_config(fast_params(), {1}, critic, norm, 60, L), ConfigError);
}

TEST_CASE("calibrate_with_scorer: argmax picks the planted peak") {
    Grid grid;
    grid.n_values = {100, 200, 300, 400, 500};
    grid.lambda_values = {1e-14, 1e-13, 1e-12, 1e-11};
    const size_t target_row = 3, target_col = 1;
    const CellScorer scorer = [&](size_t r, size_t c, uint64_t seed) {
        const double dr = static_cast<double>(r) - static_cast<double>(target_row);
        const double dc = static_cast<double>(c) - static_cast<double>(target_col);
        return std::exp(-(dr * dr + dc * dc)) + 1e-6 * static_cast<double>(seed % 3);
    };
    const CalibrationResult result = calibrate_with_scorer(grid, {1, 2, 3, 4, 5}, scorer, 2);

    // brute force over the full grid
    size_t best_r = 0, best_c = 0;
    double best = -1.0;
    for (size_t r = 0; r < grid.rows(); ++r)
        for (size_t c = 0; c < grid.cols(); ++c) {
            double mean = 0.0;
            for (uint64_t s : {1, 2, 3, 4, 5}) mean += scorer(r, c, static_cast<uint64_t>(s));
            mean /= 5.0;
            if (mean > best) {
                best = mean;
                best_r = r;
                best_c = c;
            }
        }
    CHECK(result.best_row == best_r);
    CHECK(result.best_col == best_c);
    CHECK(result.best_row == target_row);
    CHECK(result.best_col == target_col);
    CHECK(result.best_n == 400);
    CHECK(result.matrix.at(target_row, target_col).seed_count == 5);
}

TEST_CASE("calibrate: known matrix and tie-breaks") {
    Grid grid;
    grid.n_values = {10, 20};
    grid.lambda_values = {1e-13, 2e-13};
    const double means[2][2] = {{0.2, 0.3}, {0.9, 0.1}};
    const CellScorer lookup = [&](size_t r, size_t c, uint64_t) { return means[r][c]; };
    const CalibrationResult result = calibrate_with_scorer(grid, {1, 2}, lookup);
    CHECK(result.best_row == 1);
    CHECK(result.best_col == 0);
    CHECK(result.matrix.at(1, 0).mean_score == doctest::Approx(0.9));
    CHECK(result.matrix.at(0, 1).score_std == doctest::Approx(0.0));

    const CellScorer uniform = [](size_t, size_t, uint64_t) { return 0.5; };
    const CalibrationResult tie = calibrate_with_scorer(grid, {1, 2}, uniform);
    CHECK(tie.best_row == 0);
    CHECK(tie.best_col == 0);
}

TEST_CASE("calibrate: argmax invariant under a strictly increasing transform (single seed)") {
    Grid grid;
    grid.n_values = {10, 20, 30};
    grid.lambda_values = {1e-13, 2e-13, 4e-13};
    Rng rng(8, 0);
    std::vector<double> raw(9);
    for (double& v : raw) v = rng.normal();
    const CellScorer scorer = [&](size_t r, size_t c, uint64_t) { return raw[r * 3 + c]; };
    const CellScorer transformed = [&](size_t r, size_t c, uint64_t) {
        return std::tanh(2.0 * raw[r * 3 + c]) + 0.001 * raw[r * 3 + c];
    };
    const CalibrationResult a = calibrate_with_scorer(grid, {1}, scorer);
    const CalibrationResult b = calibrate_with_scorer(grid, {1}, transformed);
    CHECK(a.best_row == b.best_row);
    CHECK(a.best_col == b.best_col);
}

TEST_CASE("calibrate: results independent of worker count") {
    Grid grid;
    grid.n_values = {10, 20, 30};
    grid.lambda_values = {1e-13, 2e-13, 3e-13};
    const CellScorer scorer = [](size_t r, size_t c, uint64_t seed) {
        return 0.1 * static_cast<double>(r) + 0.01 * static_cast<double>(c) + 1e-5 * static_cast<double>(seed);
    };
    const CalibrationResult one = calibrate_with_scorer(grid, {1, 2, 3}, scorer, 1);
    const CalibrationResult four = calibrate_with_scorer(grid, {1, 2, 3}, scorer, 4);
    for (size_t i = 0; i < one.matrix.cells.size(); ++i) {
        CHECK(one.matrix.cells[i].mean_score == four.matrix.cells[i].mean_score);
        CHECK(one.matrix.cells[i].score_std == four.matrix.cells[i].score_std);
    }
}

TEST_CASE("calibrate end-to-end with a real critic is deterministic") {
    const int L = 5;
    Rng wrng(6, 0);
    std::vector<double> w(2 * L);
    for (double& v : w) v = wrng.normal(0.0, 0.05);
    const gan::CriticNet critic = critic_with_weights(2 * L, w);
    const md::NormStats norm{0.0, 0.01, 5.0, 1.0};
    Grid grid;
    grid.n_values = {30, 60};
    grid.lambda_values = {5e-13, 1e-12};
    sim::SimParams base = fast_params();

    const CalibrationResult r1 = calibrate(grid, base, {1, 2, 3}, critic, norm, 60, L, 1, "ck");
    const CalibrationResult r2 = calibrate(grid, base, {1, 2, 3}, critic, norm, 60, L, 2, "ck");
    for (size_t i = 0; i < r1.matrix.cells.size(); ++i) {
        CHECK(r1.matrix.cells[i].mean_score == r2.matrix.cells[i].mean_score);
        CHECK(r1.matrix.cells[i].score_std == r2.matrix.cells[i].score_std);
    }
    CHECK(r1.best_row == r2.best_row);
    CHECK(r1.best_col == r2.best_col);

    // best cell mean >= every other cell (exact argmax property)
    for (const auto& cell : r1.matrix.cells)
        CHECK(r1.matrix.at(r1.best_row, r1.best_col).mean_score >= cell.mean_score);
}

TEST_CASE("neighborhood report: radial decay passes, uniform fails, small grid rejected") {
    CalibrationResult result;
    result.matrix.n_values = {1, 2, 3};
    result.matrix.lambda_values = {1, 2, 3};
    result.matrix.cells.assign(9, CellStats{});
    const auto set = [&](size_t r, size_t c, double v) { result.matrix.at(r, c).mean_score = v; };
    for (size_t r = 0; r < 3; ++r)
        for (size_t c = 0; c < 3; ++c) {
            const double d = std::hypot(static_cast<double>(r) - 1.0, static_cast<double>(c) - 1.0);
            set(r, c, 1.0 - 0.3 * d);
        }
    result.best_row = 1;
    result.best_col = 1;
    const NeighborhoodReport pass = neighborhood_report(result);
    CHECK(pass.pass);
    CHECK(pass.neighbor_mean > pass.corner_mean);

    for (auto& cell : result.matrix.cells) cell.mean_score = 0.4;
    const NeighborhoodReport fail = neighborhood_report(result);
    CHECK(!fail.pass);
    CHECK(fail.neighbor_mean == doctest::Approx(fail.corner_mean));

    CalibrationResult small;
    small.matrix.n_values = {1, 2};
    small.matrix.lambda_values = {1, 2};
    small.matrix.cells.assign(4, CellStats{});
    CHECK_THROWS_AS(neighborhood_report(small), InvalidInputError);
}

TEST_CASE("grid validation") {
    Grid g;
    CHECK_THROWS_AS(g.validate(), InvalidInputError);
    g.n_values = {10, 10};
    g.lambda_values = {1e-13};
    CHECK_THROWS_AS(g.validate(), InvalidInputError);
    g.n_values = {10, 20};
    g.lambda_values = {1e-13, 1e-14};
    CHECK_THROWS_AS(g.validate(), InvalidInputError);
    g.lambda_values = {1e-14, 1e-13};
    g.validate();
}
