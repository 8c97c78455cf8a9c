#include "masgan/calibration.hpp"

#include "masgan/errors.hpp"
#include "masgan/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

using nlohmann::json;

namespace masgan::cal {

namespace {

// argmax with lexicographic (row, col) tie-break
void finalize_argmax(CalibrationResult& result) {
    const size_t cols = result.matrix.lambda_values.size();
    size_t best = 0;
    for (size_t i = 1; i < result.matrix.cells.size(); ++i)
        if (result.matrix.cells[i].mean_score > result.matrix.cells[best].mean_score) best = i;
    result.best_row = best / cols;
    result.best_col = best % cols;
    result.best_n = result.matrix.n_values[result.best_row];
    result.best_lambda = result.matrix.lambda_values[result.best_col];
}

} // namespace

void Grid::validate() const {
    if (n_values.empty() || lambda_values.empty()) throw InvalidInputError("calibration grid must be non-empty");
    for (size_t i = 1; i < n_values.size(); ++i)
        if (n_values[i] <= n_values[i - 1]) throw InvalidInputError("grid n_values must be strictly ascending");
    for (size_t i = 1; i < lambda_values.size(); ++i)
        if (lambda_values[i] <= lambda_values[i - 1])
            throw InvalidInputError("grid lambda_values must be strictly ascending");
    for (int64_t n : n_values)
        if (n < 0) throw InvalidInputError("grid n_values must be >= 0");
    for (double l : lambda_values)
        if (!(l > 0.0)) throw InvalidInputError("grid lambda_values must be > 0");
}

std::pair<double, double> score_config(const sim::SimParams& params, const std::vector<uint64_t>& seeds,
                                       const gan::CriticNet& critic, const md::NormStats& norm, int bar_seconds,
                                       int window_len) {
    if (seeds.empty()) throw InvalidInputError("score_config: empty seed list");
    std::vector<std::vector<double>> features;
    features.reserve(seeds.size());
    for (uint64_t seed : seeds) {
        const md::BarSeries bars = sim::run_simulation(params, seed, bar_seconds);
        if (static_cast<int>(bars.size()) < window_len + 1)
            throw ConfigError("simulation produced " + std::to_string(bars.size()) + " bars, need " +
                              std::to_string(window_len + 1) + " for window_len " + std::to_string(window_len));
        features.push_back(md::build_feature_vector(bars, norm, window_len).values);
    }
    const std::vector<double> scores = gan::realism_scores(critic, features);
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double std_dev = 0.0;
    if (scores.size() > 1) {
        double ss = 0.0;
        for (double s : scores) ss += (s - mean) * (s - mean);
        std_dev = std::sqrt(ss / static_cast<double>(scores.size() - 1));
    }
    return {mean, std_dev};
}

CalibrationResult calibrate(const Grid& grid, const sim::SimParams& base, const std::vector<uint64_t>& seeds,
                            const gan::CriticNet& critic, const md::NormStats& norm, int bar_seconds, int window_len,
                            int jobs, const std::string& critic_checkpoint_id) {
    grid.validate();
    if (seeds.empty()) throw InvalidInputError("calibrate: empty seed list");
    if (jobs < 1) jobs = 1;

    const size_t rows = grid.rows(), cols = grid.cols();
    CalibrationResult result;
    result.matrix.n_values = grid.n_values;
    result.matrix.lambda_values = grid.lambda_values;
    result.matrix.cells.assign(rows * cols, CellStats{});
    result.seeds = seeds;
    result.critic_checkpoint_id = critic_checkpoint_id;

    std::atomic<size_t> next_cell{0};
    std::vector<std::string> cell_errors(rows * cols);
    const auto worker = [&]() {
        while (true) {
            const size_t cell = next_cell.fetch_add(1);
            if (cell >= rows * cols) break;
            const size_t r = cell / cols, c = cell % cols;
            sim::SimParams params = base;
            params.n_noise = grid.n_values[r];
            params.value_rate = grid.lambda_values[c];
            try {
                const auto [mean, std_dev] = score_config(params, seeds, critic, norm, bar_seconds, window_len);
                result.matrix.cells[cell] = CellStats{mean, std_dev, static_cast<int>(seeds.size())};
            } catch (const std::exception& e) {
                std::ostringstream msg;
                msg << "cell (N=" << grid.n_values[r] << ", lambda=" << fmt_double(grid.lambda_values[c])
                    << "): " << e.what();
                cell_errors[cell] = msg.str();
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int n_threads = std::min<int>(jobs, static_cast<int>(rows * cols));
        pool.reserve(static_cast<size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (const std::string& err : cell_errors)
        if (!err.empty()) throw RuntimeDataError("calibration failed at " + err);

    finalize_argmax(result);
    return result;
}

CalibrationResult calibrate_with_scorer(const Grid& grid, const std::vector<uint64_t>& seeds, const CellScorer& scorer,
                                        int jobs) {
    grid.validate();
    if (seeds.empty()) throw InvalidInputError("calibrate: empty seed list");
    if (jobs < 1) jobs = 1;
    const size_t rows = grid.rows(), cols = grid.cols();

    CalibrationResult result;
    result.matrix.n_values = grid.n_values;
    result.matrix.lambda_values = grid.lambda_values;
    result.matrix.cells.assign(rows * cols, CellStats{});
    result.seeds = seeds;

    std::atomic<size_t> next_cell{0};
    const auto worker = [&]() {
        while (true) {
            const size_t cell = next_cell.fetch_add(1);
            if (cell >= rows * cols) break;
            const size_t r = cell / cols, c = cell % cols;
            std::vector<double> scores;
            scores.reserve(seeds.size());
            for (uint64_t seed : seeds) scores.push_back(scorer(r, c, seed));
            double mean = 0.0;
            for (double s : scores) mean += s;
            mean /= static_cast<double>(scores.size());
            double std_dev = 0.0;
            if (scores.size() > 1) {
                double ss = 0.0;
                for (double s : scores) ss += (s - mean) * (s - mean);
                std_dev = std::sqrt(ss / static_cast<double>(scores.size() - 1));
            }
            result.matrix.cells[cell] = CellStats{mean, std_dev, static_cast<int>(seeds.size())};
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < std::min<int>(jobs, static_cast<int>(rows * cols)); ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    finalize_argmax(result);
    return result;
}

NeighborhoodReport neighborhood_report(const CalibrationResult& result) {
    const ScoreMatrix& m = result.matrix;
    const size_t rows = m.n_values.size(), cols = m.lambda_values.size();
    if (rows < 3 || cols < 3)
        throw InvalidInputError("neighborhood_report needs a grid of at least 3x3, got " + std::to_string(rows) + "x" +
                                std::to_string(cols));

    const auto r = static_cast<long>(result.best_row), c = static_cast<long>(result.best_col);
    double nsum = 0.0;
    int ncount = 0;
    const long offsets[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    for (const auto& off : offsets) {
        const long rr = r + off[0], cc = c + off[1];
        if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) continue;
        nsum += m.at(static_cast<size_t>(rr), static_cast<size_t>(cc)).mean_score;
        ++ncount;
    }
    const double corner_mean = (m.at(0, 0).mean_score + m.at(0, cols - 1).mean_score + m.at(rows - 1, 0).mean_score +
                                m.at(rows - 1, cols - 1).mean_score) /
                               4.0;
    NeighborhoodReport rep;
    rep.neighbor_mean = nsum / ncount;
    rep.corner_mean = corner_mean;
    rep.pass = rep.neighbor_mean > rep.corner_mean;
    return rep;
}

void save_score_matrix_csv(const ScoreMatrix& matrix, const std::string& mean_path, const std::string& std_path) {
    const auto render = [&](bool means) {
        std::string out = "n\\lambda";
        for (double l : matrix.lambda_values) out += "," + fmt_double(l);
        out += "\n";
        for (size_t r = 0; r < matrix.n_values.size(); ++r) {
            out += std::to_string(matrix.n_values[r]);
            for (size_t c = 0; c < matrix.lambda_values.size(); ++c)
                out += "," + fmt_double(means ? matrix.at(r, c).mean_score : matrix.at(r, c).score_std);
            out += "\n";
        }
        return out;
    };
    write_file_atomic(mean_path, render(true));
    write_file_atomic(std_path, render(false));
}

void save_calibration_json(const CalibrationResult& result, const std::string& config_hash, const std::string& path) {
    json j;
    j["best_point"] = {{"n_noise", result.best_n},
                       {"lambda", result.best_lambda},
                       {"row", result.best_row},
                       {"col", result.best_col}};
    j["seeds"] = result.seeds;
    j["checkpoint_hash"] = result.critic_checkpoint_id;
    j["config_hash"] = config_hash;
    write_file_atomic(path, j.dump(2) + "\n");
}

namespace {

// dark blue -> yellow ramp, good enough for reading off the argmax
std::string heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(20 + 235 * t));
    const int g = static_cast<int>(std::lround(30 + 200 * t));
    const int b = static_cast<int>(std::lround(120 - 90 * t));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

} // namespace

void render_heatmap_svg(const ScoreMatrix& matrix, size_t best_row, size_t best_col, const std::string& path) {
    const size_t rows = matrix.n_values.size(), cols = matrix.lambda_values.size();
    const int cell = 64, margin_left = 90, margin_top = 40, margin_bottom = 70, margin_right = 20;
    const int width = margin_left + static_cast<int>(cols) * cell + margin_right;
    const int height = margin_top + static_cast<int>(rows) * cell + margin_bottom;

    double lo = matrix.cells.front().mean_score, hi = lo;
    for (const CellStats& s : matrix.cells) {
        lo = std::min(lo, s.mean_score);
        hi = std::max(hi, s.mean_score);
    }
    const double span = hi > lo ? hi - lo : 1.0;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    svg << "<text x=\"" << margin_left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">"
        << "mean critic score over (N, lambda)</text>\n";
    for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < cols; ++c) {
            const double v = matrix.at(r, c).mean_score;
            const int x = margin_left + static_cast<int>(c) * cell;
            const int y = margin_top + static_cast<int>(r) * cell;
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
                << "\" fill=\"" << heat_color((v - lo) / span) << "\"/>\n";
            char label[32];
            std::snprintf(label, sizeof(label), "%.3f", v);
            svg << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 5
                << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << label << "</text>\n";
        }
    }
    // argmax marker
    svg << "<rect x=\"" << margin_left + static_cast<int>(best_col) * cell + 2 << "\" y=\""
        << margin_top + static_cast<int>(best_row) * cell + 2 << "\" width=\"" << cell - 4 << "\" height=\""
        << cell - 4 << "\" fill=\"none\" stroke=\"#d81b60\" stroke-width=\"3\"/>\n";
    // row labels (N) and column labels (lambda)
    for (size_t r = 0; r < rows; ++r)
        svg << "<text x=\"" << margin_left - 8 << "\" y=\"" << margin_top + static_cast<int>(r) * cell + cell / 2 + 5
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">N=" << matrix.n_values[r]
            << "</text>\n";
    for (size_t c = 0; c < cols; ++c) {
        char lbl[32];
        std::snprintf(lbl, sizeof(lbl), "%.3g", matrix.lambda_values[c]);
        svg << "<text x=\"" << margin_left + static_cast<int>(c) * cell + cell / 2 << "\" y=\""
            << margin_top + static_cast<int>(rows) * cell + 20
            << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << lbl << "</text>\n";
    }
    svg << "<text x=\"" << margin_left + static_cast<int>(cols) * cell / 2 << "\" y=\""
        << margin_top + static_cast<int>(rows) * cell + 45
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">lambda (events/ns per value agent)"
        << "</text>\n";
    svg << "<text x=\"16\" y=\"" << margin_top + static_cast<int>(rows) * cell / 2
        << "\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 "
        << margin_top + static_cast<int>(rows) * cell / 2 << ")\" text-anchor=\"middle\">N (noise agents)</text>\n";
    svg << "</svg>\n";
    write_file_atomic(path, svg.str());
}

} // namespace masgan::cal
