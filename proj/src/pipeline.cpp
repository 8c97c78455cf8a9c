#include "masgan/pipeline.hpp"

#include "masgan/errors.hpp"
#include "masgan/evaluation.hpp"
#include "masgan/hash.hpp"
#include "masgan/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>

namespace fs = std::filesystem;
using nlohmann::json;

namespace masgan::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<std::string> list_session_csvs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw InvalidInputError("input directory does not exist: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv" &&
            entry.path().filename().string().rfind("bars_", 0) == 0)
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw InvalidInputError("no bars_*.csv files in " + dir);
    return paths;
}

std::string norm_meta_json(const RunConfig& config, const md::NormStats& norm) {
    json meta;
    meta["bar_seconds"] = config.bar_seconds;
    meta["window_len"] = config.window_len;
    meta["norm"] = {{"return_mean", norm.return_mean},
                    {"return_std", norm.return_std},
                    {"volume_mean", norm.volume_mean},
                    {"volume_std", norm.volume_std}};
    return meta.dump();
}

md::NormStats norm_from_meta(const std::string& meta_json, int* bar_seconds, int* window_len) {
    const json meta = json::parse(meta_json);
    md::NormStats norm;
    norm.return_mean = meta.at("norm").at("return_mean").get<double>();
    norm.return_std = meta.at("norm").at("return_std").get<double>();
    norm.volume_mean = meta.at("norm").at("volume_mean").get<double>();
    norm.volume_std = meta.at("norm").at("volume_std").get<double>();
    if (bar_seconds) *bar_seconds = meta.at("bar_seconds").get<int>();
    if (window_len) *window_len = meta.at("window_len").get<int>();
    return norm;
}

} // namespace

void write_manifest(const RunConfig& config, const std::string& command, const std::vector<uint64_t>& seeds,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                    const std::string& started_utc, const std::string& path) {
    json j;
    j["command"] = command;
    j["config_path"] = config.source_path;
    j["config_sha256"] = config.source_hash;
    j["seeds"] = seeds;
    j["module_versions"] = {{"masgan", kVersion}};
    json in = json::object();
    for (const auto& p : inputs) in[p] = sha256_file_hex(p);
    j["inputs"] = in;
    json out = json::object();
    for (const auto& p : outputs) out[p] = sha256_file_hex(p);
    j["artifacts"] = out;
    j["started_utc"] = started_utc;
    j["finished_utc"] = utc_timestamp_now();
    write_file_atomic(path, j.dump(2) + "\n");
}

StageResult cmd_simulate(const RunConfig& config, const std::vector<uint64_t>& seeds) {
    config.validate();
    if (seeds.empty()) throw InvalidInputError("simulate: empty seed list");
    const std::string started = utc_timestamp_now();
    const fs::path session_dir = fs::path(config.output_dir) / "sessions";
    fs::create_directories(session_dir);

    StageResult result;
    for (uint64_t seed : seeds) {
        const sim::SimResult sim_out = sim::run_simulation_full(config.simulator, seed, config.bar_seconds);
        const std::string bars_path = (session_dir / ("bars_seed" + std::to_string(seed) + ".csv")).string();
        md::export_csv(sim_out.bars, bars_path);
        result.artifacts.push_back(bars_path);
        if (config.emit_trades) {
            const std::string trades_path = (session_dir / ("trades_seed" + std::to_string(seed) + ".csv")).string();
            sim::export_trades_csv(sim_out.trades, trades_path);
            result.artifacts.push_back(trades_path);
        }
    }
    const std::string manifest = (fs::path(config.output_dir) / "manifest_simulate.json").string();
    write_manifest(config, "simulate", seeds, {}, result.artifacts, started, manifest);
    result.artifacts.push_back(manifest);
    return result;
}

StageResult cmd_build_dataset(const RunConfig& config) {
    config.validate();
    const std::string started = utc_timestamp_now();
    const std::vector<std::string> inputs = list_session_csvs(config.resolved_input_dir());

    std::vector<md::BarSeries> sessions;
    sessions.reserve(inputs.size());
    for (const auto& path : inputs) sessions.push_back(md::ingest_csv(path, config.bar_seconds));
    const md::Dataset ds = md::build_dataset(sessions, config.bar_seconds, config.window_len);

    const std::string dataset_dir = config.resolved_dataset_dir();
    md::save_dataset(ds, dataset_dir, "sessions:" + std::to_string(sessions.size()));

    StageResult result;
    result.artifacts.push_back((fs::path(dataset_dir) / "meta.json").string());
    result.artifacts.push_back((fs::path(dataset_dir) / "features.csv").string());
    const std::string manifest = (fs::path(config.output_dir) / "manifest_build_dataset.json").string();
    write_manifest(config, "build-dataset", {}, inputs, result.artifacts, started, manifest);
    result.artifacts.push_back(manifest);
    return result;
}

StageResult cmd_train(const RunConfig& config) {
    config.validate();
    const std::string started = utc_timestamp_now();
    const std::string dataset_dir = config.resolved_dataset_dir();
    const md::Dataset ds = md::load_dataset(dataset_dir);
    if (ds.bar_seconds != config.bar_seconds || ds.window_len != config.window_len)
        throw InvalidInputError("dataset archive (T=" + std::to_string(ds.bar_seconds) + ", L=" +
                                std::to_string(ds.window_len) + ") does not match config (T=" +
                                std::to_string(config.bar_seconds) + ", L=" + std::to_string(config.window_len) + ")");

    gan::TrainArtifacts artifacts = gan::train(ds, config.gan);

    fs::create_directories(config.output_dir);
    const std::string meta = norm_meta_json(config, ds.norm);
    const std::string critic_prefix = (fs::path(config.output_dir) / "critic").string();
    const std::string gen_prefix = (fs::path(config.output_dir) / "generator").string();
    nn::save_checkpoint(artifacts.critic, critic_prefix, meta);
    nn::save_checkpoint(artifacts.generator, gen_prefix, meta);

    const std::string report_path = (fs::path(config.output_dir) / "train_report.csv").string();
    const std::string snapshots_path = (fs::path(config.output_dir) / "eval_snapshots.csv").string();
    gan::save_train_report_csv(artifacts.report, report_path);
    gan::save_eval_snapshots_csv(artifacts.report, snapshots_path);

    StageResult result;
    result.artifacts = {critic_prefix + "_model.json", critic_prefix + "_weights.bin", gen_prefix + "_model.json",
                        gen_prefix + "_weights.bin", report_path, snapshots_path};
    const std::string manifest = (fs::path(config.output_dir) / "manifest_train.json").string();
    write_manifest(config, "train", {config.gan.seed},
                   {(fs::path(dataset_dir) / "meta.json").string(), (fs::path(dataset_dir) / "features.csv").string()},
                   result.artifacts, started, manifest);
    result.artifacts.push_back(manifest);
    return result;
}

StageResult cmd_calibrate(const RunConfig& config, int jobs) {
    config.validate();
    if (config.grid.n_values.empty() || config.grid.lambda_values.empty())
        throw ConfigError("calibrate: [calibration] n_values and lambda_values must be set");
    const std::string started = utc_timestamp_now();

    const std::string critic_prefix = (fs::path(config.output_dir) / "critic").string();
    std::string meta_json;
    const gan::CriticNet critic = nn::load_checkpoint(critic_prefix, &meta_json);
    int ckpt_T = 0, ckpt_L = 0;
    const md::NormStats norm = norm_from_meta(meta_json, &ckpt_T, &ckpt_L);
    if (ckpt_T != config.bar_seconds || ckpt_L != config.window_len)
        throw InvalidInputError("checkpoint was trained at T=" + std::to_string(ckpt_T) + ", L=" +
                                std::to_string(ckpt_L) + " but config asks T=" + std::to_string(config.bar_seconds) +
                                ", L=" + std::to_string(config.window_len));

    const std::string checkpoint_hash = sha256_file_hex(critic_prefix + "_weights.bin");
    const cal::CalibrationResult result =
        cal::calibrate(config.grid, config.simulator, config.calibration_seeds, critic, norm, config.bar_seconds,
                       config.window_len, jobs, checkpoint_hash);

    const std::string mean_path = (fs::path(config.output_dir) / "score_matrix.csv").string();
    const std::string std_path = (fs::path(config.output_dir) / "score_std.csv").string();
    const std::string svg_path = (fs::path(config.output_dir) / "heatmap.svg").string();
    const std::string json_path = (fs::path(config.output_dir) / "calibration.json").string();
    cal::save_score_matrix_csv(result.matrix, mean_path, std_path);
    cal::render_heatmap_svg(result.matrix, result.best_row, result.best_col, svg_path);
    cal::save_calibration_json(result, config.source_hash, json_path);

    StageResult out;
    out.artifacts = {mean_path, std_path, svg_path, json_path};
    const std::string manifest = (fs::path(config.output_dir) / "manifest_calibrate.json").string();
    write_manifest(config, "calibrate", config.calibration_seeds,
                   {critic_prefix + "_model.json", critic_prefix + "_weights.bin"}, out.artifacts, started, manifest);
    out.artifacts.push_back(manifest);
    return out;
}

StageResult cmd_evaluate(const RunConfig& config) {
    config.validate();
    const std::string started = utc_timestamp_now();

    const std::string critic_prefix = (fs::path(config.output_dir) / "critic").string();
    const std::string gen_prefix = (fs::path(config.output_dir) / "generator").string();
    std::string meta_json;
    const gan::CriticNet critic = nn::load_checkpoint(critic_prefix, &meta_json);
    const gan::GeneratorNet generator = nn::load_checkpoint(gen_prefix);

    const std::string dataset_dir = config.resolved_dataset_dir();
    const md::Dataset ds = md::load_dataset(dataset_dir);

    std::vector<std::vector<double>> real;
    real.reserve(ds.vectors.size());
    for (const auto& fv : ds.vectors) real.push_back(fv.values);

    constexpr int kSetSize = 512;
    Rng gen_rng(config.gan.seed, 0xE7A10001ULL);
    const std::vector<std::vector<double>> generated = gan::generate_samples(generator, kSetSize, gen_rng);
    Rng noise_rng(config.gan.seed, 0xE7A10002ULL);
    const std::vector<std::vector<double>> noise = ev::gaussian_noise_set(kSetSize, ds.dim(), noise_rng);

    const ev::ScoreDistributionReport report = ev::score_distribution_report(critic, real, generated, noise);

    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);
    StageResult result;
    const auto emit = [&](const std::string& name, const auto& writer) {
        const std::string path = (out_dir / name).string();
        writer(path);
        result.artifacts.push_back(path);
    };
    emit("scores_real.csv", [&](const std::string& p) { ev::save_scores_csv(report.real_scores, p); });
    emit("scores_generated.csv", [&](const std::string& p) { ev::save_scores_csv(report.generated_scores, p); });
    emit("scores_random.csv", [&](const std::string& p) { ev::save_scores_csv(report.noise_scores, p); });
    emit("kde_real.csv", [&](const std::string& p) { ev::save_kde_csv(report.kde_real, p); });
    emit("kde_generated.csv", [&](const std::string& p) { ev::save_kde_csv(report.kde_generated, p); });
    emit("kde_random.csv", [&](const std::string& p) { ev::save_kde_csv(report.kde_noise, p); });
    emit("ks_report.json", [&](const std::string& p) { ev::save_ks_report_json(report.ks_real_vs_generated, p); });

    // KDE overlay plot of the three score distributions
    emit("kde_scores.svg", [&](const std::string& p) {
        const std::vector<std::pair<const ev::DensityEstimate*, const char*>> curves = {
            {&report.kde_real, "#1565c0"}, {&report.kde_generated, "#e65100"}, {&report.kde_noise, "#2e7d32"}};
        double xlo = 1e300, xhi = -1e300, yhi = 0.0;
        for (const auto& [d, color] : curves) {
            (void)color;
            xlo = std::min(xlo, d->grid.front());
            xhi = std::max(xhi, d->grid.back());
            for (double y : d->density) yhi = std::max(yhi, y);
        }
        const int w = 640, h = 360, ml = 50, mb = 40;
        std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                          std::to_string(h) + "\">\n";
        svg += "<text x=\"" + std::to_string(ml) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
               "critic score density: real (blue), generated (orange), random (green)</text>\n";
        for (const auto& [d, color] : curves) {
            svg += "<polyline fill=\"none\" stroke=\"";
            svg += color;
            svg += "\" stroke-width=\"1.5\" points=\"";
            for (size_t i = 0; i < d->grid.size(); ++i) {
                const double px = ml + (d->grid[i] - xlo) / (xhi - xlo) * (w - ml - 20);
                const double py = (h - mb) - d->density[i] / yhi * (h - mb - 40);
                svg += fmt_double(px) + "," + fmt_double(py) + " ";
            }
            svg += "\"/>\n";
        }
        svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(h - mb) + "\" x2=\"" +
               std::to_string(w - 20) + "\" y2=\"" + std::to_string(h - mb) + "\" stroke=\"#444\"/>\n</svg>\n";
        write_file_atomic(p, svg);
    });

    // return histograms and volume/volatility diagnostics from the input sessions
    const std::vector<std::string> session_paths = list_session_csvs(config.resolved_input_dir());
    const md::BarSeries first = md::ingest_csv(session_paths.front(), config.bar_seconds);
    const std::vector<ev::HorizonStats> horizons = ev::return_distribution_stats(first, {1, 10});
    emit("returns_hist_1.csv", [&](const std::string& p) { ev::save_histogram_csv(horizons[0], p); });
    emit("returns_hist_10.csv", [&](const std::string& p) { ev::save_histogram_csv(horizons[1], p); });

    double corr_sum = 0.0;
    int corr_count = 0;
    for (const auto& path : session_paths) {
        const md::BarSeries s = md::ingest_csv(path, config.bar_seconds);
        try {
            corr_sum += ev::volume_volatility_correlation(s);
            ++corr_count;
        } catch (const InvalidInputError&) {
            // degenerate session (constant price or volume); skipped in the average
        }
    }
    emit("evaluation.json", [&](const std::string& p) {
        json j;
        j["mean_real_score"] = report.mean_real;
        j["mean_generated_score"] = report.mean_generated;
        j["mean_random_score"] = report.mean_noise;
        j["mean_abs_diff"] = report.mean_abs_diff;
        j["ks_statistic"] = report.ks_real_vs_generated.statistic;
        j["ks_p_value"] = report.ks_real_vs_generated.p_value;
        j["volume_volatility_correlation_mean"] = corr_count ? corr_sum / corr_count : 0.0;
        j["sessions_in_correlation"] = corr_count;
        j["returns_1bar"] = {{"mean", horizons[0].mean}, {"std", horizons[0].std}, {"skew", horizons[0].skew},
                             {"excess_kurtosis", horizons[0].excess_kurtosis}};
        j["returns_10bar"] = {{"mean", horizons[1].mean}, {"std", horizons[1].std}, {"skew", horizons[1].skew},
                              {"excess_kurtosis", horizons[1].excess_kurtosis}};
        write_file_atomic(p, j.dump(2) + "\n");
    });

    const std::string manifest = (fs::path(config.output_dir) / "manifest_evaluate.json").string();
    std::vector<std::string> inputs = {critic_prefix + "_model.json", critic_prefix + "_weights.bin",
                                       gen_prefix + "_model.json", gen_prefix + "_weights.bin"};
    write_manifest(config, "evaluate", {config.gan.seed}, inputs, result.artifacts, started, manifest);
    result.artifacts.push_back(manifest);
    return result;
}

} // namespace masgan::cli
