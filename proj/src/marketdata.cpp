#include "masgan/marketdata.hpp"

#include "masgan/errors.hpp"
#include "masgan/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace masgan::md {

void BarSeries::validate() const {
    if (bars.size() < 2) throw InvalidInputError("BarSeries needs at least 2 bars, got " + std::to_string(bars.size()));
    if (bar_seconds <= 0) throw InvalidInputError("bar_seconds must be positive");
    for (size_t i = 0; i < bars.size(); ++i) {
        const Bar& b = bars[i];
        if (b.index != static_cast<int64_t>(i))
            throw InvalidInputError("bar ordinals must be consecutive from 0; bar " + std::to_string(i) +
                                    " has index " + std::to_string(b.index));
        if (!(b.mid_price > 0.0) || !std::isfinite(b.mid_price))
            throw InvalidInputError("mid_price must be positive and finite at bar " + std::to_string(i));
        if (b.volume < 0.0 || !std::isfinite(b.volume))
            throw InvalidInputError("volume must be non-negative and finite at bar " + std::to_string(i));
    }
}

std::vector<double> returns_from_bars(const BarSeries& series) {
    series.validate();
    std::vector<double> out;
    out.reserve(series.bars.size() - 1);
    for (size_t i = 0; i + 1 < series.bars.size(); ++i)
        out.push_back(std::log(series.bars[i + 1].mid_price / series.bars[i].mid_price));
    return out;
}

RawWindow raw_window(const BarSeries& series, int window_len) {
    if (window_len <= 0) throw InvalidInputError("window_len must be positive");
    const std::vector<double> rets = returns_from_bars(series);
    if (static_cast<int>(rets.size()) < window_len)
        throw InvalidInputError("series yields " + std::to_string(rets.size()) + " returns, need " +
                                std::to_string(window_len));
    RawWindow w;
    w.returns.assign(rets.end() - window_len, rets.end());
    // return i covers interval (i, i+1]; its volume is bar i+1's
    w.log_volumes.reserve(window_len);
    const size_t n = series.bars.size();
    for (size_t i = n - window_len; i < n; ++i) w.log_volumes.push_back(std::log1p(series.bars[i].volume));
    return w;
}

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 1.0;
};

// population convention, std floored at 1e-8
MeanStd mean_std(const std::vector<const std::vector<double>*>& columns) {
    double sum = 0.0;
    size_t n = 0;
    for (const auto* col : columns) {
        for (double v : *col) sum += v;
        n += col->size();
    }
    if (n == 0) throw InvalidInputError("fit_normalization: no values");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto* col : columns)
        for (double v : *col) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd < 1e-8) sd = 1e-8;
    return {mean, sd};
}

} // namespace

NormStats fit_normalization(const std::vector<RawWindow>& raw_windows) {
    if (raw_windows.size() < 2)
        throw InvalidInputError("fit_normalization needs at least 2 windows, got " + std::to_string(raw_windows.size()));
    std::vector<const std::vector<double>*> rets, vols;
    rets.reserve(raw_windows.size());
    vols.reserve(raw_windows.size());
    for (const auto& w : raw_windows) {
        rets.push_back(&w.returns);
        vols.push_back(&w.log_volumes);
    }
    const MeanStd r = mean_std(rets);
    const MeanStd v = mean_std(vols);
    return NormStats{r.mean, r.std, v.mean, v.std};
}

FeatureVector build_feature_vector(const BarSeries& series, const NormStats& norm, int window_len) {
    const RawWindow w = raw_window(series, window_len);
    FeatureVector fv;
    fv.window_len = window_len;
    fv.values.reserve(2 * static_cast<size_t>(window_len));
    for (double r : w.returns) fv.values.push_back((r - norm.return_mean) / norm.return_std);
    for (double lv : w.log_volumes) fv.values.push_back((lv - norm.volume_mean) / norm.volume_std);
    for (double v : fv.values)
        if (!std::isfinite(v)) throw InvalidInputError("feature vector contains a non-finite entry");
    return fv;
}

BarSeries ingest_csv(const std::string& path, int bar_seconds) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "bar_index,mid_price,volume")
        throw ParseError(path + ":1: expected header 'bar_index,mid_price,volume', got '" + line + "'");

    BarSeries series;
    series.bar_seconds = bar_seconds;
    series.session_id = fs::path(path).stem().string();
    int64_t line_no = 1;
    int64_t prev_index = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string f0, f1, f2;
        if (!std::getline(row, f0, ',') || !std::getline(row, f1, ',') || !std::getline(row, f2, ','))
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 3 fields, got '" + line + "'");
        char* end = nullptr;
        Bar bar;
        bar.index = std::strtoll(f0.c_str(), &end, 10);
        if (end == f0.c_str() || *end != '\0')
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad bar_index '" + f0 + "'");
        bar.mid_price = std::strtod(f1.c_str(), &end);
        if (end == f1.c_str() || *end != '\0' || !std::isfinite(bar.mid_price) || bar.mid_price <= 0.0)
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad mid_price '" + f1 + "'");
        bar.volume = std::strtod(f2.c_str(), &end);
        if (end == f2.c_str() || *end != '\0' || !std::isfinite(bar.volume) || bar.volume < 0.0)
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad volume '" + f2 + "'");
        if (bar.index <= prev_index)
            throw InvalidInputError(path + ":" + std::to_string(line_no) + ": bar_index not strictly ascending");
        prev_index = bar.index;
        series.bars.push_back(bar);
    }
    series.validate();
    return series;
}

void export_csv(const BarSeries& series, const std::string& path) {
    std::string out = "bar_index,mid_price,volume\n";
    for (const Bar& b : series.bars)
        out += std::to_string(b.index) + "," + fmt_double(b.mid_price) + "," + fmt_double(b.volume) + "\n";
    write_file_atomic(path, out);
}

Dataset build_dataset(const std::vector<BarSeries>& sessions, int bar_seconds, int window_len) {
    if (sessions.empty()) throw InvalidInputError("build_dataset: no sessions");
    std::vector<RawWindow> windows;
    windows.reserve(sessions.size());
    for (const auto& s : sessions) {
        if (s.bar_seconds != bar_seconds)
            throw InvalidInputError("mixed bar_seconds across inputs: session '" + s.session_id + "' has T=" +
                                    std::to_string(s.bar_seconds) + ", expected " + std::to_string(bar_seconds));
        windows.push_back(raw_window(s, window_len));
    }
    Dataset ds;
    ds.bar_seconds = bar_seconds;
    ds.window_len = window_len;
    ds.norm = fit_normalization(windows);
    ds.vectors.reserve(sessions.size());
    for (const auto& s : sessions) ds.vectors.push_back(build_feature_vector(s, ds.norm, window_len));
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir, const std::string& provenance) {
    fs::create_directories(dir);
    json meta;
    meta["bar_seconds"] = ds.bar_seconds;
    meta["window_len"] = ds.window_len;
    meta["vector_count"] = ds.vectors.size();
    meta["norm"] = {{"return_mean", ds.norm.return_mean},
                    {"return_std", ds.norm.return_std},
                    {"volume_mean", ds.norm.volume_mean},
                    {"volume_std", ds.norm.volume_std}};
    meta["provenance"] = provenance;
    write_file_atomic((fs::path(dir) / "meta.json").string(), meta.dump(2) + "\n");

    std::string rows;
    for (const auto& fv : ds.vectors) {
        for (size_t i = 0; i < fv.values.size(); ++i) {
            if (i) rows += ',';
            rows += fmt_double(fv.values[i]);
        }
        rows += '\n';
    }
    write_file_atomic((fs::path(dir) / "features.csv").string(), rows);
}

Dataset load_dataset(const std::string& dir) {
    json meta;
    try {
        meta = json::parse(read_file((fs::path(dir) / "meta.json").string()));
    } catch (const json::parse_error& e) {
        throw ParseError(dir + "/meta.json: " + e.what());
    }
    Dataset ds;
    ds.bar_seconds = meta.at("bar_seconds").get<int>();
    ds.window_len = meta.at("window_len").get<int>();
    ds.norm.return_mean = meta.at("norm").at("return_mean").get<double>();
    ds.norm.return_std = meta.at("norm").at("return_std").get<double>();
    ds.norm.volume_mean = meta.at("norm").at("volume_mean").get<double>();
    ds.norm.volume_std = meta.at("norm").at("volume_std").get<double>();

    std::ifstream in((fs::path(dir) / "features.csv").string());
    if (!in) throw InvalidInputError("cannot open " + dir + "/features.csv");
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        FeatureVector fv;
        fv.window_len = ds.window_len;
        std::istringstream row(line);
        std::string field;
        while (std::getline(row, field, ',')) {
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (end == field.c_str() || *end != '\0')
                throw ParseError(dir + "/features.csv:" + std::to_string(line_no) + ": bad value '" + field + "'");
            fv.values.push_back(v);
        }
        if (static_cast<int>(fv.values.size()) != 2 * ds.window_len)
            throw InvalidInputError(dir + "/features.csv:" + std::to_string(line_no) + ": expected " +
                                    std::to_string(2 * ds.window_len) + " values, got " +
                                    std::to_string(fv.values.size()));
        ds.vectors.push_back(std::move(fv));
    }
    const size_t expected = meta.at("vector_count").get<size_t>();
    if (ds.vectors.size() != expected)
        throw InvalidInputError(dir + ": meta declares " + std::to_string(expected) + " vectors, features.csv has " +
                                std::to_string(ds.vectors.size()));
    return ds;
}

} // namespace masgan::md
