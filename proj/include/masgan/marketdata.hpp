#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace masgan::md {

// One T-second bar. Bar 0 of a series is the opening snapshot (volume 0);
// bar k >= 1 carries the volume traded during interval k, so a series of
// n bars yields n-1 returns each aligned with the volume of its interval.
struct Bar {
    int64_t index = 0;
    double mid_price = 0.0; // price units, > 0
    double volume = 0.0;    // shares traded during the bar, >= 0
};

struct BarSeries {
    std::vector<Bar> bars;
    int bar_seconds = 60; // T
    std::string session_id;
    std::optional<uint64_t> seed;       // present when simulated
    std::optional<std::string> params_ref; // generating parameter vector, when simulated

    size_t size() const { return bars.size(); }
    void validate() const; // throws InvalidInputError on broken invariants
};

// Normalization statistics fitted on training data; volume stats are on
// log1p-transformed volumes.
struct NormStats {
    double return_mean = 0.0;
    double return_std = 1.0;
    double volume_mean = 0.0;
    double volume_std = 1.0;
};

struct FeatureVector {
    std::vector<double> values; // [normalized returns (L)] ++ [normalized log1p volumes (L)]
    int window_len = 0;         // L
};

struct Dataset {
    std::vector<FeatureVector> vectors;
    NormStats norm;
    int bar_seconds = 60; // T
    int window_len = 0;   // L

    size_t size() const { return vectors.size(); }
    int dim() const { return 2 * window_len; }
};

// log returns ln(mid[i+1]/mid[i]); length = bars - 1
std::vector<double> returns_from_bars(const BarSeries& series);

// Raw (unnormalized) training window: returns plus the log1p-transformed
// volumes of the same intervals.
struct RawWindow {
    std::vector<double> returns;
    std::vector<double> log_volumes;
};

// Population mean/std over all window entries; stds floored at 1e-8.
NormStats fit_normalization(const std::vector<RawWindow>& raw_windows);

// Last L returns and last L interval volumes of the series, normalized.
FeatureVector build_feature_vector(const BarSeries& series, const NormStats& norm, int window_len);

RawWindow raw_window(const BarSeries& series, int window_len);

// CSV with header `bar_index,mid_price,volume`; bar_seconds comes from the
// caller since the format does not carry it.
BarSeries ingest_csv(const std::string& path, int bar_seconds);
void export_csv(const BarSeries& series, const std::string& path);

// Dataset archive: directory with meta.json + features.csv.
Dataset build_dataset(const std::vector<BarSeries>& sessions, int bar_seconds, int window_len);
void save_dataset(const Dataset& ds, const std::string& dir, const std::string& provenance);
Dataset load_dataset(const std::string& dir);

} // namespace masgan::md
