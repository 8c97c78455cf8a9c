#pragma once
#include "masgan/gan.hpp"
#include "masgan/marketdata.hpp"

#include <optional>
#include <string>
#include <vector>

namespace masgan::ev {

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    size_t n = 0;
    size_t m = 0;
};

// Two-sample KS: sup |F_a - F_b| over pooled points (right-continuous ECDFs),
// p-value from the asymptotic Kolmogorov distribution at effective size
// n m / (n + m) with the small-sample lambda correction.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct DensityEstimate {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

// Gaussian-kernel KDE on 256 grid points spanning data +/- 3 bandwidths;
// default bandwidth is Silverman's 0.9 min(std, IQR/1.34) n^(-1/5).
DensityEstimate kde(const std::vector<double>& samples, std::optional<double> bandwidth = std::nullopt);

struct HorizonStats {
    int horizon = 1;
    std::vector<double> returns; // non-overlapping h-bar log returns
    std::vector<double> hist_edges;
    std::vector<int64_t> hist_counts;
    double mean = 0.0;
    double std = 0.0;
    double skew = 0.0;
    double excess_kurtosis = 0.0;
};

HorizonStats return_distribution_stats_one(const md::BarSeries& series, int horizon);
std::vector<HorizonStats> return_distribution_stats(const md::BarSeries& series,
                                                    const std::vector<int>& horizons = {1, 10});

// Pearson correlation of per-bar volume against |log return| of the same
// interval; needs >= 20 bars and nonzero variance on both sides.
double volume_volatility_correlation(const md::BarSeries& series);

struct ScoreDistributionReport {
    std::vector<double> real_scores;
    std::vector<double> generated_scores;
    std::vector<double> noise_scores;
    DensityEstimate kde_real;
    DensityEstimate kde_generated;
    DensityEstimate kde_noise;
    double mean_real = 0.0;
    double mean_generated = 0.0;
    double mean_noise = 0.0;
    double mean_abs_diff = 0.0; // |mean_real - mean_generated|
    KsResult ks_real_vs_generated;
};

ScoreDistributionReport score_distribution_report(const gan::CriticNet& critic,
                                                  const std::vector<std::vector<double>>& real_set,
                                                  const std::vector<std::vector<double>>& generated_set,
                                                  const std::vector<std::vector<double>>& noise_set);

// i.i.d. standard gaussian vectors, the 'random' validation set
std::vector<std::vector<double>> gaussian_noise_set(int count, int dim, Rng& rng);

double mean_of(const std::vector<double>& xs);
double sample_std_of(const std::vector<double>& xs); // n-1 convention, 0 for n < 2

void save_scores_csv(const std::vector<double>& scores, const std::string& path);
void save_kde_csv(const DensityEstimate& d, const std::string& path);
void save_ks_report_json(const KsResult& ks, const std::string& path);
void save_histogram_csv(const HorizonStats& h, const std::string& path);

} // namespace masgan::ev
