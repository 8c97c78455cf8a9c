#include "masgan/evaluation.hpp"

#include "masgan/errors.hpp"
#include "masgan/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

using nlohmann::json;

namespace masgan::ev {

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double sample_std_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

namespace {

// Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)
double kolmogorov_survival(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-14) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

} // namespace

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InvalidInputError("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const size_t n = a.size(), m = b.size();

    double d = 0.0;
    size_t i = 0, j = 0;
    while (i < n && j < m) {
        const double x = std::min(a[i], b[j]);
        while (i < n && a[i] <= x) ++i; // consume ties on both sides before measuring
        while (j < m && b[j] <= x) ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(n);
        const double fb = static_cast<double>(j) / static_cast<double>(m);
        d = std::max(d, std::fabs(fa - fb));
    }

    const double ne = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
    return KsResult{d, kolmogorov_survival(std::sqrt(ne) * d), n, m};
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

} // namespace

DensityEstimate kde(const std::vector<double>& samples, std::optional<double> bandwidth) {
    if (samples.size() < 2) throw InvalidInputError("kde needs at least 2 samples");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double sd = sample_std_of(samples);
    if (sd == 0.0) throw InvalidInputError("kde: zero spread");

    double bw;
    if (bandwidth) {
        bw = *bandwidth;
        if (!(bw > 0.0)) throw InvalidInputError("kde: bandwidth must be positive");
    } else {
        const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
        double spread = sd;
        if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
        bw = 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
    }

    constexpr int kGridPoints = 256;
    DensityEstimate out;
    out.bandwidth = bw;
    out.grid.resize(kGridPoints);
    out.density.assign(kGridPoints, 0.0);
    const double lo = sorted.front() - 3.0 * bw;
    const double hi = sorted.back() + 3.0 * bw;
    const double step = (hi - lo) / (kGridPoints - 1);
    const double norm = 1.0 / (static_cast<double>(samples.size()) * bw * std::sqrt(2.0 * M_PI));
    for (int i = 0; i < kGridPoints; ++i) {
        const double x = lo + step * i;
        out.grid[i] = x;
        double acc = 0.0;
        for (double s : samples) {
            const double z = (x - s) / bw;
            acc += std::exp(-0.5 * z * z);
        }
        out.density[i] = acc * norm;
    }
    return out;
}

HorizonStats return_distribution_stats_one(const md::BarSeries& series, int horizon) {
    if (horizon <= 0) throw InvalidInputError("horizon must be positive");
    series.validate();
    const size_t len = series.bars.size();
    const size_t count = (len - 1) / static_cast<size_t>(horizon);
    if (count == 0)
        throw InvalidInputError("series too short for horizon " + std::to_string(horizon) + " (" +
                                std::to_string(len) + " bars)");

    HorizonStats h;
    h.horizon = horizon;
    h.returns.reserve(count);
    for (size_t j = 0; j < count; ++j) {
        const double p0 = series.bars[j * horizon].mid_price;
        const double p1 = series.bars[(j + 1) * horizon].mid_price;
        h.returns.push_back(std::log(p1 / p0));
    }

    // population moments
    const double mean = mean_of(h.returns);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double r : h.returns) {
        const double d = r - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double n = static_cast<double>(h.returns.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    h.mean = mean;
    h.std = std::sqrt(m2);
    h.skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    h.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;

    constexpr int kBins = 64;
    double lo = *std::min_element(h.returns.begin(), h.returns.end());
    double hi = *std::max_element(h.returns.begin(), h.returns.end());
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    h.hist_edges.resize(kBins + 1);
    h.hist_counts.assign(kBins, 0);
    const double width = (hi - lo) / kBins;
    for (int i = 0; i <= kBins; ++i) h.hist_edges[i] = lo + width * i;
    for (double r : h.returns) {
        int bin = static_cast<int>((r - lo) / width);
        bin = std::clamp(bin, 0, kBins - 1);
        ++h.hist_counts[static_cast<size_t>(bin)];
    }
    return h;
}

std::vector<HorizonStats> return_distribution_stats(const md::BarSeries& series, const std::vector<int>& horizons) {
    std::vector<HorizonStats> out;
    out.reserve(horizons.size());
    for (int h : horizons) out.push_back(return_distribution_stats_one(series, h));
    return out;
}

double volume_volatility_correlation(const md::BarSeries& series) {
    series.validate();
    if (series.bars.size() < 20)
        throw InvalidInputError("volume_volatility_correlation needs >= 20 bars, got " +
                                std::to_string(series.bars.size()));
    std::vector<double> vol, absret;
    for (size_t k = 1; k < series.bars.size(); ++k) {
        vol.push_back(series.bars[k].volume);
        absret.push_back(std::fabs(std::log(series.bars[k].mid_price / series.bars[k - 1].mid_price)));
    }
    const double mv = mean_of(vol), mr = mean_of(absret);
    double svv = 0.0, srr = 0.0, svr = 0.0;
    for (size_t i = 0; i < vol.size(); ++i) {
        svv += (vol[i] - mv) * (vol[i] - mv);
        srr += (absret[i] - mr) * (absret[i] - mr);
        svr += (vol[i] - mv) * (absret[i] - mr);
    }
    if (svv == 0.0 || srr == 0.0)
        throw InvalidInputError("volume_volatility_correlation: zero variance input");
    return svr / std::sqrt(svv * srr);
}

std::vector<std::vector<double>> gaussian_noise_set(int count, int dim, Rng& rng) {
    std::vector<std::vector<double>> out(static_cast<size_t>(count));
    for (auto& v : out) {
        v.resize(static_cast<size_t>(dim));
        for (double& x : v) x = rng.normal();
    }
    return out;
}

ScoreDistributionReport score_distribution_report(const gan::CriticNet& critic,
                                                  const std::vector<std::vector<double>>& real_set,
                                                  const std::vector<std::vector<double>>& generated_set,
                                                  const std::vector<std::vector<double>>& noise_set) {
    if (real_set.empty() || generated_set.empty() || noise_set.empty())
        throw InvalidInputError("score_distribution_report: all sets must be non-empty");
    ScoreDistributionReport r;
    r.real_scores = gan::realism_scores(critic, real_set);
    r.generated_scores = gan::realism_scores(critic, generated_set);
    r.noise_scores = gan::realism_scores(critic, noise_set);
    r.mean_real = mean_of(r.real_scores);
    r.mean_generated = mean_of(r.generated_scores);
    r.mean_noise = mean_of(r.noise_scores);
    r.mean_abs_diff = std::fabs(r.mean_real - r.mean_generated);
    r.ks_real_vs_generated = ks_two_sample(r.real_scores, r.generated_scores);
    r.kde_real = kde(r.real_scores);
    r.kde_generated = kde(r.generated_scores);
    r.kde_noise = kde(r.noise_scores);
    return r;
}

void save_scores_csv(const std::vector<double>& scores, const std::string& path) {
    std::string out = "score\n";
    for (double s : scores) out += fmt_double(s) + "\n";
    write_file_atomic(path, out);
}

void save_kde_csv(const DensityEstimate& d, const std::string& path) {
    std::string out = "x,density\n";
    for (size_t i = 0; i < d.grid.size(); ++i) out += fmt_double(d.grid[i]) + "," + fmt_double(d.density[i]) + "\n";
    write_file_atomic(path, out);
}

void save_ks_report_json(const KsResult& ks, const std::string& path) {
    json j;
    j["statistic"] = ks.statistic;
    j["p_value"] = ks.p_value;
    j["n"] = ks.n;
    j["m"] = ks.m;
    write_file_atomic(path, j.dump(2) + "\n");
}

void save_histogram_csv(const HorizonStats& h, const std::string& path) {
    std::string out = "bin_lo,bin_hi,count\n";
    for (size_t i = 0; i < h.hist_counts.size(); ++i)
        out += fmt_double(h.hist_edges[i]) + "," + fmt_double(h.hist_edges[i + 1]) + "," +
               std::to_string(h.hist_counts[i]) + "\n";
    write_file_atomic(path, out);
}

} // namespace masgan::ev
