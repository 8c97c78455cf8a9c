#include "masgan/evaluation.hpp"

#include "masgan/errors.hpp"
#include "masgan/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace masgan;
using namespace masgan::ev;

TEST_CASE("ks: identical samples") {
    const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
    const KsResult r = ks_two_sample(a, a);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("ks: disjoint supports") {
    const KsResult r = ks_two_sample({1, 2, 3}, {10, 11, 12});
    CHECK(r.statistic == 1.0);
    CHECK(r.p_value < 0.2);
}

TEST_CASE("ks: empty sample rejected") {
    CHECK_THROWS_AS(ks_two_sample({}, {1.0}), InvalidInputError);
}

TEST_CASE("ks is symmetric and invariant under increasing transforms") {
    Rng rng(31, 0);
    std::vector<double> a(40), b(55);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal(0.4, 1.3);
    const KsResult ab = ks_two_sample(a, b);
    const KsResult ba = ks_two_sample(b, a);
    CHECK(ab.statistic == ba.statistic);
    CHECK(ab.p_value == ba.p_value);

    std::vector<double> ta = a, tb = b;
    const auto transform = [](double x) { return std::exp(0.5 * x) + x; }; // strictly increasing
    for (double& x : ta) x = transform(x);
    for (double& x : tb) x = transform(x);
    const KsResult t = ks_two_sample(ta, tb);
    CHECK(t.statistic == doctest::Approx(ab.statistic).epsilon(1e-15));
}

TEST_CASE("ks statistic matches the exhaustive-permutation oracle and p is close at n=m=6") {
    Rng rng(77, 0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> a(6), b(6);
        for (double& x : a) x = rng.normal();
        for (double& x : b) x = rng.normal(0.5 * rep / 10.0, 1.0);
        const KsResult r = ks_two_sample(a, b);
        CHECK(r.statistic == doctest::Approx(oracles::ks_statistic_direct(a, b)).epsilon(1e-12));
        const double perm_p = oracles::ks_permutation_p(a, b);
        CHECK(std::fabs(r.p_value - perm_p) < 0.05);
    }
}

TEST_CASE("ks handles ties through pooled evaluation points") {
    const std::vector<double> a = {1, 1, 2, 3};
    const std::vector<double> b = {1, 2, 2, 3};
    const KsResult r = ks_two_sample(a, b);
    CHECK(r.statistic == doctest::Approx(oracles::ks_statistic_direct(a, b)).epsilon(1e-15));
}

TEST_CASE("kde: symmetry for two points") {
    const DensityEstimate d = kde({0.0, 1.0});
    // density at grid reflected around 0.5 should match
    for (size_t i = 0; i < d.grid.size(); ++i) {
        const double mirror = 1.0 - d.grid[i];
        // locate nearest grid point to the mirror
        const double step = d.grid[1] - d.grid[0];
        const double idx = (mirror - d.grid.front()) / step;
        const auto j = static_cast<long>(std::llround(idx));
        if (j < 0 || j >= static_cast<long>(d.grid.size())) continue;
        CHECK(d.density[i] == doctest::Approx(d.density[static_cast<size_t>(j)]).epsilon(1e-6));
    }
}

TEST_CASE("kde: integral is about one and density non-negative") {
    Rng rng(5, 0);
    std::vector<double> xs(4000);
    for (double& x : xs) x = rng.normal(2.0, 3.0);
    const DensityEstimate d = kde(xs);
    double integral = 0.0;
    for (size_t i = 0; i + 1 < d.grid.size(); ++i) {
        CHECK(d.density[i] >= 0.0);
        integral += 0.5 * (d.density[i] + d.density[i + 1]) * (d.grid[i + 1] - d.grid[i]);
    }
    CHECK(std::fabs(integral - 1.0) < 1e-2);
}

TEST_CASE("kde: standard normal peak near zero") {
    Rng rng(6, 0);
    std::vector<double> xs(10000);
    for (double& x : xs) x = rng.normal();
    const DensityEstimate d = kde(xs);
    const size_t peak = static_cast<size_t>(std::max_element(d.density.begin(), d.density.end()) - d.density.begin());
    CHECK(std::fabs(d.grid[peak]) < 0.1);
}

TEST_CASE("kde: degenerate input rejected") {
    CHECK_THROWS_AS(kde({1.0, 1.0, 1.0}), InvalidInputError);
    CHECK_THROWS_AS(kde({1.0}), InvalidInputError);
}

namespace {

md::BarSeries series_from_mids(const std::vector<double>& mids, const std::vector<double>& vols = {}) {
    md::BarSeries s;
    s.bar_seconds = 60;
    s.session_id = "eval-test";
    for (size_t i = 0; i < mids.size(); ++i)
        s.bars.push_back(md::Bar{static_cast<int64_t>(i), mids[i], i < vols.size() ? vols[i] : 1.0});
    return s;
}

} // namespace

TEST_CASE("return stats: constant price has zero variance") {
    const auto stats = return_distribution_stats_one(series_from_mids(std::vector<double>(30, 50.0)), 1);
    CHECK(stats.std == 0.0);
    for (double r : stats.returns) CHECK(r == 0.0);
}

TEST_CASE("return stats: horizon count law") {
    std::vector<double> mids(45, 100.0);
    for (size_t i = 0; i < mids.size(); ++i) mids[i] += static_cast<double>(i % 3);
    const auto stats = return_distribution_stats_one(series_from_mids(mids), 10);
    CHECK(stats.returns.size() == (45 - 1) / 10);
}

TEST_CASE("return stats: moments match a two-pass oracle") {
    Rng rng(9, 0);
    std::vector<double> mids;
    double p = 100.0;
    for (int i = 0; i < 400; ++i) {
        p *= std::exp(rng.normal(0.0, 0.01));
        mids.push_back(p);
    }
    const auto stats = return_distribution_stats_one(series_from_mids(mids), 1);

    const double mean = oracles::two_pass_mean(stats.returns);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double r : stats.returns) {
        const double d = r - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double n = static_cast<double>(stats.returns.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    CHECK(stats.mean == doctest::Approx(mean).epsilon(1e-10));
    CHECK(stats.std == doctest::Approx(std::sqrt(m2)).epsilon(1e-10));
    CHECK(stats.skew == doctest::Approx(m3 / std::pow(m2, 1.5)).epsilon(1e-10));
    CHECK(stats.excess_kurtosis == doctest::Approx(m4 / (m2 * m2) - 3.0).epsilon(1e-10));
}

TEST_CASE("volume/volatility correlation: exact dependence gives 1") {
    Rng rng(10, 0);
    std::vector<double> mids = {100.0};
    double p = 100.0;
    for (int i = 0; i < 59; ++i) {
        p *= std::exp(rng.normal(0.0, 0.01));
        mids.push_back(p);
    }
    std::vector<double> vols(mids.size(), 0.0);
    for (size_t k = 1; k < mids.size(); ++k) vols[k] = std::fabs(std::log(mids[k] / mids[k - 1])) + 1.0;
    CHECK(volume_volatility_correlation(series_from_mids(mids, vols)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("volume/volatility correlation: independent streams near zero") {
    Rng rng(11, 0);
    std::vector<double> mids = {100.0};
    std::vector<double> vols = {0.0};
    double p = 100.0;
    for (int i = 0; i < 10000; ++i) {
        p *= std::exp(rng.normal(0.0, 0.01));
        mids.push_back(p);
        vols.push_back(rng.uniform(100.0, 5000.0));
    }
    CHECK(std::fabs(volume_volatility_correlation(series_from_mids(mids, vols))) < 0.05);
}

TEST_CASE("volume/volatility correlation: affine invariance") {
    Rng rng(12, 0);
    std::vector<double> mids = {100.0};
    std::vector<double> vols = {0.0};
    double p = 100.0;
    for (int i = 0; i < 100; ++i) {
        p *= std::exp(rng.normal(0.0, 0.01));
        mids.push_back(p);
        vols.push_back(rng.uniform(100.0, 2000.0) + 500.0 * std::fabs(std::log(mids[mids.size() - 1] / mids[mids.size() - 2])));
    }
    const md::BarSeries base = series_from_mids(mids, vols);
    const double c1 = volume_volatility_correlation(base);

    std::vector<double> scaled_vols = vols;
    for (double& v : scaled_vols) v = 3.0 * v + 17.0;
    const double c2 = volume_volatility_correlation(series_from_mids(mids, scaled_vols));
    CHECK(c1 == doctest::Approx(c2).epsilon(1e-12));
}

TEST_CASE("volume/volatility correlation guards") {
    CHECK_THROWS_AS(volume_volatility_correlation(series_from_mids(std::vector<double>(5, 100.0))), InvalidInputError);
    // constant price over enough bars -> zero variance in |returns|
    CHECK_THROWS_AS(volume_volatility_correlation(series_from_mids(std::vector<double>(30, 100.0))), InvalidInputError);
}

TEST_CASE("score distribution report is well-formed and self-consistent") {
    Rng rng(13, 0);
    nn::LayerSpec dense;
    dense.kind = nn::LayerKind::Dense;
    dense.units = 1;
    Rng init(14, 0);
    const gan::CriticNet critic = nn::make_net(6, 1, {dense}, init); // untrained random critic

    std::vector<std::vector<double>> real(32), generated(32), noise(32);
    for (auto* set : {&real, &generated, &noise})
        for (auto& v : *set) {
            v.resize(6);
            for (double& x : v) x = rng.normal();
        }

    const ScoreDistributionReport rep = score_distribution_report(critic, real, generated, noise);
    CHECK(rep.real_scores.size() == 32);
    CHECK(rep.mean_abs_diff == doctest::Approx(std::fabs(rep.mean_real - rep.mean_generated)));
    for (double s : rep.real_scores) {
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }

    // scoring the same set twice gives identical distributions
    const ScoreDistributionReport same = score_distribution_report(critic, real, real, noise);
    CHECK(same.ks_real_vs_generated.statistic == 0.0);
    CHECK(same.mean_abs_diff == 0.0);

    CHECK_THROWS_AS(score_distribution_report(critic, {}, generated, noise), InvalidInputError);
}
