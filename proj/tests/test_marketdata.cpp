#include "masgan/marketdata.hpp"

#include "masgan/errors.hpp"
#include "masgan/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace masgan;
using namespace masgan::md;

namespace {

BarSeries make_series(const std::vector<double>& mids, const std::vector<double>& vols, int bar_seconds = 60) {
    BarSeries s;
    s.bar_seconds = bar_seconds;
    s.session_id = "test";
    for (size_t i = 0; i < mids.size(); ++i)
        s.bars.push_back(Bar{static_cast<int64_t>(i), mids[i], i < vols.size() ? vols[i] : 0.0});
    return s;
}

} // namespace

TEST_CASE("returns_from_bars on constant prices") {
    const auto r = returns_from_bars(make_series({100, 100, 100}, {0, 1, 2}));
    REQUIRE(r.size() == 2);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
}

TEST_CASE("returns_from_bars ln(e) = 1") {
    const auto r = returns_from_bars(make_series({100.0, 100.0 * std::exp(1.0)}, {0, 0}));
    REQUIRE(r.size() == 1);
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("returns_from_bars matches independent ln ratio computation") {
    const std::vector<double> mids = {100, 101, 100.5};
    const auto r = returns_from_bars(make_series(mids, {1, 1, 1}));
    REQUIRE(r.size() == 2);
    CHECK(r[0] == doctest::Approx(std::log(101.0 / 100.0)).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(std::log(100.5 / 101.0)).epsilon(1e-15));
}

TEST_CASE("returns are scale invariant") {
    Rng rng(7, 0);
    std::vector<double> mids(50);
    double p = 100.0;
    for (double& m : mids) {
        p *= std::exp(rng.normal(0.0, 0.01));
        m = p;
    }
    std::vector<double> scaled = mids;
    for (double& m : scaled) m *= 37.5;
    const auto r1 = returns_from_bars(make_series(mids, {}));
    const auto r2 = returns_from_bars(make_series(scaled, {}));
    for (size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == doctest::Approx(r2[i]).epsilon(1e-12));
}

TEST_CASE("returns_from_bars rejects short series") {
    BarSeries s = make_series({100.0}, {0});
    CHECK_THROWS_AS(returns_from_bars(s), InvalidInputError);
}

TEST_CASE("fit_normalization degenerate and simple cases") {
    RawWindow zero{{0, 0, 0}, {0, 0, 0}};
    const NormStats floored = fit_normalization({zero, zero});
    CHECK(floored.return_mean == 0.0);
    CHECK(floored.return_std == 1e-8);

    RawWindow pm{{-1.0, 1.0}, {0.5, 0.5}};
    const NormStats simple = fit_normalization({pm, pm});
    CHECK(simple.return_mean == doctest::Approx(0.0));
    CHECK(simple.return_std == doctest::Approx(1.0)); // population convention

    CHECK_THROWS_AS(fit_normalization({}), InvalidInputError);
}

TEST_CASE("fit_normalization matches a two-pass oracle") {
    Rng rng(11, 3);
    std::vector<RawWindow> windows;
    std::vector<double> all_rets, all_vols;
    for (int w = 0; w < 6; ++w) {
        RawWindow rw;
        for (int i = 0; i < 40; ++i) {
            rw.returns.push_back(rng.normal(0.001, 0.02));
            rw.log_volumes.push_back(std::log1p(rng.uniform(0, 5000)));
        }
        all_rets.insert(all_rets.end(), rw.returns.begin(), rw.returns.end());
        all_vols.insert(all_vols.end(), rw.log_volumes.begin(), rw.log_volumes.end());
        windows.push_back(std::move(rw));
    }
    const NormStats norm = fit_normalization(windows);
    CHECK(norm.return_mean == doctest::Approx(oracles::two_pass_mean(all_rets)).epsilon(1e-12));
    CHECK(norm.return_std == doctest::Approx(oracles::two_pass_population_std(all_rets)).epsilon(1e-12));
    CHECK(norm.volume_mean == doctest::Approx(oracles::two_pass_mean(all_vols)).epsilon(1e-12));
    CHECK(norm.volume_std == doctest::Approx(oracles::two_pass_population_std(all_vols)).epsilon(1e-12));
}

TEST_CASE("build_feature_vector shape and zero case") {
    // three bars -> two returns; L=2 with zero-mean unit-std norm
    BarSeries s = make_series({100, 100, 100}, {0, 0, 0});
    NormStats unit{0.0, 1.0, 0.0, 1.0};
    const FeatureVector fv = build_feature_vector(s, unit, 2);
    REQUIRE(fv.values.size() == 4);
    CHECK(fv.window_len == 2);
    for (double v : fv.values) CHECK(v == 0.0);

    CHECK_THROWS_AS(build_feature_vector(s, unit, 3), InvalidInputError);
}

TEST_CASE("build_feature_vector un-normalization round trip") {
    Rng rng(5, 9);
    std::vector<double> mids, vols;
    double p = 250.0;
    for (int i = 0; i < 30; ++i) {
        p *= std::exp(rng.normal(0.0, 0.005));
        mids.push_back(p);
        vols.push_back(std::floor(rng.uniform(0, 9000)));
    }
    BarSeries s = make_series(mids, vols);
    const NormStats norm{0.0002, 0.004, 6.5, 1.2};
    const int L = 12;
    const FeatureVector fv = build_feature_vector(s, norm, L);
    const RawWindow raw = raw_window(s, L);
    for (int i = 0; i < L; ++i) {
        const double ret = fv.values[static_cast<size_t>(i)] * norm.return_std + norm.return_mean;
        CHECK(ret == doctest::Approx(raw.returns[static_cast<size_t>(i)]).epsilon(1e-9));
        const double lv = fv.values[static_cast<size_t>(L + i)] * norm.volume_std + norm.volume_mean;
        CHECK(lv == doctest::Approx(raw.log_volumes[static_cast<size_t>(i)]).epsilon(1e-9));
    }
}

TEST_CASE("dataset normalization re-standardizes the training set") {
    Rng rng(21, 2);
    std::vector<BarSeries> sessions;
    for (int k = 0; k < 8; ++k) {
        std::vector<double> mids, vols;
        double p = 100.0;
        for (int i = 0; i < 25; ++i) {
            p *= std::exp(rng.normal(0.0, 0.01));
            mids.push_back(p);
            vols.push_back(std::floor(rng.uniform(100, 4000)));
        }
        sessions.push_back(make_series(mids, vols));
    }
    const Dataset ds = build_dataset(sessions, 60, 20);
    std::vector<double> ret_half, vol_half;
    for (const auto& fv : ds.vectors) {
        for (int i = 0; i < 20; ++i) ret_half.push_back(fv.values[static_cast<size_t>(i)]);
        for (int i = 20; i < 40; ++i) vol_half.push_back(fv.values[static_cast<size_t>(i)]);
    }
    CHECK(std::fabs(oracles::two_pass_mean(ret_half)) < 1e-6);
    CHECK(std::fabs(oracles::two_pass_population_std(ret_half) - 1.0) < 1e-6);
    CHECK(std::fabs(oracles::two_pass_mean(vol_half)) < 1e-6);
    CHECK(std::fabs(oracles::two_pass_population_std(vol_half) - 1.0) < 1e-6);
}

TEST_CASE("csv ingest happy path and rejects") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "masgan_md_test";
    fs::create_directories(dir);

    const std::string good = (dir / "good.csv").string();
    {
        FILE* f = fopen(good.c_str(), "w");
        fputs("bar_index,mid_price,volume\n0,100.5,10\n1,101,0\n2,100.25,3.5\n", f);
        fclose(f);
    }
    const BarSeries s = ingest_csv(good, 60);
    REQUIRE(s.bars.size() == 3);
    CHECK(s.bars[2].mid_price == 100.25);

    const std::string neg = (dir / "neg.csv").string();
    {
        FILE* f = fopen(neg.c_str(), "w");
        fputs("bar_index,mid_price,volume\n0,100,10\n1,-1,0\n", f);
        fclose(f);
    }
    CHECK_THROWS_WITH_AS(ingest_csv(neg, 60), doctest::Contains(":3"), ParseError);

    const std::string unsorted = (dir / "unsorted.csv").string();
    {
        FILE* f = fopen(unsorted.c_str(), "w");
        fputs("bar_index,mid_price,volume\n1,100,10\n0,101,0\n", f);
        fclose(f);
    }
    CHECK_THROWS_AS(ingest_csv(unsorted, 60), InvalidInputError);
    fs::remove_all(dir);
}

TEST_CASE("export/ingest round trip is bit exact") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "masgan_md_roundtrip";
    fs::create_directories(dir);
    Rng rng(3, 3);
    std::vector<double> mids, vols;
    double p = 100.0;
    for (int i = 0; i < 61; ++i) {
        p *= std::exp(rng.normal(0.0, 0.003));
        mids.push_back(p);
        vols.push_back(std::floor(rng.uniform(0, 100000)));
    }
    const BarSeries original = make_series(mids, vols);
    const std::string path = (dir / "bars.csv").string();
    export_csv(original, path);
    const BarSeries back = ingest_csv(path, original.bar_seconds);
    REQUIRE(back.bars.size() == original.bars.size());
    for (size_t i = 0; i < back.bars.size(); ++i) {
        CHECK(back.bars[i].index == original.bars[i].index);
        CHECK(back.bars[i].mid_price == original.bars[i].mid_price); // exact
        CHECK(back.bars[i].volume == original.bars[i].volume);
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset archive save/load round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "masgan_ds_roundtrip";
    fs::remove_all(dir);
    Rng rng(13, 0);
    std::vector<BarSeries> sessions;
    for (int k = 0; k < 4; ++k) {
        std::vector<double> mids, vols;
        double p = 80.0;
        for (int i = 0; i < 16; ++i) {
            p *= std::exp(rng.normal(0.0, 0.01));
            mids.push_back(p);
            vols.push_back(std::floor(rng.uniform(0, 500)));
        }
        sessions.push_back(make_series(mids, vols));
    }
    const Dataset ds = build_dataset(sessions, 60, 10);
    save_dataset(ds, dir.string(), "test");
    const Dataset back = load_dataset(dir.string());
    REQUIRE(back.vectors.size() == ds.vectors.size());
    CHECK(back.window_len == ds.window_len);
    CHECK(back.norm.return_mean == ds.norm.return_mean);
    CHECK(back.norm.volume_std == ds.norm.volume_std);
    for (size_t i = 0; i < ds.vectors.size(); ++i)
        for (size_t j = 0; j < ds.vectors[i].values.size(); ++j)
            CHECK(back.vectors[i].values[j] == ds.vectors[i].values[j]); // exact through %.17g
    fs::remove_all(dir);
}

TEST_CASE("mixed bar_seconds across sessions is rejected") {
    std::vector<BarSeries> sessions = {make_series({100, 101, 102, 101}, {1, 2, 3, 4}, 60),
                                       make_series({100, 101, 102, 101}, {1, 2, 3, 4}, 30)};
    CHECK_THROWS_AS(build_dataset(sessions, 60, 2), InvalidInputError);
}
