#include "masgan/simulator.hpp"

#include "masgan/errors.hpp"
#include "masgan/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace masgan;
using namespace masgan::sim;

TEST_CASE("ou_step fixed point and half-life") {
    OUParams ou{100.0, 0.1, 0.0, 1.0};
    CHECK(ou_step(100.0, ou, 0.37) == doctest::Approx(100.0));

    OUParams half{100.0, std::log(2.0), 0.0, 1.0}; // kappa*dt = ln 2
    CHECK(ou_step(108.0, half, 0.0) == doctest::Approx(104.0));
}

TEST_CASE("ou stationary variance matches sigma^2 / (2 kappa)") {
    OUParams ou{0.0, 0.1, 0.5, 1.0};
    Rng rng(42, 0);
    double r = 0.0;
    // burn in, then accumulate
    for (int i = 0; i < 10000; ++i) r = ou_step(r, ou, rng.normal());
    double sum = 0.0, sumsq = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) {
        r = ou_step(r, ou, rng.normal());
        sum += r;
        sumsq += r * r;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double target = ou.sigma * ou.sigma / (2.0 * ou.kappa);
    CHECK(std::fabs(var - target) / target < 0.02);
}

TEST_CASE("ou with sigma=0 converges monotonically") {
    OUParams ou{50.0, 0.05, 0.0, 1.0};
    double r = 80.0;
    double prev_gap = std::fabs(r - ou.r_bar);
    for (int i = 0; i < 400; ++i) {
        r = ou_step(r, ou, 123.0); // draw ignored at sigma=0
        const double gap = std::fabs(r - ou.r_bar);
        CHECK(gap <= prev_gap);
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-3);
}

TEST_CASE("kappa=0 degenerates to sigma sqrt(dt)") {
    OUParams ou{0.0, 0.0, 2.0, 0.25};
    CHECK(ou_step(5.0, ou, 1.0) == doctest::Approx(5.0 + 2.0 * 0.5));
}

TEST_CASE("book: resting limit order sets the touch") {
    OrderBook book;
    const auto trades = book.submit(Order{1, 1, Side::Buy, 1000, 100, OrderKind::Limit, 0, 0});
    CHECK(trades.empty());
    REQUIRE(book.best_bid());
    CHECK(*book.best_bid() == 1000);
    CHECK(!book.best_ask());
}

TEST_CASE("book: trades print at the maker price") {
    OrderBook book;
    book.submit(Order{1, 1, Side::Sell, 1000, 100, OrderKind::Limit, 0, 0});
    const auto trades = book.submit(Order{2, 2, Side::Buy, 1001, 100, OrderKind::Limit, 1, 1});
    REQUIRE(trades.size() == 1);
    CHECK(trades[0].price_ticks == 1000);
    CHECK(trades[0].qty == 100);
    CHECK(trades[0].maker_order_id == 1);
    CHECK(trades[0].taker_order_id == 2);
    CHECK(book.resting_order_count() == 0);
}

TEST_CASE("book: FIFO within a price level") {
    OrderBook book;
    book.submit(Order{1, 1, Side::Sell, 1000, 100, OrderKind::Limit, 0, 0});
    book.submit(Order{2, 2, Side::Sell, 1000, 100, OrderKind::Limit, 1, 1});
    const auto trades = book.submit(Order{3, 3, Side::Buy, 0, 100, OrderKind::Market, 2, 2});
    REQUIRE(trades.size() == 1);
    CHECK(trades[0].maker_order_id == 1);
    CHECK(book.resting_qty(Side::Sell, 1000) == 100); // id=2 untouched
}

TEST_CASE("book: market residual is cancelled, limit residual rests") {
    OrderBook book;
    book.submit(Order{1, 1, Side::Sell, 1000, 60, OrderKind::Limit, 0, 0});
    const auto t1 = book.submit(Order{2, 2, Side::Buy, 0, 100, OrderKind::Market, 1, 1});
    REQUIRE(t1.size() == 1);
    CHECK(t1[0].qty == 60);
    CHECK(book.resting_order_count() == 0);

    book.submit(Order{3, 3, Side::Sell, 1005, 50, OrderKind::Limit, 2, 2});
    const auto t2 = book.submit(Order{4, 4, Side::Buy, 1006, 80, OrderKind::Limit, 3, 3});
    REQUIRE(t2.size() == 1);
    CHECK(t2[0].qty == 50);
    REQUIRE(book.best_bid());
    CHECK(*book.best_bid() == 1006);
    CHECK(book.resting_qty(Side::Buy, 1006) == 30);
}

TEST_CASE("book: duplicate order id rejected") {
    OrderBook book;
    book.submit(Order{7, 1, Side::Buy, 900, 10, OrderKind::Limit, 0, 0});
    CHECK_THROWS_AS(book.submit(Order{7, 1, Side::Buy, 901, 10, OrderKind::Limit, 1, 1}), InvalidInputError);
}

TEST_CASE("book: 10k random submissions match the naive matcher") {
    OrderBook book;
    oracles::NaiveBook naive;
    Rng rng(99, 0);
    int64_t conservation_violations = 0;
    for (int i = 0; i < 10'000; ++i) {
        Order o;
        o.id = i + 1;
        o.agent_id = 0;
        o.side = (rng.next_u64() & 1) ? Side::Buy : Side::Sell;
        o.kind = rng.uniform() < 0.25 ? OrderKind::Market : OrderKind::Limit;
        o.price_ticks = rng.uniform_int(980, 1020);
        o.qty = rng.uniform_int(1, 300);
        o.ts = i;
        o.seq = i;
        const auto got = book.submit(o);
        const auto expected = naive.submit(o);
        REQUIRE(got.size() == expected.size());
        int64_t filled = 0;
        for (size_t k = 0; k < got.size(); ++k) {
            CHECK(got[k].price_ticks == expected[k].price_ticks);
            CHECK(got[k].qty == expected[k].qty);
            CHECK(got[k].maker_order_id == expected[k].maker_order_id);
            CHECK(got[k].taker_order_id == expected[k].taker_order_id);
            filled += got[k].qty;
        }
        if (filled > o.qty) ++conservation_violations;
        REQUIRE(!book.crossed());
        REQUIRE(!naive.crossed());
    }
    CHECK(conservation_violations == 0);
}

TEST_CASE("value agent decision rule") {
    CHECK(!value_agent_decide(1000.0, 1000.0, 999, 1001));

    const auto buy = value_agent_decide(1010.0, 1000.0, 999, 1005);
    REQUIRE(buy);
    CHECK(buy->side == Side::Buy);
    CHECK(buy->price_ticks == 1006);

    const auto sell = value_agent_decide(990.0, 1000.0, 995, 1001);
    REQUIRE(sell);
    CHECK(sell->side == Side::Sell);
    CHECK(sell->price_ticks == 994);
}

TEST_CASE("value agent buys and sells equally under symmetric noise") {
    Rng rng(1234, 0);
    int buys = 0, sells = 0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i) {
        const double obs = 1000.0 + rng.normal();
        const auto d = value_agent_decide(obs, 1000.0, 999, 1001);
        if (!d) continue;
        (d->side == Side::Buy ? buys : sells)++;
    }
    const double frac = static_cast<double>(buys) / (buys + sells);
    CHECK(std::fabs(frac - 0.5) < 0.01);
}

TEST_CASE("noise agent schedule is uniform with fair direction") {
    const int64_t session_ns = 3'600'000'000'000LL;
    const auto events = noise_agent_schedule(100'000, session_ns, 7);
    REQUIRE(events.size() == 100'000);

    // KS distance of wake times against uniform
    std::vector<double> times;
    times.reserve(events.size());
    int64_t buys = 0;
    for (const auto& e : events) {
        REQUIRE(e.ts_ns >= 0);
        REQUIRE(e.ts_ns < session_ns);
        REQUIRE(e.qty >= 50);
        REQUIRE(e.qty <= 150);
        times.push_back(static_cast<double>(e.ts_ns) / static_cast<double>(session_ns));
        if (e.side == Side::Buy) ++buys;
    }
    std::sort(times.begin(), times.end());
    double d = 0.0;
    for (size_t i = 0; i < times.size(); ++i) {
        const double f = static_cast<double>(i + 1) / static_cast<double>(times.size());
        d = std::max(d, std::fabs(f - times[i]));
        d = std::max(d, std::fabs(static_cast<double>(i) / static_cast<double>(times.size()) - times[i]));
    }
    CHECK(d < 0.01);
    CHECK(std::fabs(static_cast<double>(buys) / 100'000.0 - 0.5) < 0.01);

    CHECK(noise_agent_schedule(0, session_ns, 7).empty());
}

TEST_CASE("market maker quotes both sides around the reference") {
    MarketMakerConfig cfg{10.0, 1, 100};
    const auto quotes = market_maker_quotes(1000, cfg);
    REQUIRE(quotes.size() == 2);
    CHECK(quotes[0].side == Side::Buy);
    CHECK(quotes[0].price_ticks == 999);
    CHECK(quotes[1].side == Side::Sell);
    CHECK(quotes[1].price_ticks == 1001);

    MarketMakerConfig five{10.0, 5, 100};
    const auto q5 = market_maker_quotes(1000, five);
    CHECK(q5.size() == 10);
    // spread implied by the quotes alone is 2 ticks at the touch
    CHECK(q5[0].price_ticks == 999);
    CHECK(q5[5].price_ticks == 1001);
}

namespace {

SimParams small_params() {
    SimParams p;
    p.n_noise = 200;
    p.value_rate = 1e-13;
    p.n_value = 10;
    p.session_seconds = 600;
    p.ou.r_bar = 100.0;
    p.ou.kappa = 0.01;
    p.ou.sigma = 0.02;
    return p;
}

} // namespace

TEST_CASE("run_simulation: MM only yields zero volume and constant mid") {
    SimParams p = small_params();
    p.n_noise = 0;
    p.n_value = 0;
    const md::BarSeries bars = run_simulation(p, 5, 60);
    REQUIRE(bars.bars.size() == 11); // 600s / 60s intervals + opening snapshot
    for (const auto& b : bars.bars) {
        CHECK(b.volume == 0.0);
        CHECK(b.mid_price == doctest::Approx(100.0));
    }
}

TEST_CASE("run_simulation is deterministic in (v, R)") {
    const SimParams p = small_params();
    const md::BarSeries a = run_simulation(p, 17, 60);
    const md::BarSeries b = run_simulation(p, 17, 60);
    REQUIRE(a.bars.size() == b.bars.size());
    for (size_t i = 0; i < a.bars.size(); ++i) {
        CHECK(a.bars[i].mid_price == b.bars[i].mid_price); // bit identical
        CHECK(a.bars[i].volume == b.bars[i].volume);
    }
    const md::BarSeries c = run_simulation(p, 18, 60);
    bool any_diff = false;
    for (size_t i = 0; i < a.bars.size(); ++i)
        if (a.bars[i].mid_price != c.bars[i].mid_price || a.bars[i].volume != c.bars[i].volume) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("doubling lambda raises mean bar volume across seeds") {
    SimParams p = small_params();
    p.n_noise = 50;
    p.value_rate = 4e-13;
    p.session_seconds = 1800;

    const auto mean_volume = [&](const SimParams& params) {
        double total = 0.0;
        int bars = 0;
        for (uint64_t seed = 1; seed <= 20; ++seed) {
            const md::BarSeries s = run_simulation(params, seed, 60);
            for (const auto& b : s.bars) {
                total += b.volume;
                ++bars;
            }
        }
        return total / bars;
    };

    const double base = mean_volume(p);
    SimParams doubled = p;
    doubled.value_rate = 2.0 * p.value_rate;
    CHECK(mean_volume(doubled) > base);
}

TEST_CASE("noise agent count drives traded volume") {
    SimParams p = small_params();
    const md::BarSeries s = run_simulation(p, 3, 60);
    double volume = 0.0;
    for (const auto& b : s.bars) volume += b.volume;
    // 200 noise agents, mean size 100
    CHECK(volume > 200 * 50);
    CHECK(volume < 200 * 150 + 10 * 100 * 20);
}

TEST_CASE("invalid sim params are rejected with every field named") {
    SimParams p;
    p.value_rate = 0.0;
    p.tick_size = -1.0;
    try {
        p.validate();
        FAIL("expected InvalidInputError");
    } catch (const InvalidInputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("value_rate") != std::string::npos);
        CHECK(msg.find("tick_size") != std::string::npos);
    }
}
