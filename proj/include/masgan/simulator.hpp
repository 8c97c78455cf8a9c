#pragma once
#include "masgan/marketdata.hpp"
#include "masgan/order_book.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace masgan::sim {

struct OUParams {
    double r_bar = 100.0; // long-run mean, price units
    double kappa = 0.02;  // mean-reversion rate per second
    double sigma = 0.03;  // price units per sqrt-second
    double dt = 1.0;      // step length, seconds
};

// Exact discretization: r = r_bar + exp(-kappa dt) (r_prev - r_bar)
//                         + sigma sqrt((1 - exp(-2 kappa dt)) / (2 kappa)) g
// (kappa = 0 degenerates to sigma sqrt(dt) g).
double ou_step(double r_prev, const OUParams& ou, double gaussian_draw);

// A wake cadence that divides the bar length pins every sampled mid to the
// requote reference and the return series degenerates; 13 s stays out of
// phase with any whole-second bar grid. Quote size is thin enough that noise
// flow moves the touch and a value order walks about two levels.
struct MarketMakerConfig {
    double wake_interval_s = 13.0;
    int levels = 5;
    int64_t size_per_level = 50;
};

struct SimParams {
    int64_t n_noise = 500;     // N
    double value_rate = 1e-13; // lambda, arrival events per nanosecond per value agent
    int n_value = 100;
    MarketMakerConfig mm;
    OUParams ou;
    int64_t session_seconds = 3600;
    double tick_size = 0.01;
    double initial_price = 100.0;
    int64_t value_order_size = 200;
    double value_obs_noise_ticks = 1.0;

    void validate() const; // throws InvalidInputError listing the violated field
};

// -- agent decision rules, exposed for direct testing --

struct ValueDecision {
    Side side;
    int64_t price_ticks; // one tick through the opposite best
};

// No order when observation equals mid. The opposite best falls back to the
// rounded mid when that side is empty.
std::optional<ValueDecision> value_agent_decide(double observation_ticks, double mid_ticks,
                                                std::optional<int64_t> best_bid, std::optional<int64_t> best_ask);

struct QuoteIntent {
    Side side;
    int64_t price_ticks;
    int64_t qty;
};

// `levels` bids at reference-1..reference-levels and asks mirrored above.
std::vector<QuoteIntent> market_maker_quotes(int64_t reference_ticks, const MarketMakerConfig& config);

struct NoiseEvent {
    int64_t ts_ns;
    Side side;
    int64_t qty; // Uniform{50..150}
};

// One wake per agent, uniform over the session, drawn from per-agent streams.
std::vector<NoiseEvent> noise_agent_schedule(int64_t n_noise, int64_t session_ns, uint64_t seed);

// -- full session --

struct TradeRec {
    int64_t ts;
    int64_t price_ticks;
    int64_t qty;
    Side taker_side;
};

struct SimResult {
    md::BarSeries bars;
    std::vector<TradeRec> trades;
};

// Deterministic function of (params, seed): one exchange, one market maker,
// n_value value agents on Poisson wakes, n_noise single-shot noise agents.
// Emits session_seconds / bar_seconds intervals plus the opening snapshot bar.
SimResult run_simulation_full(const SimParams& params, uint64_t seed, int bar_seconds);
md::BarSeries run_simulation(const SimParams& params, uint64_t seed, int bar_seconds);

void export_trades_csv(const std::vector<TradeRec>& trades, const std::string& path);

} // namespace masgan::sim
