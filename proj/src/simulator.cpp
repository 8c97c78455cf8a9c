#include "masgan/simulator.hpp"

#include "masgan/errors.hpp"
#include "masgan/io.hpp"
#include "masgan/rng.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace masgan::sim {

namespace {

constexpr int64_t kNsPerSec = 1'000'000'000;

// rng stream id spaces, disjoint by agent type so populations of different
// sizes never perturb each other's draws
constexpr uint64_t kStreamOu = 0;
constexpr uint64_t kStreamValueBase = 10;
constexpr uint64_t kStreamNoiseBase = 1'000'000;

} // namespace

double ou_step(double r_prev, const OUParams& ou, double gaussian_draw) {
    const double decay = std::exp(-ou.kappa * ou.dt);
    double diffusion;
    if (ou.kappa > 0.0)
        diffusion = ou.sigma * std::sqrt((1.0 - std::exp(-2.0 * ou.kappa * ou.dt)) / (2.0 * ou.kappa));
    else
        diffusion = ou.sigma * std::sqrt(ou.dt);
    return ou.r_bar + decay * (r_prev - ou.r_bar) + diffusion * gaussian_draw;
}

void SimParams::validate() const {
    std::vector<std::string> bad;
    if (n_noise < 0) bad.push_back("simulator.n_noise must be >= 0");
    if (!(value_rate > 0.0)) bad.push_back("simulator.value_rate must be > 0");
    if (n_value < 0) bad.push_back("simulator.n_value must be >= 0");
    if (n_value > 999'000) bad.push_back("simulator.n_value must be <= 999000");
    if (!(mm.wake_interval_s > 0.0)) bad.push_back("simulator.mm_wake_interval_s must be > 0");
    if (mm.levels <= 0) bad.push_back("simulator.mm_levels must be > 0");
    if (mm.size_per_level <= 0) bad.push_back("simulator.mm_size_per_level must be > 0");
    if (ou.kappa < 0.0) bad.push_back("simulator.ou_kappa must be >= 0");
    if (ou.sigma < 0.0) bad.push_back("simulator.ou_sigma must be >= 0");
    if (!(ou.dt > 0.0)) bad.push_back("simulator.ou_dt must be > 0");
    if (session_seconds <= 0) bad.push_back("simulator.session_seconds must be > 0");
    if (!(tick_size > 0.0)) bad.push_back("simulator.tick_size must be > 0");
    if (!(initial_price > 0.0)) bad.push_back("simulator.initial_price must be > 0");
    if (value_order_size <= 0) bad.push_back("simulator.value_order_size must be > 0");
    if (value_obs_noise_ticks < 0.0) bad.push_back("simulator.value_obs_noise_ticks must be >= 0");
    if (!bad.empty()) {
        std::string msg = "invalid SimParams:";
        for (const auto& m : bad) msg += "\n  " + m;
        throw InvalidInputError(msg);
    }
}

std::optional<ValueDecision> value_agent_decide(double observation_ticks, double mid_ticks,
                                                std::optional<int64_t> best_bid, std::optional<int64_t> best_ask) {
    if (observation_ticks > mid_ticks) {
        const int64_t through = best_ask ? *best_ask + 1 : static_cast<int64_t>(std::llround(mid_ticks)) + 1;
        return ValueDecision{Side::Buy, through};
    }
    if (observation_ticks < mid_ticks) {
        const int64_t through = best_bid ? *best_bid - 1 : static_cast<int64_t>(std::llround(mid_ticks)) - 1;
        return ValueDecision{Side::Sell, through};
    }
    return std::nullopt;
}

std::vector<QuoteIntent> market_maker_quotes(int64_t reference_ticks, const MarketMakerConfig& config) {
    std::vector<QuoteIntent> quotes;
    quotes.reserve(2 * static_cast<size_t>(config.levels));
    for (int d = 1; d <= config.levels; ++d)
        quotes.push_back(QuoteIntent{Side::Buy, reference_ticks - d, config.size_per_level});
    for (int d = 1; d <= config.levels; ++d)
        quotes.push_back(QuoteIntent{Side::Sell, reference_ticks + d, config.size_per_level});
    return quotes;
}

std::vector<NoiseEvent> noise_agent_schedule(int64_t n_noise, int64_t session_ns, uint64_t seed) {
    if (n_noise < 0) throw InvalidInputError("n_noise must be >= 0");
    std::vector<NoiseEvent> events;
    events.reserve(static_cast<size_t>(n_noise));
    for (int64_t i = 0; i < n_noise; ++i) {
        Rng rng(seed, kStreamNoiseBase + static_cast<uint64_t>(i));
        NoiseEvent ev;
        ev.ts_ns = rng.uniform_int(0, session_ns - 1);
        ev.side = (rng.next_u64() & 1) ? Side::Buy : Side::Sell;
        ev.qty = rng.uniform_int(50, 150);
        events.push_back(ev);
    }
    return events;
}

namespace {

enum class EventKind : uint8_t { MmWake, ValueWake, NoiseWake };

struct Event {
    int64_t ts;
    int64_t seq;
    EventKind kind;
    int32_t agent_index; // value/noise agent ordinal

    bool operator>(const Event& other) const {
        if (ts != other.ts) return ts > other.ts;
        return seq > other.seq;
    }
};

// Lazily advanced discrete-time OU fundamental; one gaussian per dt step.
class Fundamental {
public:
    Fundamental(const OUParams& ou, double r0, uint64_t seed) : ou_(ou), r_(r0), rng_(seed, kStreamOu) {}

    double at(int64_t ts_ns) {
        const int64_t target = static_cast<int64_t>(static_cast<double>(ts_ns) / (ou_.dt * kNsPerSec));
        while (step_ < target) {
            r_ = ou_step(r_, ou_, rng_.normal());
            ++step_;
        }
        return r_;
    }

private:
    OUParams ou_;
    double r_;
    int64_t step_ = 0;
    Rng rng_;
};

} // namespace

SimResult run_simulation_full(const SimParams& params, uint64_t seed, int bar_seconds) {
    params.validate();
    if (bar_seconds <= 0) throw InvalidInputError("bar_seconds must be > 0");

    const int64_t session_ns = params.session_seconds * kNsPerSec;
    const int64_t bar_ns = static_cast<int64_t>(bar_seconds) * kNsPerSec;
    const int64_t n_intervals = params.session_seconds / bar_seconds;
    const double tick = params.tick_size;

    OrderBook book;
    Fundamental fundamental(params.ou, params.initial_price, seed);
    std::vector<Rng> value_rng;
    value_rng.reserve(static_cast<size_t>(params.n_value));
    for (int i = 0; i < params.n_value; ++i)
        value_rng.emplace_back(seed, kStreamValueBase + static_cast<uint64_t>(i));

    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue;
    int64_t next_seq = 0;
    const auto schedule = [&](int64_t ts, EventKind kind, int32_t index) {
        if (ts > session_ns) return; // wakes past the close are dropped
        queue.push(Event{ts, next_seq++, kind, index});
    };

    // market maker first, then value agents, then the single-shot noise agents
    schedule(0, EventKind::MmWake, 0);
    for (int i = 0; i < params.n_value; ++i) {
        const double gap = value_rng[static_cast<size_t>(i)].exponential(params.value_rate);
        schedule(std::max<int64_t>(1, static_cast<int64_t>(std::llround(gap))), EventKind::ValueWake, i);
    }
    const std::vector<NoiseEvent> noise = noise_agent_schedule(params.n_noise, session_ns, seed);
    for (size_t j = 0; j < noise.size(); ++j)
        schedule(noise[j].ts_ns, EventKind::NoiseWake, static_cast<int32_t>(j));

    SimResult result;
    result.bars.bar_seconds = bar_seconds;
    result.bars.seed = seed;
    result.bars.session_id = "sim-" + std::to_string(seed);
    {
        std::ostringstream ref;
        ref << "N=" << params.n_noise << ",lambda=" << fmt_double(params.value_rate);
        result.bars.params_ref = ref.str();
    }

    double last_mid_ticks = params.initial_price / tick;
    int64_t next_order_id = 1;
    int64_t next_bar = 0;
    double bar_volume = 0.0;

    const auto close_bars_before = [&](int64_t ts) {
        while (next_bar <= n_intervals && next_bar * bar_ns < ts) {
            result.bars.bars.push_back(md::Bar{next_bar, last_mid_ticks * tick, bar_volume});
            bar_volume = 0.0;
            ++next_bar;
        }
    };

    const auto apply_trades = [&](const std::vector<Trade>& trades, Side taker_side) {
        for (const Trade& t : trades) {
            bar_volume += static_cast<double>(t.qty);
            result.trades.push_back(TradeRec{t.ts, t.price_ticks, t.qty, taker_side});
        }
    };

    std::vector<int64_t> mm_quote_ids;

    while (!queue.empty()) {
        const Event ev = queue.top();
        queue.pop();
        close_bars_before(ev.ts);

        switch (ev.kind) {
        case EventKind::MmWake: {
            for (int64_t id : mm_quote_ids) book.cancel(id);
            mm_quote_ids.clear();
            const auto mid = book.mid_ticks();
            const int64_t reference =
                mid ? static_cast<int64_t>(std::llround(*mid)) : static_cast<int64_t>(std::llround(params.ou.r_bar / tick));
            for (const QuoteIntent& q : market_maker_quotes(reference, params.mm)) {
                Order order{next_order_id++, 1, q.side, q.price_ticks, q.qty, OrderKind::Limit, ev.ts, ev.seq};
                apply_trades(book.submit(order), q.side);
                mm_quote_ids.push_back(order.id);
            }
            schedule(ev.ts + static_cast<int64_t>(std::llround(params.mm.wake_interval_s * kNsPerSec)),
                     EventKind::MmWake, 0);
            break;
        }
        case EventKind::ValueWake: {
            Rng& rng = value_rng[static_cast<size_t>(ev.agent_index)];
            const double fundamental_ticks = fundamental.at(ev.ts) / tick;
            const double obs_ticks = fundamental_ticks + params.value_obs_noise_ticks * rng.normal();
            const auto mid = book.mid_ticks();
            const double mid_ticks = mid ? *mid : last_mid_ticks;
            const auto decision = value_agent_decide(obs_ticks, mid_ticks, book.best_bid(), book.best_ask());
            if (decision) {
                Order order{next_order_id++, 10 + ev.agent_index, decision->side, decision->price_ticks,
                            params.value_order_size, OrderKind::Limit, ev.ts, ev.seq};
                apply_trades(book.submit(order), decision->side);
            }
            const double gap = rng.exponential(params.value_rate);
            schedule(ev.ts + std::max<int64_t>(1, static_cast<int64_t>(std::llround(gap))), EventKind::ValueWake,
                     ev.agent_index);
            break;
        }
        case EventKind::NoiseWake: {
            const NoiseEvent& n = noise[static_cast<size_t>(ev.agent_index)];
            Order order{next_order_id++, 1'000'000 + ev.agent_index, n.side, 0, n.qty, OrderKind::Market, ev.ts,
                        ev.seq};
            apply_trades(book.submit(order), n.side);
            break;
        }
        }

        const auto mid = book.mid_ticks();
        if (mid) last_mid_ticks = *mid;
    }

    // close any bars left after the final event, through the session end
    close_bars_before(session_ns + 1);

    result.bars.validate();
    return result;
}

md::BarSeries run_simulation(const SimParams& params, uint64_t seed, int bar_seconds) {
    return run_simulation_full(params, seed, bar_seconds).bars;
}

void export_trades_csv(const std::vector<TradeRec>& trades, const std::string& path) {
    std::string out = "ts,price_ticks,qty,taker_side\n";
    for (const TradeRec& t : trades)
        out += std::to_string(t.ts) + "," + std::to_string(t.price_ticks) + "," + std::to_string(t.qty) + "," +
               (t.taker_side == Side::Buy ? "B" : "S") + "\n";
    write_file_atomic(path, out);
}

} // namespace masgan::sim
