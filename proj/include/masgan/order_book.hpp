#pragma once
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace masgan::sim {

enum class Side : uint8_t { Buy, Sell };
enum class OrderKind : uint8_t { Limit, Market };

struct Order {
    int64_t id = 0;
    int64_t agent_id = 0;
    Side side = Side::Buy;
    int64_t price_ticks = 0; // ignored for market orders
    int64_t qty = 0;
    OrderKind kind = OrderKind::Limit;
    int64_t ts = 0; // nanoseconds
    int64_t seq = 0;
};

struct Trade {
    int64_t price_ticks = 0; // resting (maker) order's price
    int64_t qty = 0;
    int64_t maker_order_id = 0;
    int64_t taker_order_id = 0;
    int64_t ts = 0;
};

// Price-then-FIFO book. Internal prices are integer ticks so matching is
// exact; within a level, resting orders keep (ts, seq) arrival order.
class OrderBook {
public:
    // Matches the marketable part of `order` and rests any limit residual.
    // Market residual is cancelled. Returns trades in execution order.
    std::vector<Trade> submit(const Order& order);

    // Removes a resting order; returns false if unknown (already filled).
    bool cancel(int64_t order_id);

    std::optional<int64_t> best_bid() const;
    std::optional<int64_t> best_ask() const;

    // Mid in ticks; one-sided books quote best -/+ half the default spread,
    // an empty book has no mid.
    std::optional<double> mid_ticks() const;

    bool crossed() const; // true iff best_bid >= best_ask with both present

    int64_t resting_qty(Side side, int64_t price_ticks) const;
    size_t resting_order_count() const;

    static constexpr int64_t kDefaultSpreadTicks = 2;

private:
    struct Resting {
        int64_t id;
        int64_t agent_id;
        int64_t qty;
        int64_t ts;
        int64_t seq;
    };

    using BidMap = std::map<int64_t, std::deque<Resting>, std::greater<int64_t>>;
    using AskMap = std::map<int64_t, std::deque<Resting>>;

    template <typename Book>
    int64_t match_against(Book& book, const Order& incoming, int64_t remaining, std::vector<Trade>& trades);

    BidMap bids_;
    AskMap asks_;
    std::unordered_map<int64_t, std::pair<Side, int64_t>> location_; // id -> (side, price)
    std::unordered_set<int64_t> seen_ids_;
};

} // namespace masgan::sim
