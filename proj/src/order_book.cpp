#include "masgan/order_book.hpp"

#include "masgan/errors.hpp"

#include <algorithm>

namespace masgan::sim {

namespace {

inline bool price_crosses(Side incoming_side, int64_t limit_price, int64_t level_price, OrderKind kind) {
    if (kind == OrderKind::Market) return true;
    return incoming_side == Side::Buy ? level_price <= limit_price : level_price >= limit_price;
}

} // namespace

template <typename Book>
int64_t OrderBook::match_against(Book& book, const Order& incoming, int64_t remaining, std::vector<Trade>& trades) {
    while (remaining > 0 && !book.empty()) {
        auto level = book.begin();
        if (!price_crosses(incoming.side, incoming.price_ticks, level->first, incoming.kind)) break;
        auto& queue = level->second;
        while (remaining > 0 && !queue.empty()) {
            Resting& maker = queue.front();
            const int64_t fill = std::min(remaining, maker.qty);
            trades.push_back(Trade{level->first, fill, maker.id, incoming.id, incoming.ts});
            maker.qty -= fill;
            remaining -= fill;
            if (maker.qty == 0) {
                location_.erase(maker.id);
                queue.pop_front();
            }
        }
        if (queue.empty()) book.erase(level);
    }
    return remaining;
}

std::vector<Trade> OrderBook::submit(const Order& order) {
    if (order.qty <= 0) throw InvalidInputError("order qty must be positive");
    if (!seen_ids_.insert(order.id).second)
        throw InvalidInputError("duplicate order id " + std::to_string(order.id));

    std::vector<Trade> trades;
    int64_t remaining = order.qty;
    if (order.side == Side::Buy)
        remaining = match_against(asks_, order, remaining, trades);
    else
        remaining = match_against(bids_, order, remaining, trades);

    if (remaining > 0 && order.kind == OrderKind::Limit) {
        const Resting rest{order.id, order.agent_id, remaining, order.ts, order.seq};
        if (order.side == Side::Buy)
            bids_[order.price_ticks].push_back(rest);
        else
            asks_[order.price_ticks].push_back(rest);
        location_.emplace(order.id, std::make_pair(order.side, order.price_ticks));
    }
    return trades;
}

bool OrderBook::cancel(int64_t order_id) {
    const auto it = location_.find(order_id);
    if (it == location_.end()) return false;
    const auto [side, price] = it->second;
    const auto scrub = [&](auto& book) {
        auto level = book.find(price);
        auto& queue = level->second;
        queue.erase(std::find_if(queue.begin(), queue.end(), [&](const Resting& r) { return r.id == order_id; }));
        if (queue.empty()) book.erase(level);
    };
    if (side == Side::Buy)
        scrub(bids_);
    else
        scrub(asks_);
    location_.erase(it);
    return true;
}

std::optional<int64_t> OrderBook::best_bid() const {
    if (bids_.empty()) return std::nullopt;
    return bids_.begin()->first;
}

std::optional<int64_t> OrderBook::best_ask() const {
    if (asks_.empty()) return std::nullopt;
    return asks_.begin()->first;
}

std::optional<double> OrderBook::mid_ticks() const {
    const auto bid = best_bid();
    const auto ask = best_ask();
    if (bid && ask) return (static_cast<double>(*bid) + static_cast<double>(*ask)) / 2.0;
    if (bid) return static_cast<double>(*bid) + kDefaultSpreadTicks / 2.0;
    if (ask) return static_cast<double>(*ask) - kDefaultSpreadTicks / 2.0;
    return std::nullopt;
}

bool OrderBook::crossed() const {
    const auto bid = best_bid();
    const auto ask = best_ask();
    return bid && ask && *bid >= *ask;
}

int64_t OrderBook::resting_qty(Side side, int64_t price_ticks) const {
    int64_t total = 0;
    if (side == Side::Buy) {
        const auto it = bids_.find(price_ticks);
        if (it != bids_.end())
            for (const auto& r : it->second) total += r.qty;
    } else {
        const auto it = asks_.find(price_ticks);
        if (it != asks_.end())
            for (const auto& r : it->second) total += r.qty;
    }
    return total;
}

size_t OrderBook::resting_order_count() const { return location_.size(); }

} // namespace masgan::sim
