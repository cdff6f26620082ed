#pragma once

// Daily state machine of a buyback contract with floating maturity, floating
// notional, daily volume bounds and price-cap day suspension.
//
// Day n is "processed" once its price has entered the averaging bookkeeping.
// A typical day reads: trade(state, S_n, v) -> optional settle(state, S_n) ->
// advance(state, S_{n+1}). step() combines trade and advance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"

namespace buyback {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ContractSpec {
    int n_min = 60;
    int n_max = 60;
    double f_min = 200e6;
    double f_max = 200e6;
    int n_ex = 40;
    double v_min = 0.0;
    double v_max = kInf;  // shares per day
    double s_max = kInf;  // days with S_n > s_max are suspended
    bool allow_trading_on_suspended_days = true;

    void validate() const {
        require(n_min >= 1 && n_min <= n_max, "ContractSpec: need 1 <= n_min <= n_max");
        require(std::isfinite(f_min) && f_min > 0.0, "ContractSpec: f_min must be > 0");
        require(f_max >= f_min && !std::isnan(f_max), "ContractSpec: need f_min <= f_max");
        require(n_ex >= 0 && n_ex <= n_min, "ContractSpec: need 0 <= n_ex <= n_min");
        require(std::isfinite(v_min) && v_min >= 0.0 && v_min < v_max, "ContractSpec: need 0 <= v_min < v_max");
        require(s_max > 0.0 && !std::isnan(s_max), "ContractSpec: s_max must be > 0");
    }

    [[nodiscard]] double f_bar() const { return 0.5 * (f_min + f_max); }
    [[nodiscard]] bool suspended(double price) const { return price > s_max; }
};

struct ContractState {
    int n = 0;
    double q = 0.0;           // shares delivered
    double x = 0.0;           // cash spent
    double sum_active = 0.0;  // sum of prices over non-suspended days
    int p_count = 0;          // number of non-suspended days
    int c = 0;                // number of suspended days
    double bought_today = 0.0;
    bool traded_today = false;
    bool clipped_today = false;
    bool stopped = false;
    std::optional<int> stop_day;

    [[nodiscard]] bool has_average() const { return p_count > 0; }

    [[nodiscard]] double average() const {
        if (p_count == 0) throw UsageError("ContractState: average undefined before the first non-suspended day");
        return sum_active / p_count;
    }
};

/// T_n = min(n_min + C_n, n_max).
inline int maturity(const ContractState& s, const ContractSpec& spec) {
    return std::min(spec.n_min + s.c, spec.n_max);
}

/// F_min,n = F_min (1 - max(C_n - (n_max - n_min), 0) / n_max), floored at 0.
inline double reduced_min_notional(const ContractState& s, const ContractSpec& spec) {
    const int excess = std::max(s.c - (spec.n_max - spec.n_min), 0);
    return std::max(0.0, spec.f_min * (1.0 - static_cast<double>(excess) / spec.n_max));
}

namespace detail {

inline void record_day(ContractState& s, const ContractSpec& spec, double price) {
    require(std::isfinite(price) && price > 0.0, "contract: prices must be positive and finite");
    if (spec.suspended(price)) {
        ++s.c;
    } else {
        s.sum_active += price;
        ++s.p_count;
    }
}

// Largest volume purchasable today at `price` given the daily cap and cash room.
inline double volume_room(const ContractState& s, const ContractSpec& spec, double price) {
    const double cash_room = std::max(spec.f_max - s.x, 0.0) / price;
    return std::max(0.0, std::min(spec.v_max - s.bought_today, cash_room));
}

inline void execute(ContractState& s, const ContractSpec& spec, double price, double volume) {
    if (volume <= 0.0) return;
    s.q += volume;
    s.x += volume * price;
    if (s.x > spec.f_max) s.x = spec.f_max;  // cash cap binding, absorb rounding
    s.bought_today += volume;
}

}  // namespace detail

inline ContractState new_state(const ContractSpec& spec, double s0) {
    spec.validate();
    require(s0 > 0.0 && std::isfinite(s0), "new_state: s0 must be > 0");
    ContractState s;
    detail::record_day(s, spec, s0);
    return s;
}

/// Executes today's order at `price`. The request is clipped to the volume
/// bounds and to the remaining cash room below f_max; clipping is never an error.
inline ContractState trade(ContractState s, const ContractSpec& spec, double price, double requested) {
    if (s.stopped) throw UsageError("trade: contract already stopped");
    if (s.n >= maturity(s, spec)) throw UsageError("trade: no trading on or after the maturity day");
    if (s.traded_today) throw UsageError("trade: already traded on day " + std::to_string(s.n));
    require(std::isfinite(price) && price > 0.0, "trade: price must be positive");

    double volume = 0.0;
    if (spec.allow_trading_on_suspended_days || !spec.suspended(price)) {
        const double room = detail::volume_room(s, spec, price);
        const double floor = std::min(spec.v_min, room);
        volume = std::isnan(requested) ? floor : std::clamp(requested, floor, room);
        s.clipped_today = !std::isnan(requested) && volume != requested;
    } else {
        s.clipped_today = requested != 0.0;
    }
    detail::execute(s, spec, price, volume);
    s.traded_today = true;
    return s;
}

/// Moves to day n+1 and records its price for averaging and suspension.
inline ContractState advance(ContractState s, const ContractSpec& spec, double next_price) {
    if (s.stopped) throw UsageError("advance: contract already stopped");
    if (s.n >= maturity(s, spec)) throw UsageError("advance: contract is at maturity and must settle");
    ++s.n;
    s.bought_today = 0.0;
    s.traded_today = false;
    s.clipped_today = false;
    detail::record_day(s, spec, next_price);
    return s;
}

inline ContractState step(ContractState s, const ContractSpec& spec, double price, double requested,
                          double next_price) {
    return advance(trade(std::move(s), spec, price, requested), spec, next_price);
}

/// Inside the exercise window and with a defined average.
inline bool may_stop(const ContractState& s, const ContractSpec& spec) {
    return !s.stopped && s.has_average() && s.n >= spec.n_ex && s.n <= maturity(s, spec);
}

inline bool must_stop(const ContractState& s, const ContractSpec& spec) {
    return !s.stopped && s.n == maturity(s, spec);
}

struct Settlement {
    ContractState state;
    double payoff = 0.0;
    double topup_shares = 0.0;
    double min_notional = 0.0;  // F_min,tau used in the payoff
};

/// Tops up towards F_min,tau (bounded by the daily volume left and the cash room),
/// then pays q A - max(F_min,tau, X).
inline Settlement settle(ContractState s, const ContractSpec& spec, double price) {
    if (s.stopped) throw UsageError("settle: contract already stopped");
    if (s.n < spec.n_ex) throw UsageError("settle: day " + std::to_string(s.n) + " is before the exercise window");
    if (s.n > maturity(s, spec)) throw UsageError("settle: past maturity");
    if (!s.has_average()) throw UsageError("settle: average undefined, no non-suspended day yet");
    require(std::isfinite(price) && price > 0.0, "settle: price must be positive");

    Settlement out;
    out.min_notional = reduced_min_notional(s, spec);
    if (s.x < out.min_notional && (spec.allow_trading_on_suspended_days || !spec.suspended(price))) {
        const double needed = (out.min_notional - s.x) / price;
        const double room = detail::volume_room(s, spec, price);
        if (needed <= room) {
            s.q += needed;
            s.bought_today += needed;
            s.x = out.min_notional;
            out.topup_shares = needed;
        } else {
            detail::execute(s, spec, price, room);
            out.topup_shares = room;
        }
    }
    out.payoff = s.q * s.average() - std::max(out.min_notional, s.x);
    s.stopped = true;
    s.stop_day = s.n;
    out.state = s;
    return out;
}

/// PnL in basis points of the contractual minimum notional.
inline double pnl_bp(double payoff, const ContractSpec& spec) { return payoff / spec.f_min * 1e4; }

// ---------------------------------------------------------------------------
// Per-day audit trace

struct DayRecord {
    int day = 0;
    double price = 0.0;
    bool suspended = false;
    double requested = 0.0;
    double executed = 0.0;
    bool clipped = false;
    double q = 0.0;
    double x = 0.0;
    double average = 0.0;
    int maturity = 0;
    double min_notional = 0.0;
    std::string event;  // "", "stop", "settle"
};

// Columns: day,price,suspended,requested,executed,clipped,q,x,average,maturity,min_notional,event
inline void write_trace_csv(std::ostream& out, const std::vector<DayRecord>& trace) {
    out << "day,price,suspended,requested,executed,clipped,q,x,average,maturity,min_notional,event\n";
    for (const auto& r : trace) {
        out << r.day << ',' << format_double(r.price) << ',' << (r.suspended ? 1 : 0) << ','
            << format_double(r.requested) << ',' << format_double(r.executed) << ',' << (r.clipped ? 1 : 0)
            << ',' << format_double(r.q) << ',' << format_double(r.x) << ',' << format_double(r.average) << ','
            << r.maturity << ',' << format_double(r.min_notional) << ',' << r.event << '\n';
    }
}

}  // namespace buyback
