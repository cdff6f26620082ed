#pragma once

#include <vector>

#include "contract.hpp"
#include "path_sim.hpp"
#include "policies.hpp"

namespace buyback {

enum class StopCheck { AfterTrade, BeforeTrade };

struct EpisodeOptions {
    StopCheck stop_check = StopCheck::AfterTrade;
    std::vector<DayRecord>* trace = nullptr;
};

struct EpisodeResult {
    double payoff = 0.0;
    int stop_day = 0;
    double q = 0.0;
    double x = 0.0;
    double topup_shares = 0.0;
};

/// Runs one contract along `prices` (day 0 .. at least n_max) under `policy`.
inline EpisodeResult run_episode(const PolicyParams& policy, const ContractSpec& spec,
                                 std::span<const double> prices, const EpisodeOptions& opts = {}) {
    require(prices.size() > static_cast<std::size_t>(spec.n_max), "run_episode: path shorter than n_max + 1 days");
    ContractState state = new_state(spec, prices[0]);

    auto log_day = [&](const ContractState& s, double price, double requested, const char* event) {
        if (!opts.trace) return;
        DayRecord r;
        r.day = s.n;
        r.price = price;
        r.suspended = spec.suspended(price);
        r.requested = requested;
        r.executed = s.bought_today;
        r.clipped = s.clipped_today;
        r.q = s.q;
        r.x = s.x;
        r.average = s.has_average() ? s.average() : 0.0;
        r.maturity = maturity(s, spec);
        r.min_notional = reduced_min_notional(s, spec);
        r.event = event;
        opts.trace->push_back(std::move(r));
    };

    auto finish = [&](const ContractState& s, double price, double requested) {
        const Settlement done = settle(s, spec, price);
        log_day(done.state, price, requested, "settle");
        return EpisodeResult{done.payoff, done.state.n, done.state.q, done.state.x, done.topup_shares};
    };

    for (;;) {
        const double price = prices[static_cast<std::size_t>(state.n)];
        if (must_stop(state, spec)) return finish(state, price, decide_volume(policy, state, spec, price));

        const bool check_first = opts.stop_check == StopCheck::BeforeTrade;
        if (check_first && may_stop(state, spec) && decide_stop(policy, state, spec, price))
            return finish(state, price, 0.0);

        const double requested = decide_volume(policy, state, spec, price);
        state = trade(std::move(state), spec, price, requested);

        if (!check_first && may_stop(state, spec) && decide_stop(policy, state, spec, price))
            return finish(state, price, requested);

        log_day(state, price, requested, "");
        state = advance(std::move(state), spec, prices[static_cast<std::size_t>(state.n) + 1]);
    }
}

}  // namespace buyback
