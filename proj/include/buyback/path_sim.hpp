#pragma once

// Price path generation for the continuous toy model (exact lognormal steps
// on a uniform grid) and for the daily contract model.

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace buyback {

inline constexpr double kTradingDaysPerYear = 252.0;

struct GbmSpec {
    double s0 = 10.0;
    double sigma_annual = 0.2;
    double horizon = 1.0 / 12.0;  // years
    int n_steps = 100;

    void validate() const {
        require(std::isfinite(s0) && s0 > 0.0, "GbmSpec: s0 must be > 0");
        require(std::isfinite(sigma_annual) && sigma_annual >= 0.0, "GbmSpec: sigma_annual must be >= 0");
        require(std::isfinite(horizon) && horizon > 0.0, "GbmSpec: horizon must be > 0");
        require(n_steps >= 1, "GbmSpec: n_steps must be >= 1");
    }

    [[nodiscard]] double dt() const { return horizon / n_steps; }
};

struct DailySpec {
    double s0 = 10.0;
    double sigma_daily = 0.2 / std::sqrt(kTradingDaysPerYear);
    int n_days = 60;
    // Off: S_{n+1} = S_n exp(sigma xi). On: exp(-sigma^2/2 + sigma xi), a martingale.
    bool drift_correction = false;

    void validate() const {
        require(std::isfinite(s0) && s0 > 0.0, "DailySpec: s0 must be > 0");
        require(std::isfinite(sigma_daily) && sigma_daily >= 0.0, "DailySpec: sigma_daily must be >= 0");
        require(n_days >= 1, "DailySpec: n_days must be >= 1");
    }

    static double daily_from_annual(double sigma_annual, double days_per_year = kTradingDaysPerYear) {
        require(days_per_year > 0.0, "days_per_year must be > 0");
        return sigma_annual / std::sqrt(days_per_year);
    }
};

/// A simulated trajectory. `running_avg[k]` is the arithmetic mean of
/// `prices[0..k]`; day suspension is handled by the contract engine, not here.
struct PricePath {
    std::vector<double> times;
    std::vector<double> prices;
    std::vector<double> running_avg;

    [[nodiscard]] std::size_t size() const { return prices.size(); }

    void validate() const {
        require(!prices.empty(), "PricePath: empty path");
        require(times.size() == prices.size() && running_avg.size() == prices.size(),
                "PricePath: times/prices/running_avg lengths differ");
        for (std::size_t k = 0; k < prices.size(); ++k) {
            require(prices[k] > 0.0 && std::isfinite(prices[k]), "PricePath: prices must be positive");
            if (k > 0) require(times[k] > times[k - 1], "PricePath: times must be strictly increasing");
        }
    }
};

namespace detail {

inline void fill_running_average(PricePath& path) {
    path.running_avg.resize(path.prices.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < path.prices.size(); ++k) {
        sum += path.prices[k];
        path.running_avg[k] = sum / static_cast<double>(k + 1);
    }
}

}  // namespace detail

/// Builds a path from explicit prices (used for hand-made scenarios and tests).
inline PricePath make_path(std::vector<double> times, std::vector<double> prices) {
    PricePath path;
    path.times = std::move(times);
    path.prices = std::move(prices);
    detail::fill_running_average(path);
    path.validate();
    return path;
}

inline PricePath make_daily_path(std::vector<double> prices) {
    std::vector<double> days(prices.size());
    for (std::size_t k = 0; k < days.size(); ++k) days[k] = static_cast<double>(k);
    return make_path(std::move(days), std::move(prices));
}

inline PricePath simulate_gbm(const GbmSpec& spec, const RngKey& key) {
    spec.validate();
    auto engine = key.engine();
    std::normal_distribution<double> normal(0.0, 1.0);

    const double dt = spec.dt();
    const double drift = -0.5 * spec.sigma_annual * spec.sigma_annual * dt;
    const double vol = spec.sigma_annual * std::sqrt(dt);

    PricePath path;
    const auto nodes = static_cast<std::size_t>(spec.n_steps) + 1;
    path.times.resize(nodes);
    path.prices.resize(nodes);
    path.times[0] = 0.0;
    path.prices[0] = spec.s0;
    double log_s = std::log(spec.s0);
    for (std::size_t k = 1; k < nodes; ++k) {
        log_s += drift + vol * normal(engine);
        path.times[k] = spec.horizon * static_cast<double>(k) / spec.n_steps;
        path.prices[k] = spec.sigma_annual == 0.0 ? spec.s0 : std::exp(log_s);
    }
    detail::fill_running_average(path);
    return path;
}

inline PricePath simulate_daily(const DailySpec& spec, const RngKey& key) {
    spec.validate();
    auto engine = key.engine();
    std::normal_distribution<double> normal(0.0, 1.0);

    const double drift = spec.drift_correction ? -0.5 * spec.sigma_daily * spec.sigma_daily : 0.0;
    const auto nodes = static_cast<std::size_t>(spec.n_days) + 1;

    PricePath path;
    path.times.resize(nodes);
    path.prices.resize(nodes);
    path.times[0] = 0.0;
    path.prices[0] = spec.s0;
    double log_s = std::log(spec.s0);
    for (std::size_t k = 1; k < nodes; ++k) {
        log_s += drift + spec.sigma_daily * normal(engine);
        path.times[k] = static_cast<double>(k);
        path.prices[k] = spec.sigma_daily == 0.0 ? spec.s0 : std::exp(log_s);
    }
    detail::fill_running_average(path);
    return path;
}

/// Y_t = A_t / S_t on every node, with Y at node 0 pinned to 1.
inline std::vector<double> y_process(const PricePath& path) {
    path.validate();
    std::vector<double> y(path.size());
    y[0] = 1.0;
    for (std::size_t k = 1; k < path.size(); ++k) y[k] = path.running_avg[k] / path.prices[k];
    return y;
}

/// A set of Y-trajectories sharing one time grid, stored row-major (path, node).
struct YPathSet {
    std::vector<double> times;
    std::vector<double> values;
    std::size_t n_paths = 0;

    [[nodiscard]] std::size_t n_nodes() const { return times.size(); }
    [[nodiscard]] std::span<const double> path(std::size_t i) const {
        return {values.data() + i * n_nodes(), n_nodes()};
    }
    [[nodiscard]] double at(std::size_t i, std::size_t k) const { return values[i * n_nodes() + k]; }
    [[nodiscard]] double horizon() const { return times.back(); }

    static YPathSet from_rows(std::vector<double> times, const std::vector<std::vector<double>>& rows) {
        YPathSet set;
        set.times = std::move(times);
        set.n_paths = rows.size();
        set.values.reserve(rows.size() * set.times.size());
        for (const auto& row : rows) {
            require(row.size() == set.times.size(), "YPathSet: row length differs from time grid");
            set.values.insert(set.values.end(), row.begin(), row.end());
        }
        return set;
    }
};

inline YPathSet simulate_y_paths(const GbmSpec& spec, std::uint64_t seed, std::size_t n_paths) {
    spec.validate();
    require(n_paths >= 1, "simulate_y_paths: need at least one path");
    YPathSet set;
    set.n_paths = n_paths;
    const auto nodes = static_cast<std::size_t>(spec.n_steps) + 1;
    set.values.resize(n_paths * nodes);
    for (std::size_t i = 0; i < n_paths; ++i) {
        const auto path = simulate_gbm(spec, RngKey{seed, i});
        if (i == 0) set.times = path.times;
        const auto y = y_process(path);
        std::copy(y.begin(), y.end(), set.values.begin() + static_cast<std::ptrdiff_t>(i * nodes));
    }
    return set;
}

}  // namespace buyback
