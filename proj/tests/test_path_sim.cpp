#include <buyback/path_sim.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace buyback;

namespace {

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

Moments moments(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / (n - 1) / n)};
}

}  // namespace

TEST(GbmSim, ZeroVolatilityIsConstant) {
    GbmSpec spec{10.0, 0.0, 1.0 / 12.0, 100};
    const auto p = simulate_gbm(spec, RngKey{1, 0});
    ASSERT_EQ(p.size(), 101u);
    for (std::size_t k = 0; k < p.size(); ++k) {
        EXPECT_EQ(p.prices[k], 10.0);
        EXPECT_EQ(p.running_avg[k], 10.0);
    }
    EXPECT_DOUBLE_EQ(p.times.back(), 1.0 / 12.0);
}

TEST(GbmSim, TerminalMeanIsMartingale) {
    GbmSpec spec;
    std::vector<double> terminal;
    for (std::uint64_t i = 0; i < 10000; ++i) terminal.push_back(simulate_gbm(spec, RngKey{7, i}).prices.back());
    const auto m = moments(terminal);
    EXPECT_LT(std::abs(m.mean - 10.0), 3.0 * m.se) << "mean " << m.mean << " se " << m.se;
}

TEST(GbmSim, LogReturnVarianceMatchesSigmaSquaredDt) {
    GbmSpec spec;
    std::vector<double> r;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const auto p = simulate_gbm(spec, RngKey{8, i});
        for (std::size_t k = 1; k < p.size(); ++k) r.push_back(std::log(p.prices[k] / p.prices[k - 1]));
    }
    const double n = static_cast<double>(r.size());
    const double m = std::accumulate(r.begin(), r.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : r) ss += (x - m) * (x - m);
    const double var = ss / (n - 1);
    const double expected = 0.04 / (12.0 * 100.0);
    const double se = expected * std::sqrt(2.0 / (n - 1));
    EXPECT_LT(std::abs(var - expected), 3.0 * se);
}

TEST(GbmSim, SameKeyIsBitIdentical) {
    GbmSpec spec;
    const auto a = simulate_gbm(spec, RngKey{42, 3});
    const auto b = simulate_gbm(spec, RngKey{42, 3});
    const auto c = simulate_gbm(spec, RngKey{42, 4});
    EXPECT_EQ(a.prices, b.prices);
    EXPECT_EQ(a.running_avg, b.running_avg);
    EXPECT_NE(a.prices, c.prices);
}

TEST(GbmSim, RejectsInvalidSpec) {
    EXPECT_THROW(simulate_gbm(GbmSpec{0.0, 0.2, 1.0, 10}, RngKey{}), ValidationError);
    EXPECT_THROW(simulate_gbm(GbmSpec{10.0, 0.2, -1.0, 10}, RngKey{}), ValidationError);
    EXPECT_THROW(simulate_gbm(GbmSpec{10.0, -0.1, 1.0, 10}, RngKey{}), ValidationError);
    EXPECT_THROW(simulate_gbm(GbmSpec{10.0, 0.2, 1.0, 0}, RngKey{}), ValidationError);
}

TEST(DailySim, ZeroVolatilityIsConstant) {
    DailySpec spec{10.0, 0.0, 60, false};
    const auto p = simulate_daily(spec, RngKey{1, 0});
    ASSERT_EQ(p.size(), 61u);
    for (double s : p.prices) EXPECT_EQ(s, 10.0);
}

TEST(DailySim, CorrectedDynamicsAreMartingale) {
    DailySpec spec;
    spec.drift_correction = true;
    std::vector<double> terminal;
    for (std::uint64_t i = 0; i < 10000; ++i) terminal.push_back(simulate_daily(spec, RngKey{9, i}).prices.back());
    const auto m = moments(terminal);
    EXPECT_LT(std::abs(m.mean - 10.0), 3.0 * m.se);
}

TEST(DailySim, LiteralDynamicsDriftUpByLognormalMoment) {
    DailySpec spec{10.0, 0.0126, 60, false};
    std::vector<double> ratio;
    for (std::uint64_t i = 0; i < 10000; ++i) ratio.push_back(simulate_daily(spec, RngKey{10, i}).prices.back() / 10.0);
    const auto m = moments(ratio);
    const double expected = std::exp(60.0 * 0.0126 * 0.0126 / 2.0);
    EXPECT_LT(std::abs(m.mean - expected), 3.0 * m.se);
}

TEST(DailySim, AnnualToDailyConversion) {
    EXPECT_DOUBLE_EQ(DailySpec::daily_from_annual(0.2), 0.2 / std::sqrt(252.0));
    EXPECT_DOUBLE_EQ(DailySpec{}.sigma_daily, 0.2 / std::sqrt(252.0));
    EXPECT_THROW(DailySpec::daily_from_annual(0.2, 0.0), ValidationError);
}

TEST(PathInvariants, PositivityAndTelescopingAverage) {
    DailySpec spec;
    spec.sigma_daily = 0.05;
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto p = simulate_daily(spec, RngKey{11, i});
        for (std::size_t k = 0; k < p.size(); ++k) {
            ASSERT_GT(p.prices[k], 0.0);
            if (k == 0) continue;
            const double lhs = p.running_avg[k] * static_cast<double>(k + 1) - p.running_avg[k - 1] * static_cast<double>(k);
            ASSERT_NEAR(lhs, p.prices[k], 1e-9 * p.prices[k] * static_cast<double>(k + 1));
            ASSERT_GT(p.times[k], p.times[k - 1]);
        }
    }
}

TEST(YProcess, ConstantPathIsOne) {
    const auto y = y_process(make_daily_path(std::vector<double>(30, 12.5)));
    for (double v : y) EXPECT_EQ(v, 1.0);
}

TEST(YProcess, TwoNodeExample) {
    const auto y = y_process(make_daily_path({10.0, 20.0}));
    EXPECT_EQ(y[0], 1.0);
    EXPECT_DOUBLE_EQ(y[1], 0.75);
}

TEST(YProcess, RisingPathsStayBelowOne) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> step(1e-4, 0.05);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> prices{10.0};
        for (int k = 0; k < 40; ++k) prices.push_back(prices.back() * (1.0 + step(rng)));
        const auto y = y_process(make_daily_path(prices));
        EXPECT_EQ(y[0], 1.0);
        for (std::size_t k = 1; k < y.size(); ++k) ASSERT_LT(y[k], 1.0);
    }
}

TEST(YPaths, SetMatchesPerPathSimulation) {
    GbmSpec spec;
    const auto set = simulate_y_paths(spec, 77, 5);
    ASSERT_EQ(set.n_paths, 5u);
    ASSERT_EQ(set.n_nodes(), 101u);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto y = y_process(simulate_gbm(spec, RngKey{77, i}));
        for (std::size_t k = 0; k < y.size(); ++k) EXPECT_EQ(set.at(i, k), y[k]);
    }
    EXPECT_THROW(simulate_y_paths(spec, 77, 0), ValidationError);
}

TEST(PricePathValidation, RejectsNonPositivePrices) {
    EXPECT_THROW(make_daily_path({10.0, -1.0}), ValidationError);
    EXPECT_THROW(make_path({0.0, 0.0}, {10.0, 11.0}), ValidationError);
}
