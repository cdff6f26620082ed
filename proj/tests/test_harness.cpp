#include <buyback/harness.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace buyback;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("buyback_harness_" + name);
    fs::remove_all(dir);
    return dir;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
    std::ifstream in(file);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

EvalConfig small_eval(std::size_t paths = 300) {
    EvalConfig e;
    e.n_paths = paths;
    e.seed = 3;
    return e;
}

}  // namespace

TEST(Histogram, RightClosedLastBin) {
    const std::vector<double> v{0.0, 1.0, 2.0};
    const auto h = make_histogram(v, 2);
    ASSERT_EQ(h.counts.size(), 2u);
    EXPECT_EQ(h.counts[0], 1u);
    EXPECT_EQ(h.counts[1], 2u);
    EXPECT_EQ(h.edges.front(), 0.0);
    EXPECT_EQ(h.edges.back(), 2.0);
}

TEST(Histogram, DegenerateRangeAndCountsSum) {
    const std::vector<double> same(7, 3.0);
    const auto h = make_histogram(same, 4);
    std::size_t total = 0;
    for (auto c : h.counts) total += c;
    EXPECT_EQ(total, 7u);
    EXPECT_THROW(make_histogram(same, 0), ValidationError);
}

TEST(EvaluatePolicy, ReportInvariants) {
    const auto r = evaluate_policy(PolicyParams(PolicyFamily::Linear), small_eval());
    EXPECT_EQ(r.n_paths(), 300u);
    std::size_t total = 0;
    for (auto c : r.histogram.counts) total += c;
    EXPECT_EQ(total, 300u);
    EXPECT_NEAR(r.mean_bp, r.mean_pnl / 200e6 * 1e4, 1e-9 * std::abs(r.mean_bp) + 1e-12);
    EXPECT_EQ(r.histogram.counts.size(), 100u);
    for (int d : r.stop_days) EXPECT_EQ(d, 60);
}

TEST(EvaluatePolicy, ZeroVolatilityPayoffIsZero) {
    auto e = small_eval(50);
    e.market.sigma_daily = 0.0;
    for (auto f : {PolicyFamily::Linear, PolicyFamily::MinMaxTarget, PolicyFamily::NoTrade}) {
        const auto r = evaluate_policy(PolicyParams(f), e);
        for (double p : r.payoffs) EXPECT_NEAR(p, 0.0, 1e-6 * 200e6);
    }
    const auto h = evaluate_policy(PolicyParams(PolicyFamily::H1, {0.01, -1.0}), e);
    for (double p : h.payoffs) EXPECT_NEAR(p, 0.0, 1e-6 * 200e6);
}

TEST(EvaluatePolicy, ThreadCountDoesNotChangeResults) {
    auto e = small_eval(500);
    const PolicyParams p(PolicyFamily::H5, {0.01, -1.0, 0.5, 30.0});
    const auto one = evaluate_policy(p, e);
    e.threads = 3;
    const auto three = evaluate_policy(p, e);
    EXPECT_EQ(one.payoffs, three.payoffs);
    EXPECT_EQ(one.mean_bp, three.mean_bp);
}

TEST(EvaluatePolicy, StandardErrorScalesWithPathCount) {
    const PolicyParams p(PolicyFamily::Linear);
    const auto small = evaluate_policy(p, small_eval(4000));
    const auto large = evaluate_policy(p, small_eval(8000));
    EXPECT_NEAR(small.std_error() / large.std_error(), std::sqrt(2.0), 0.1);
}

TEST(OptimizePolicy, CommonRandomNumbersReproduceLoggedObjective) {
    auto e = small_eval(200);
    OptimizerConfig cfg;
    cfg.n_trials = 25;
    cfg.n_paths_per_trial = 200;
    cfg.seed = 4;
    const auto r = optimize_policy(PolicyFamily::H1, default_search_space(PolicyFamily::H1), e, cfg);
    const auto train = DailyPathSet::simulate(e.daily(), derive_seed(4, SeedDomain::Training), 200);
    const auto again = evaluate_on_paths(r.best, e.contract, train, e.stop_check, 1, 1);
    EXPECT_EQ(again.mean_bp, r.search.best_value);

    // Reporting paths come from a different seed namespace.
    const auto fresh = DailyPathSet::simulate(e.daily(), derive_seed(4, SeedDomain::Evaluation), 200);
    EXPECT_NE(fresh.prices, train.prices);
    const auto repeat = optimize_policy(PolicyFamily::H1, default_search_space(PolicyFamily::H1), e, cfg);
    EXPECT_EQ(repeat.best.values, r.best.values);
}

TEST(OptimizePolicy, RejectsBenchmarkFamilies) {
    EXPECT_THROW(optimize_policy(PolicyFamily::Linear, SearchSpace{{{"x", 0, 1}}}, small_eval(), OptimizerConfig{}),
                 ValidationError);
}

TEST(DefaultSearchSpace, BoundsByParameterName) {
    const auto s = default_search_space(PolicyFamily::H6);
    ASSERT_EQ(s.size(), 6u);
    EXPECT_EQ(s.dims[0].name, "alpha");
    EXPECT_EQ(s.dims[0].upper, 0.05);
    EXPECT_EQ(s.dims[1].lower, -5.0);
    EXPECT_EQ(s.dims[3].upper, 300.0);
    EXPECT_EQ(s.dims[5].name, "c");
}

TEST(ToyComparison, ZeroVolatilityGivesOneForEveryMethod) {
    ToyConfig cfg;
    cfg.model.sigma_annual = 0.0;
    cfg.n_train_paths = 50;
    cfg.n_eval_paths = 50;
    cfg.ohs.n_trials = 10;
    cfg.ohs.n_startup_trials = 5;
    const auto cmp = compare_methods_table(cfg);
    ASSERT_EQ(cmp.rows.size(), 3u);
    EXPECT_EQ(cmp.rows[0].label, "PDE");
    EXPECT_EQ(cmp.rows[1].label, "LS");
    EXPECT_EQ(cmp.rows[2].label, "OHS");
    for (const auto& row : cmp.rows) {
        EXPECT_EQ(row.mean, 1.0);
        EXPECT_EQ(row.stddev, 0.0);
    }
}

TEST(ExportReport, CreatesDirectoryAndRecomputesStatistics) {
    const auto dir = scratch_dir("export");
    const auto r = evaluate_policy(PolicyParams(PolicyFamily::MinMaxTarget), small_eval(400));
    const auto files = export_report(r, dir / "nested" / "mm");
    EXPECT_TRUE(fs::exists(dir / "nested"));

    const auto rows = read_csv(files.payoffs);
    ASSERT_EQ(rows.size(), 401u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"path", "payoff", "pnl_bp", "stop_day"}));
    std::vector<double> bp;
    for (std::size_t i = 1; i < rows.size(); ++i) bp.push_back(parse_double(rows[i][2]));
    EXPECT_EQ(mean_of(bp), r.mean_bp);
    EXPECT_EQ(stddev_of(bp), r.std_bp);

    const auto hist = read_csv(files.histogram);
    EXPECT_EQ(hist[0], (std::vector<std::string>{"bin_left", "bin_right", "count"}));
    EXPECT_EQ(hist.size(), 101u);
    const auto days = read_csv(files.stop_days);
    EXPECT_EQ(days[0], (std::vector<std::string>{"stop_day", "count"}));
    std::size_t total = 0;
    for (std::size_t i = 1; i < days.size(); ++i) total += std::stoul(days[i][1]);
    EXPECT_EQ(total, 400u);

    std::ifstream summary(files.summary);
    std::string text((std::istreambuf_iterator<char>(summary)), {});
    EXPECT_NE(text.find("\"mean_bp\""), std::string::npos);
    fs::remove_all(dir);
}

TEST(ExportReport, ToyHistogramHasSpikeAboveOne) {
    ToyConfig cfg;
    const auto eval = simulate_y_paths(cfg.model, 99, 10000);
    const FrontierParams p{{0.0125, 0.025, -0.02}, FrontierOrientation::StopAbove};
    const auto r = toy_report("OHS",
                              evaluate_stop_policy(
                                  [&](std::size_t, double t, double y) {
                                      return frontier_stop_decision(p, t, y, eval.horizon());
                                  },
                                  eval),
                              100);
    const auto mode = std::max_element(r.histogram.counts.begin(), r.histogram.counts.end());
    const auto b = static_cast<std::size_t>(mode - r.histogram.counts.begin());
    EXPECT_GE(r.histogram.edges[b + 1], 1.0);
    EXPECT_LE(r.histogram.edges[b], 1.05);
    std::size_t below = 0;
    for (double v : r.values) below += v < 1.0 ? 1 : 0;
    EXPECT_GT(below, 1000u);
    EXPECT_LT(*std::min_element(r.values.begin(), r.values.end()), 0.95);
}
