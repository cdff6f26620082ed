#pragma once

// Monte Carlo evaluation of contract policies and of the toy stopping rules,
// summary statistics, histograms, and report export.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "episode.hpp"
#include "optimizer.hpp"
#include "parallel.hpp"
#include "path_sim.hpp"
#include "pde.hpp"
#include "policies.hpp"
#include "stopping.hpp"

namespace buyback {

// ---------------------------------------------------------------------------
// Statistics

struct Histogram {
    std::vector<double> edges;  // bins + 1 edges
    std::vector<std::size_t> counts;
};

/// Uniform bins over [min, max]; each bin is [left, right) except the last,
/// which is closed on the right.
inline Histogram make_histogram(std::span<const double> values, std::size_t bins) {
    require(bins >= 1, "make_histogram: need at least one bin");
    Histogram h;
    h.counts.assign(bins, 0);
    if (values.empty()) {
        h.edges.assign(bins + 1, 0.0);
        return h;
    }
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it, hi = *hi_it;
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / bins;
    h.edges.back() = hi;
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        b = std::min(b, bins - 1);
        // Guard against rounding in the bin index computation.
        while (b > 0 && v < h.edges[b]) --b;
        while (b + 1 < bins && v >= h.edges[b + 1]) ++b;
        ++h.counts[b];
    }
    return h;
}

inline double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double stddev_of(std::span<const double> v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
    std::string label;
    bool contract_mode = true;
    // Contract mode: payoffs in currency and values in bp of f_min.
    // Toy mode: payoffs and values are both Y at the stopping time.
    std::vector<double> payoffs;
    std::vector<double> values;
    std::vector<int> stop_days;
    double mean_pnl = 0.0;
    double mean_bp = 0.0;
    double std_bp = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    Histogram histogram;

    [[nodiscard]] std::size_t n_paths() const { return values.size(); }
    [[nodiscard]] double std_error() const { return stddev / std::sqrt(static_cast<double>(n_paths())); }

    [[nodiscard]] std::map<int, std::size_t> stop_day_distribution() const {
        std::map<int, std::size_t> dist;
        for (int d : stop_days) ++dist[d];
        return dist;
    }
};

inline void finalize_report(EvalReport& r, std::size_t bins) {
    r.mean = mean_of(r.values);
    r.stddev = stddev_of(r.values);
    if (r.contract_mode) {
        r.mean_pnl = mean_of(r.payoffs);
        r.mean_bp = r.mean;
        r.std_bp = r.stddev;
    }
    r.histogram = make_histogram(r.values, bins);
}

// ---------------------------------------------------------------------------
// Contract policies

struct EvalConfig {
    std::size_t n_paths = 2000;
    std::uint64_t seed = 0;
    DailySpec market;
    ContractSpec contract;
    StopCheck stop_check = StopCheck::AfterTrade;
    std::size_t histogram_bins = 100;
    std::size_t threads = 1;

    void validate() const {
        require(n_paths >= 1, "EvalConfig: n_paths must be >= 1");
        market.validate();
        contract.validate();
        require(histogram_bins >= 1, "EvalConfig: histogram_bins must be >= 1");
    }

    [[nodiscard]] DailySpec daily() const {
        DailySpec d = market;
        d.n_days = contract.n_max;
        return d;
    }
};

/// A fixed set of daily paths, stored row-major.
struct DailyPathSet {
    std::size_t n_paths = 0;
    std::size_t n_nodes = 0;
    std::vector<double> prices;

    [[nodiscard]] std::span<const double> path(std::size_t i) const {
        return {prices.data() + i * n_nodes, n_nodes};
    }

    static DailyPathSet simulate(const DailySpec& spec, std::uint64_t seed, std::size_t n_paths,
                                 std::size_t threads = 1) {
        DailyPathSet set;
        set.n_paths = n_paths;
        set.n_nodes = static_cast<std::size_t>(spec.n_days) + 1;
        set.prices.resize(n_paths * set.n_nodes);
        parallel_for(n_paths, threads, [&](std::size_t i) {
            const auto p = simulate_daily(spec, RngKey{seed, i});
            std::copy(p.prices.begin(), p.prices.end(), set.prices.begin() + static_cast<std::ptrdiff_t>(i * set.n_nodes));
        });
        return set;
    }
};

inline EvalReport evaluate_on_paths(const PolicyParams& policy, const ContractSpec& spec, const DailyPathSet& paths,
                                    StopCheck stop_check, std::size_t bins, std::size_t threads) {
    policy.validate();
    EvalReport r;
    r.label = policy.label();
    r.payoffs.resize(paths.n_paths);
    r.values.resize(paths.n_paths);
    r.stop_days.resize(paths.n_paths);
    EpisodeOptions opts;
    opts.stop_check = stop_check;
    parallel_for(paths.n_paths, threads, [&](std::size_t i) {
        const auto e = run_episode(policy, spec, paths.path(i), opts);
        r.payoffs[i] = e.payoff;
        r.values[i] = pnl_bp(e.payoff, spec);
        r.stop_days[i] = e.stop_day;
    });
    finalize_report(r, bins);
    return r;
}

/// Evaluates a fixed policy on fresh paths from the evaluation seed namespace.
inline EvalReport evaluate_policy(const PolicyParams& policy, const EvalConfig& cfg) {
    cfg.validate();
    const auto paths = DailyPathSet::simulate(cfg.daily(), derive_seed(cfg.seed, SeedDomain::Evaluation),
                                              cfg.n_paths, cfg.threads);
    return evaluate_on_paths(policy, cfg.contract, paths, cfg.stop_check, cfg.histogram_bins, cfg.threads);
}

/// Default box for each heuristic family.
inline SearchSpace default_search_space(PolicyFamily family) {
    SearchSpace space;
    for (auto name : family_parameters(family)) {
        Dimension d{std::string(name), -5.0, 5.0};
        if (name == "alpha" || name == "beta" || name == "gamma") d = {std::string(name), -0.05, 0.05};
        // b and b1 multiply A/S - 1, which is of order 1e-2 over a contract.
        if (name == "b" || name == "b1") d = {std::string(name), -300.0, 300.0};
        space.dims.push_back(d);
    }
    return space;
}

struct PolicyOptimization {
    PolicyParams best;
    OptimizationResult search;
};

/// Maximises the mean PnL (bp) of a heuristic family on training paths.
inline PolicyOptimization optimize_policy(PolicyFamily family, const SearchSpace& space, const EvalConfig& eval,
                                          const OptimizerConfig& cfg) {
    require(is_heuristic(family), "optimize_policy: family " + std::string(family_name(family)) + " has no parameters");
    require(space.size() == family_parameters(family).size(), "optimize_policy: search space arity mismatch");
    eval.validate();
    cfg.validate();

    const DailySpec daily = eval.daily();
    const std::uint64_t train_seed = derive_seed(cfg.seed, SeedDomain::Training);
    const auto n_paths = static_cast<std::size_t>(cfg.n_paths_per_trial);
    DailyPathSet shared;
    if (cfg.common_random_numbers) shared = DailyPathSet::simulate(daily, train_seed, n_paths, eval.threads);

    std::uint64_t trial_counter = 0;
    const Objective objective = [&](std::span<const double> x) -> ObjectiveValue {
        const PolicyParams p(family, {x.begin(), x.end()});
        const DailyPathSet fresh = cfg.common_random_numbers
                                       ? DailyPathSet{}
                                       : DailyPathSet::simulate(daily, mix64(train_seed + ++trial_counter), n_paths,
                                                                eval.threads);
        const auto& paths = cfg.common_random_numbers ? shared : fresh;
        const auto r = evaluate_on_paths(p, eval.contract, paths, eval.stop_check, 1, eval.threads);
        return {r.mean_bp, r.std_error()};
    };

    PolicyOptimization out;
    out.search = optimize(objective, space, cfg);
    require(!out.search.best_params.empty(), "optimize_policy: every trial failed");
    out.best = PolicyParams(family, out.search.best_params);
    return out;
}

// ---------------------------------------------------------------------------
// Toy stopping problem: PDE vs Longstaff-Schwartz vs optimized frontier

struct ToyConfig {
    GbmSpec model;
    PdeSolverConfig pde;
    int ls_degree = 2;
    std::size_t n_train_paths = 10000;
    std::size_t n_eval_paths = 10000;
    std::uint64_t seed = 0;
    OptimizerConfig ohs;  // n_paths_per_trial is ignored; the training set is shared
    SearchSpace ohs_space{{{"beta1", -0.05, 0.05}, {"beta2", -0.05, 0.05}, {"beta3", -0.05, 0.05}}};
    FrontierOrientation ohs_orientation = FrontierOrientation::StopAbove;
    std::size_t histogram_bins = 100;
    std::size_t threads = 1;

    void validate() const {
        model.validate();
        pde.validate();
        require(ls_degree >= 0, "ToyConfig: ls_degree must be >= 0");
        require(n_train_paths >= 2 && n_eval_paths >= 1, "ToyConfig: need >= 2 training and >= 1 evaluation paths");
        require(ohs_space.size() == 3, "ToyConfig: frontier search space must have 3 dimensions");
        ohs_space.validate();
        ohs.validate();
    }
};

struct ToyComparison {
    double pde_grid_value = 0.0;  // u(0+, 1)
    PdeSolution pde;
    LsModel ls;
    FrontierParams ohs;
    OptimizationResult ohs_search;
    std::vector<EvalReport> rows;  // PDE, LS, OHS on the shared evaluation set
};

inline EvalReport toy_report(std::string label, StopPolicyResult r, std::size_t bins) {
    EvalReport rep;
    rep.label = std::move(label);
    rep.contract_mode = false;
    rep.payoffs = r.values;
    rep.values = std::move(r.values);
    rep.stop_days.assign(r.stop_steps.begin(), r.stop_steps.end());
    finalize_report(rep, bins);
    return rep;
}

inline PdeSolution solve_pde_only(const ToyConfig& cfg) {
    cfg.validate();
    return solve_qvi(cfg.model, cfg.pde);
}

inline LsModel fit_ls_only(const ToyConfig& cfg) {
    cfg.validate();
    return fit_longstaff_schwartz(
        simulate_y_paths(cfg.model, derive_seed(cfg.seed, SeedDomain::Training), cfg.n_train_paths), cfg.ls_degree);
}

inline std::pair<FrontierParams, OptimizationResult> optimize_frontier(const ToyConfig& cfg, const YPathSet& train) {
    const double horizon = cfg.model.horizon;
    const Objective objective = [&](std::span<const double> x) -> ObjectiveValue {
        FrontierParams p{{x[0], x[1], x[2]}, cfg.ohs_orientation};
        const auto r = evaluate_stop_policy(
            [&](std::size_t, double t, double y) { return frontier_stop_decision(p, t, y, horizon); }, train,
            cfg.threads);
        return {r.mean, r.std_error()};
    };
    auto search = optimize(objective, cfg.ohs_space, cfg.ohs);
    FrontierParams best{{search.best_params[0], search.best_params[1], search.best_params[2]}, cfg.ohs_orientation};
    return {best, std::move(search)};
}

inline ToyComparison compare_methods_table(const ToyConfig& cfg) {
    cfg.validate();
    ToyComparison out;
    const auto train = simulate_y_paths(cfg.model, derive_seed(cfg.seed, SeedDomain::Training), cfg.n_train_paths);
    const auto eval = simulate_y_paths(cfg.model, derive_seed(cfg.seed, SeedDomain::Evaluation), cfg.n_eval_paths);

    out.pde = solve_qvi(cfg.model, cfg.pde);
    out.pde_grid_value = out.pde.value_at_origin();
    out.ls = fit_longstaff_schwartz(train, cfg.ls_degree);
    std::tie(out.ohs, out.ohs_search) = optimize_frontier(cfg, train);

    const double horizon = cfg.model.horizon;
    out.rows.push_back(toy_report(
        "PDE",
        evaluate_stop_policy([&](std::size_t, double t, double y) { return pde_stop_decision(out.pde, t, y); }, eval,
                             cfg.threads),
        cfg.histogram_bins));
    out.rows.push_back(toy_report(
        "LS",
        evaluate_stop_policy([&](std::size_t k, double, double y) { return ls_stop_decision(out.ls, k, y); }, eval,
                             cfg.threads),
        cfg.histogram_bins));
    out.rows.push_back(toy_report(
        "OHS",
        evaluate_stop_policy(
            [&](std::size_t, double t, double y) { return frontier_stop_decision(out.ohs, t, y, horizon); }, eval,
            cfg.threads),
        cfg.histogram_bins));
    return out;
}

// ---------------------------------------------------------------------------
// Export

struct ReportFiles {
    std::filesystem::path summary, payoffs, histogram, stop_days;
};

inline void write_summary_json(std::ostream& out, const EvalReport& r) {
    out << "{\n  \"label\": \"" << r.label << "\",\n"
        << "  \"mode\": \"" << (r.contract_mode ? "contract" : "toy") << "\",\n"
        << "  \"n_paths\": " << r.n_paths() << ",\n"
        << "  \"mean\": " << format_double(r.mean) << ",\n"
        << "  \"stddev\": " << format_double(r.stddev) << ",\n"
        << "  \"std_error\": " << format_double(r.std_error());
    if (r.contract_mode) {
        out << ",\n  \"mean_pnl\": " << format_double(r.mean_pnl) << ",\n"
            << "  \"mean_pnl_million\": " << format_double(r.mean_pnl / 1e6) << ",\n"
            << "  \"mean_bp\": " << format_double(r.mean_bp) << ",\n"
            << "  \"std_bp\": " << format_double(r.std_bp);
    }
    out << "\n}\n";
}

/// Writes <prefix>_summary.json, <prefix>_payoffs.csv, <prefix>_histogram.csv
/// and <prefix>_stop_days.csv, creating the parent directory if needed.
inline ReportFiles export_report(const EvalReport& r, const std::filesystem::path& prefix) {
    const std::string base = prefix.string();
    ReportFiles files{base + "_summary.json", base + "_payoffs.csv", base + "_histogram.csv", base + "_stop_days.csv"};
    {
        auto out = open_output(files.summary);
        write_summary_json(out, r);
    }
    {
        auto out = open_output(files.payoffs);
        out << (r.contract_mode ? "path,payoff,pnl_bp,stop_day\n" : "path,value,stop_step\n");
        for (std::size_t i = 0; i < r.n_paths(); ++i) {
            out << i << ',' << format_double(r.payoffs[i]) << ',';
            if (r.contract_mode) out << format_double(r.values[i]) << ',';
            out << r.stop_days[i] << '\n';
        }
    }
    {
        auto out = open_output(files.histogram);
        out << "bin_left,bin_right,count\n";
        for (std::size_t b = 0; b < r.histogram.counts.size(); ++b)
            out << format_double(r.histogram.edges[b]) << ',' << format_double(r.histogram.edges[b + 1]) << ','
                << r.histogram.counts[b] << '\n';
    }
    {
        auto out = open_output(files.stop_days);
        out << "stop_day,count\n";
        for (const auto& [day, count] : r.stop_day_distribution()) out << day << ',' << count << '\n';
    }
    for (const auto& f : {files.summary, files.payoffs, files.histogram, files.stop_days})
        if (!std::filesystem::exists(f)) throw std::runtime_error("export_report: failed to write " + f.string());
    return files;
}

}  // namespace buyback
