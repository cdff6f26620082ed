#pragma once

// Command-line front end: `buyback_cli <command> --config file.json [flags]`.
// Exit codes: 0 success, 1 runtime failure, 2 validation error, 3 unknown
// mode, 4 malformed config, 5 missing optimizer bounds, 64 bad usage.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"

namespace buyback {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitRuntime = 1,
    kExitValidation = 2,
    kExitUnknownMode = 3,
    kExitMalformed = 4,
    kExitMissingBounds = 5,
    kExitUsage = 64,
};

namespace cli_detail {

struct Outputs {
    std::vector<std::string> files;
    void add(const std::filesystem::path& p) { files.push_back(p.string()); }
    void add(const ReportFiles& r) {
        add(r.summary);
        add(r.payoffs);
        add(r.histogram);
        add(r.stop_days);
    }
};

inline void write_json(const std::filesystem::path& path, const Json& j, Outputs& outputs) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    outputs.add(path);
}

inline Json report_json(const EvalReport& r) {
    Json j;
    j["label"] = r.label;
    j["n_paths"] = r.n_paths();
    j["mean"] = r.mean;
    j["stddev"] = r.stddev;
    if (r.contract_mode) {
        j["pnl_million"] = r.mean_pnl / 1e6;
        j["mean_bp"] = r.mean_bp;
        j["std_bp"] = r.std_bp;
    }
    return j;
}

inline void run_simulate(const RunConfig& cfg, std::ostream& log, Outputs& outputs) {
    const std::string base = cfg.output;
    const auto paths_file = std::filesystem::path(base + "_paths.csv");
    auto out = open_output(paths_file);
    out << "path,node,time,price,running_avg,y\n";
    const std::uint64_t seed = derive_seed(cfg.seed, SeedDomain::Evaluation);
    for (std::size_t i = 0; i < cfg.simulate_paths; ++i) {
        const PricePath p = cfg.simulate_model == "gbm" ? simulate_gbm(cfg.gbm, RngKey{seed, i})
                                                        : simulate_daily(cfg.daily, RngKey{seed, i});
        const auto y = y_process(p);
        for (std::size_t k = 0; k < p.size(); ++k)
            out << i << ',' << k << ',' << format_double(p.times[k]) << ',' << format_double(p.prices[k]) << ','
                << format_double(p.running_avg[k]) << ',' << format_double(y[k]) << '\n';
        if (cfg.simulate_model == "daily" && cfg.policy && cfg.policy->params) {
            std::vector<DayRecord> trace;
            EpisodeOptions opts;
            opts.stop_check = cfg.stop_check;
            opts.trace = &trace;
            run_episode(*cfg.policy->params, cfg.contract, p.prices, opts);
            const auto trace_file = std::filesystem::path(base + "_trace_" + std::to_string(i) + ".csv");
            auto t = open_output(trace_file);
            write_trace_csv(t, trace);
            outputs.add(trace_file);
        }
    }
    outputs.add(paths_file);
    log << "simulated " << cfg.simulate_paths << " " << cfg.simulate_model << " path(s)\n";
}

inline void run_toy_pde(const RunConfig& cfg, std::ostream& log, Outputs& outputs) {
    const auto sol = solve_pde_only(cfg.toy);
    const auto grid_file = std::filesystem::path(cfg.output + "_pde.csv");
    {
        auto out = open_output(grid_file);
        sol.write_csv(out);
    }
    outputs.add(grid_file);
    Json summary;
    summary["value_at_origin"] = sol.value_at_origin();
    summary["first_time_slice"] = sol.t_nodes.front();
    summary["n_y"] = sol.n_y();
    summary["n_t"] = sol.n_t();
    summary["max_policy_iterations"] = sol.max_policy_iterations_used;
    write_json(cfg.output + "_summary.json", summary, outputs);
    log << "u(0+,1) = " << format_double(sol.value_at_origin()) << '\n';
}

inline YPathSet toy_eval_paths(const RunConfig& cfg) {
    return simulate_y_paths(cfg.toy.model, derive_seed(cfg.seed, SeedDomain::Evaluation), cfg.toy.n_eval_paths);
}

inline void run_toy_ls(const RunConfig& cfg, std::ostream& log, Outputs& outputs) {
    const auto model = fit_ls_only(cfg.toy);
    const auto eval = toy_eval_paths(cfg);
    auto report = toy_report(
        "LS",
        evaluate_stop_policy([&](std::size_t k, double, double y) { return ls_stop_decision(model, k, y); }, eval,
                             cfg.threads),
        cfg.histogram_bins);
    outputs.add(export_report(report, cfg.output + "_ls"));
    const auto coef_file = std::filesystem::path(cfg.output + "_ls_coefficients.csv");
    {
        auto out = open_output(coef_file);
        out << "step";
        for (int p = 0; p <= model.degree; ++p) out << ",c" << p;
        out << ",fallback\n";
        for (std::size_t n = 0; n < model.n_steps(); ++n)
            out << n << ',' << join_doubles(model.coefficients[n]) << ',' << (model.fallback[n] ? 1 : 0) << '\n';
    }
    outputs.add(coef_file);
    log << "LS out-of-sample mean " << format_double(report.mean) << " std " << format_double(report.stddev)
        << " (in-sample " << format_double(model.in_sample_value) << ")\n";
}

inline void run_toy_ohs(const RunConfig& cfg, std::ostream& log, Outputs& outputs) {
    const auto train =
        simulate_y_paths(cfg.toy.model, derive_seed(cfg.seed, SeedDomain::Training), cfg.toy.n_train_paths);
    const auto [params, search] = optimize_frontier(cfg.toy, train);
    const auto eval = toy_eval_paths(cfg);
    const double horizon = cfg.toy.model.horizon;
    auto report = toy_report(
        "OHS",
        evaluate_stop_policy(
            [&, p = params](std::size_t, double t, double y) { return frontier_stop_decision(p, t, y, horizon); },
            eval, cfg.threads),
        cfg.histogram_bins);
    outputs.add(export_report(report, cfg.output + "_ohs"));
    const auto trials_file = std::filesystem::path(cfg.output + "_ohs_trials.csv");
    {
        auto out = open_output(trials_file);
        write_trials_csv(out, cfg.toy.ohs_space, search.trials);
    }
    outputs.add(trials_file);
    log << "OHS beta = (" << join_doubles(params.beta) << "), mean " << format_double(report.mean) << " std "
        << format_double(report.stddev) << '\n';
}

inline void run_toy_compare(const RunConfig& cfg, std::ostream& log, Outputs& outputs) {
    const auto cmp = compare_methods_table(cfg.toy);
    const auto table_file = std::filesystem::path(cfg.output + "_table.csv");
    {
        auto out = open_output(table_file);
        out << "method,mean,stddev\n";
        for (const auto& row : cmp.rows)
            out << row.label << ',' << format_double(row.mean) << ',' << format_double(row.stddev) << '\n';
    }
    outputs.add(table_file);
    for (const auto& row : cmp.rows) outputs.add(export_report(row, cfg.output + "_" + row.label));
    Json summary;
    summary["pde_value_at_origin"] = cmp.pde_grid_value;
    summary["ohs_beta"] = cmp.ohs.beta;
    summary["ls_fallback_steps"] = std::count(cmp.ls.fallback.begin(), cmp.ls.fallback.end(), true);
    for (const auto& row : cmp.rows) summary["methods"].push_back(report_json(row));
    write_json(cfg.output + "_summary.json", summary, outputs);

    log << "method  mean      stddev\n";
    for (const auto& row : cmp.rows)
        log << row.label << "  " << format_double(row.mean) << "  " << format_double(row.stddev) << '\n';
    log << "PDE grid value u(0+,1) = " << format_double(cmp.pde_grid_value) << '\n';
}

inline PolicyOptimization optimize_entry(const RunConfig& cfg, PolicyFamily family, const SearchSpace& space) {
    return optimize_policy(family, space, cfg.eval_config(), cfg.optimizer);
}

inline void run_optimize(const RunConfig& cfg, std::ostream& log, Outputs& outputs) {
    const auto result = optimize_entry(cfg, cfg.policy->family, *cfg.bounds);
    const auto trials_file = std::filesystem::path(cfg.output + "_trials.csv");
    {
        auto out = open_output(trials_file);
        write_trials_csv(out, *cfg.bounds, result.search.trials);
    }
    outputs.add(trials_file);

    // Best parameters in run-config form, ready for `evaluate`.
    Json best = cfg.source;
    best["mode"] = "evaluate";
    best["policy"] = policy_to_json(result.best);
    if (best.contains("optimizer")) best["optimizer"].erase("bounds");
    write_json(cfg.output + "_best_policy.json", best, outputs);

    const auto report = evaluate_policy(result.best, cfg.eval_config());
    outputs.add(export_report(report, cfg.output + "_eval"));
    log << "best " << result.best.label() << "\n  training objective " << format_double(result.search.best_value)
        << " bp, fresh-path mean " << format_double(report.mean_bp) << " bp, std " << format_double(report.std_bp)
        << " bp\n";
}

inline void run_evaluate(const RunConfig& cfg, std::ostream& log, Outputs& outputs) {
    const auto report = evaluate_policy(*cfg.policy->params, cfg.eval_config());
    outputs.add(export_report(report, cfg.output));
    log << report.label << ": PnL " << format_double(report.mean_pnl / 1e6) << "M, mean "
        << format_double(report.mean_bp) << " bp, std " << format_double(report.std_bp) << " bp\n";
}

inline void run_compare_policies(const RunConfig& cfg, std::ostream& log, Outputs& outputs) {
    const auto table_file = std::filesystem::path(cfg.output + "_table.csv");
    auto table = open_output(table_file);
    table << "policy,pnl_million,mean_bp,std_bp,params\n";
    log << "policy, PnL (M), mean (bp), std (bp)\n";
    for (std::size_t i = 0; i < cfg.policies.size(); ++i) {
        const auto& entry = cfg.policies[i];
        PolicyParams params;
        if (entry.optimize) {
            const SearchSpace space = entry.bounds ? *entry.bounds : default_search_space(entry.family);
            params = optimize_entry(cfg, entry.family, space).best;
        } else {
            params = *entry.params;
        }
        const auto report = evaluate_policy(params, cfg.eval_config());
        outputs.add(export_report(report, cfg.output + "_" + std::to_string(i) + "_" + entry.label));
        table << entry.label << ',' << format_double(report.mean_pnl / 1e6) << ',' << format_double(report.mean_bp)
              << ',' << format_double(report.std_bp) << ",\"" << params.label() << "\"\n";
        log << entry.label << ", " << format_double(report.mean_pnl / 1e6) << ", " << format_double(report.mean_bp)
            << ", " << format_double(report.std_bp) << '\n';
    }
    outputs.add(table_file);
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace cli_detail

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<int> trials;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    std::vector<std::string> sets;
};

/// Loads, overrides, validates and dispatches. Returns the process exit code.
inline int run(const std::string& command, const std::string& config_path, const CliOverrides& ov,
               std::ostream& log, std::ostream& err) {
    RunConfig cfg;
    try {
        Json root = load_config_json(config_path);
        if (!root.is_object()) throw MalformedConfigError("config root must be an object");
        if (!command.empty()) root["mode"] = command;
        if (ov.seed) root["seed"] = *ov.seed;
        if (ov.out) root["output"] = *ov.out;
        if (ov.threads) root["threads"] = *ov.threads;
        if (ov.trials) root["optimizer"]["n_trials"] = *ov.trials;
        if (ov.paths) {
            root["eval"]["n_paths"] = *ov.paths;
            root["toy"]["n_eval_paths"] = *ov.paths;
        }
        for (const auto& s : ov.sets) apply_override(root, s);
        cfg = parse_run_config(root);
    } catch (const UnknownModeError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUnknownMode;
    } catch (const MissingBoundsError& e) {
        err << "error: " << e.what() << '\n';
        return kExitMissingBounds;
    } catch (const MalformedConfigError& e) {
        err << "error: malformed config: " << e.what() << '\n';
        return kExitMalformed;
    } catch (const std::invalid_argument& e) {
        err << "error: invalid config: " << e.what() << '\n';
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed config: " << e.what() << '\n';
        return kExitMalformed;
    }

    cli_detail::Outputs outputs;
    try {
        switch (cfg.mode) {
            case Mode::Simulate: cli_detail::run_simulate(cfg, log, outputs); break;
            case Mode::ToyPde: cli_detail::run_toy_pde(cfg, log, outputs); break;
            case Mode::ToyLs: cli_detail::run_toy_ls(cfg, log, outputs); break;
            case Mode::ToyOhs: cli_detail::run_toy_ohs(cfg, log, outputs); break;
            case Mode::ToyCompare: cli_detail::run_toy_compare(cfg, log, outputs); break;
            case Mode::Optimize: cli_detail::run_optimize(cfg, log, outputs); break;
            case Mode::Evaluate: cli_detail::run_evaluate(cfg, log, outputs); break;
            case Mode::ComparePolicies: cli_detail::run_compare_policies(cfg, log, outputs); break;
        }
        Json manifest;
        manifest["mode"] = std::string(mode_name(cfg.mode));
        manifest["seed"] = cfg.seed;
        manifest["config_file"] = config_path;
        char hash[17];
        std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash(cfg.source)));
        manifest["config_hash"] = hash;
        manifest["version"] = kVersion;
        manifest["compiler"] = __VERSION__;
        manifest["threads"] = cfg.threads;
        manifest["timestamp"] = cli_detail::utc_timestamp();
        manifest["outputs"] = outputs.files;
        manifest["config"] = cfg.source;
        auto out = open_output(cfg.output + "_manifest.json");
        out << manifest.dump(2) << '\n';
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

/// argv-level entry point shared by the executable and the tests.
inline int main_entry(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Buyback contract pricing and strategy optimisation"};
    app.set_version_flag("--version", kVersion);
    std::string command;
    std::string config;
    CliOverrides ov;
    std::uint64_t seed = 0;
    std::size_t paths = 0, threads = 0;
    int trials = 0;
    std::string out;
    app.add_option("command", command,
                   "simulate | toy-pde | toy-ls | toy-ohs | toy-compare | optimize | evaluate | compare-policies")
        ->required();
    app.add_option("--config,-c", config, "run configuration (JSON)")->required();
    auto* seed_opt = app.add_option("--seed", seed, "override the experiment seed");
    auto* paths_opt = app.add_option("--paths", paths, "override the evaluation path count");
    auto* trials_opt = app.add_option("--trials", trials, "override the optimizer trial budget");
    auto* out_opt = app.add_option("--out", out, "override the output prefix");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (0 = all cores)");
    app.add_option("--set", ov.sets, "override a config leaf, e.g. --set contract.f_max=250e6");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, log, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    if (*seed_opt) ov.seed = seed;
    if (*paths_opt) ov.paths = paths;
    if (*trials_opt) ov.trials = trials;
    if (*out_opt) ov.out = out;
    if (*threads_opt) ov.threads = threads;
    return run(command, config, ov, log, err);
}

}  // namespace buyback
