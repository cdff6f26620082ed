#pragma once

// Run configuration: JSON documents with one section per concern (market,
// contract, policy, optimizer, eval, toy, simulate), validated up front.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "harness.hpp"

namespace buyback {

using Json = nlohmann::json;

enum class Mode { Simulate, ToyPde, ToyLs, ToyOhs, ToyCompare, Optimize, Evaluate, ComparePolicies };

inline constexpr std::array<std::pair<Mode, std::string_view>, 8> kModeNames{{
    {Mode::Simulate, "simulate"},
    {Mode::ToyPde, "toy-pde"},
    {Mode::ToyLs, "toy-ls"},
    {Mode::ToyOhs, "toy-ohs"},
    {Mode::ToyCompare, "toy-compare"},
    {Mode::Optimize, "optimize"},
    {Mode::Evaluate, "evaluate"},
    {Mode::ComparePolicies, "compare-policies"},
}};

inline std::string_view mode_name(Mode m) {
    for (const auto& [mode, name] : kModeNames)
        if (mode == m) return name;
    return "?";
}

// Config problems are split by kind so the CLI can map them to exit codes.
class UnknownModeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MalformedConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MissingBoundsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline Mode parse_mode(std::string_view name) {
    for (const auto& [mode, n] : kModeNames)
        if (n == name) return mode;
    throw UnknownModeError("unknown mode '" + std::string(name) + "'");
}

/// One entry of a policy comparison: fixed parameters or "optimize first".
struct PolicyEntry {
    PolicyFamily family = PolicyFamily::Linear;
    std::optional<PolicyParams> params;
    bool optimize = false;
    std::optional<SearchSpace> bounds;
    std::string label;
};

struct RunConfig {
    Mode mode = Mode::Evaluate;
    std::uint64_t seed = 0;
    std::string output = "out/run";
    std::size_t threads = 1;

    // Market. The toy model uses gbm; contract modes use daily (n_days set from the contract).
    GbmSpec gbm;
    DailySpec daily;
    ContractSpec contract;
    StopCheck stop_check = StopCheck::AfterTrade;

    std::optional<PolicyEntry> policy;
    std::vector<PolicyEntry> policies;

    OptimizerConfig optimizer;
    std::optional<SearchSpace> bounds;  // optimizer.bounds

    std::size_t eval_paths = 2000;
    std::size_t histogram_bins = 100;

    ToyConfig toy;
    std::string simulate_model = "daily";
    std::size_t simulate_paths = 10;

    Json source;  // the document after overrides, for hashing

    [[nodiscard]] EvalConfig eval_config() const {
        EvalConfig e;
        e.n_paths = eval_paths;
        e.seed = seed;
        e.market = daily;
        e.contract = contract;
        e.stop_check = stop_check;
        e.histogram_bins = histogram_bins;
        e.threads = threads;
        return e;
    }
};

namespace detail {

inline double json_number(const Json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "infinity") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw MalformedConfigError(where + ": expected a number or \"inf\"");
}

template <class T>
void read(const Json& section, const char* key, T& target, const std::string& where) {
    if (!section.contains(key)) return;
    const Json& v = section.at(key);
    const std::string path = where + "." + key;
    try {
        if constexpr (std::is_same_v<T, double>) {
            target = json_number(v, path);
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw MalformedConfigError(path + ": expected true/false");
            target = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw MalformedConfigError(path + ": expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.get<long long>() < 0) throw ValidationError(path + ": must be non-negative");
            }
            target = v.get<T>();
        } else {
            if (!v.is_string()) throw MalformedConfigError(path + ": expected a string");
            target = v.get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedConfigError(path + ": " + e.what());
    }
}

inline const Json& section(const Json& root, const char* name) {
    static const Json empty = Json::object();
    if (!root.contains(name)) return empty;
    const Json& s = root.at(name);
    if (!s.is_object()) throw MalformedConfigError(std::string(name) + ": expected an object");
    return s;
}

inline SearchSpace parse_bounds(const Json& j, const std::string& where, std::optional<PolicyFamily> family) {
    if (j.is_string() && j.get<std::string>() == "default") {
        if (!family) throw MalformedConfigError(where + ": \"default\" bounds need a policy family");
        return default_search_space(*family);
    }
    if (!j.is_object()) throw MalformedConfigError(where + ": expected an object of [lower, upper] pairs");
    SearchSpace space;
    auto add = [&](const std::string& name) {
        if (!j.contains(name)) throw MissingBoundsError(where + ": missing bounds for parameter '" + name + "'");
        const Json& pair = j.at(name);
        if (!pair.is_array() || pair.size() != 2)
            throw MalformedConfigError(where + "." + name + ": expected [lower, upper]");
        space.dims.push_back({name, json_number(pair[0], where + "." + name), json_number(pair[1], where + "." + name)});
    };
    if (family) {
        for (auto name : family_parameters(*family)) add(std::string(name));
    } else {
        for (auto it = j.begin(); it != j.end(); ++it) add(it.key());
    }
    space.validate();
    return space;
}

inline PolicyEntry parse_policy(const Json& j, const std::string& where) {
    if (!j.is_object()) throw MalformedConfigError(where + ": expected an object");
    if (!j.contains("family") || !j.at("family").is_string())
        throw MalformedConfigError(where + ".family: required string");
    PolicyEntry e;
    e.family = parse_family(j.at("family").get<std::string>());
    read(j, "optimize", e.optimize, where);
    read(j, "label", e.label, where);
    if (j.contains("params")) {
        const Json& p = j.at("params");
        if (!p.is_object()) throw MalformedConfigError(where + ".params: expected an object");
        std::vector<double> values;
        for (auto name : family_parameters(e.family)) {
            const std::string key(name);
            if (!p.contains(key)) throw ValidationError(where + ".params: missing parameter '" + key + "'");
            values.push_back(json_number(p.at(key), where + ".params." + key));
        }
        for (auto it = p.begin(); it != p.end(); ++it) {
            bool known = false;
            for (auto name : family_parameters(e.family)) known = known || name == it.key();
            if (!known) throw ValidationError(where + ".params: unknown parameter '" + it.key() + "'");
        }
        e.params = PolicyParams(e.family, std::move(values));
    } else if (!is_heuristic(e.family)) {
        e.params = PolicyParams(e.family, {});
    }
    if (j.contains("bounds")) e.bounds = parse_bounds(j.at("bounds"), where + ".bounds", e.family);
    if (!e.params && !e.optimize)
        throw ValidationError(where + ": heuristic family " + std::string(family_name(e.family)) +
                              " needs params or \"optimize\": true");
    if (e.label.empty()) e.label = e.optimize ? "Optimized-" + std::string(family_name(e.family))
                                              : std::string(family_name(e.family));
    return e;
}

inline Sampler parse_sampler(const std::string& s) {
    if (s == "tpe" || s == "TPE") return Sampler::TPE;
    if (s == "qmc" || s == "QMC" || s == "quasi-random") return Sampler::QuasiRandom;
    throw ValidationError("optimizer.sampler: expected \"tpe\" or \"qmc\", got '" + s + "'");
}

}  // namespace detail

/// Sets a dotted leaf path (e.g. "contract.f_min") to `value`, parsed as JSON
/// when possible and as a string otherwise.
inline void apply_override(Json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw MalformedConfigError("override '" + assignment + "': expected key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const nlohmann::json::exception&) {
        value = text;
    }
    Json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw MalformedConfigError("override '" + assignment + "': empty key segment");
        if (!node->is_object()) throw MalformedConfigError("override '" + assignment + "': '" + part + "' is not inside an object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = Json::object();
        start = dot + 1;
    }
}

inline Json load_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedConfigError("cannot read config file '" + path + "'");
    try {
        return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedConfigError("config '" + path + "': " + e.what());
    }
}

/// Parses and validates. Throws UnknownModeError, MalformedConfigError,
/// MissingBoundsError or ValidationError.
inline RunConfig parse_run_config(const Json& root) {
    using detail::read;
    if (!root.is_object()) throw MalformedConfigError("config root must be an object");
    RunConfig cfg;
    cfg.source = root;

    if (!root.contains("mode") || !root.at("mode").is_string()) throw MalformedConfigError("mode: required string");
    cfg.mode = parse_mode(root.at("mode").get<std::string>());
    if (!root.contains("seed")) throw ValidationError("seed: required (no wall-clock seeding)");
    read(root, "seed", cfg.seed, "root");
    read(root, "output", cfg.output, "root");
    read(root, "threads", cfg.threads, "root");
    if (cfg.threads == 0) cfg.threads = default_thread_count();

    const Json& market = detail::section(root, "market");
    read(market, "s0", cfg.gbm.s0, "market");
    read(market, "sigma_annual", cfg.gbm.sigma_annual, "market");
    read(market, "horizon_years", cfg.gbm.horizon, "market");
    read(market, "n_steps", cfg.gbm.n_steps, "market");
    double days_per_year = kTradingDaysPerYear;
    read(market, "trading_days_per_year", days_per_year, "market");
    cfg.daily.s0 = cfg.gbm.s0;
    cfg.daily.sigma_daily = DailySpec::daily_from_annual(cfg.gbm.sigma_annual, days_per_year);
    read(market, "sigma_daily", cfg.daily.sigma_daily, "market");
    read(market, "drift_correction", cfg.daily.drift_correction, "market");

    const Json& contract = detail::section(root, "contract");
    read(contract, "n_min", cfg.contract.n_min, "contract");
    read(contract, "n_max", cfg.contract.n_max, "contract");
    read(contract, "f_min", cfg.contract.f_min, "contract");
    read(contract, "f_max", cfg.contract.f_max, "contract");
    read(contract, "n_ex", cfg.contract.n_ex, "contract");
    read(contract, "v_min", cfg.contract.v_min, "contract");
    read(contract, "v_max", cfg.contract.v_max, "contract");
    read(contract, "s_max", cfg.contract.s_max, "contract");
    read(contract, "allow_trading_on_suspended_days", cfg.contract.allow_trading_on_suspended_days, "contract");
    std::string stop_check = "after_trade";
    read(contract, "stop_check", stop_check, "contract");
    if (stop_check == "after_trade") cfg.stop_check = StopCheck::AfterTrade;
    else if (stop_check == "before_trade") cfg.stop_check = StopCheck::BeforeTrade;
    else throw ValidationError("contract.stop_check: expected after_trade or before_trade");
    cfg.daily.n_days = cfg.contract.n_max;

    if (root.contains("policy")) {
        Json pol = root.at("policy");
        // optimize mode always tunes its single policy
        if (cfg.mode == Mode::Optimize && pol.is_object() && !pol.contains("optimize")) pol["optimize"] = true;
        cfg.policy = detail::parse_policy(pol, "policy");
    }
    if (root.contains("policies")) {
        const Json& list = root.at("policies");
        if (!list.is_array()) throw MalformedConfigError("policies: expected an array");
        for (std::size_t i = 0; i < list.size(); ++i)
            cfg.policies.push_back(detail::parse_policy(list[i], "policies[" + std::to_string(i) + "]"));
    }

    const Json& opt = detail::section(root, "optimizer");
    std::string sampler = "tpe";
    read(opt, "sampler", sampler, "optimizer");
    cfg.optimizer.sampler = detail::parse_sampler(sampler);
    read(opt, "n_trials", cfg.optimizer.n_trials, "optimizer");
    read(opt, "n_startup_trials", cfg.optimizer.n_startup_trials, "optimizer");
    read(opt, "n_paths_per_trial", cfg.optimizer.n_paths_per_trial, "optimizer");
    read(opt, "common_random_numbers", cfg.optimizer.common_random_numbers, "optimizer");
    read(opt, "gamma", cfg.optimizer.tpe.gamma, "optimizer");
    read(opt, "n_candidates", cfg.optimizer.tpe.n_candidates, "optimizer");
    read(opt, "max_good", cfg.optimizer.tpe.max_good, "optimizer");
    std::string split = "linear";
    read(opt, "split", split, "optimizer");
    if (split == "sqrt") cfg.optimizer.tpe.split = TpeSplit::SquareRoot;
    else if (split == "linear") cfg.optimizer.tpe.split = TpeSplit::Linear;
    else throw ValidationError("optimizer.split: expected sqrt or linear");
    cfg.optimizer.seed = cfg.seed;
    if (opt.contains("bounds")) {
        std::optional<PolicyFamily> family;
        if (cfg.policy) family = cfg.policy->family;
        cfg.bounds = detail::parse_bounds(opt.at("bounds"), "optimizer.bounds", family);
    }

    const Json& eval = detail::section(root, "eval");
    read(eval, "n_paths", cfg.eval_paths, "eval");
    read(eval, "histogram_bins", cfg.histogram_bins, "eval");

    const Json& toy = detail::section(root, "toy");
    cfg.toy.model = cfg.gbm;
    cfg.toy.seed = cfg.seed;
    cfg.toy.threads = cfg.threads;
    cfg.toy.histogram_bins = cfg.histogram_bins;
    cfg.toy.n_eval_paths = 10000;
    read(toy, "n_train_paths", cfg.toy.n_train_paths, "toy");
    read(toy, "n_eval_paths", cfg.toy.n_eval_paths, "toy");
    read(toy, "ls_degree", cfg.toy.ls_degree, "toy");
    const Json& pde = detail::section(toy, "pde");
    read(pde, "y_min", cfg.toy.pde.y_min, "toy.pde");
    read(pde, "y_max", cfg.toy.pde.y_max, "toy.pde");
    read(pde, "n_y", cfg.toy.pde.n_y, "toy.pde");
    read(pde, "n_t", cfg.toy.pde.n_t, "toy.pde");
    std::string drift = "upwind", obstacle = "policy_iteration";
    read(pde, "drift", drift, "toy.pde");
    read(pde, "obstacle", obstacle, "toy.pde");
    if (drift == "upwind") cfg.toy.pde.drift = DriftScheme::Upwind;
    else if (drift == "central") cfg.toy.pde.drift = DriftScheme::Central;
    else throw ValidationError("toy.pde.drift: expected upwind or central");
    if (obstacle == "policy_iteration") cfg.toy.pde.obstacle = ObstacleMethod::PolicyIteration;
    else if (obstacle == "projection") cfg.toy.pde.obstacle = ObstacleMethod::Projection;
    else throw ValidationError("toy.pde.obstacle: expected policy_iteration or projection");
    std::string orientation = "stop_above";
    read(toy, "frontier_orientation", orientation, "toy");
    if (orientation == "stop_above") cfg.toy.ohs_orientation = FrontierOrientation::StopAbove;
    else if (orientation == "as_printed") cfg.toy.ohs_orientation = FrontierOrientation::AsPrinted;
    else throw ValidationError("toy.frontier_orientation: expected stop_above or as_printed");
    cfg.toy.ohs = cfg.optimizer;
    if (toy.contains("bounds")) cfg.toy.ohs_space = detail::parse_bounds(toy.at("bounds"), "toy.bounds", std::nullopt);

    const Json& sim = detail::section(root, "simulate");
    read(sim, "model", cfg.simulate_model, "simulate");
    read(sim, "n_paths", cfg.simulate_paths, "simulate");

    // Cross-field validation before any computation.
    cfg.gbm.validate();
    cfg.daily.validate();
    cfg.contract.validate();
    cfg.optimizer.validate();
    require(cfg.eval_paths >= 1, "eval.n_paths must be >= 1");
    require(cfg.histogram_bins >= 1, "eval.histogram_bins must be >= 1");
    require(cfg.simulate_model == "daily" || cfg.simulate_model == "gbm", "simulate.model: expected daily or gbm");

    switch (cfg.mode) {
        case Mode::Evaluate:
            if (!cfg.policy) throw ValidationError("evaluate: a 'policy' section is required");
            if (!cfg.policy->params) throw ValidationError("evaluate: policy needs explicit params");
            break;
        case Mode::Optimize:
            if (!cfg.policy) throw ValidationError("optimize: a 'policy' section naming the family is required");
            if (!is_heuristic(cfg.policy->family))
                throw ValidationError("optimize: family " + std::string(family_name(cfg.policy->family)) +
                                      " has no parameters to optimize");
            if (!cfg.bounds) throw MissingBoundsError("optimize: optimizer.bounds is required (use \"default\" for built-in bounds)");
            break;
        case Mode::ComparePolicies:
            if (cfg.policies.empty()) throw ValidationError("compare-policies: 'policies' list is empty");
            break;
        case Mode::ToyLs:
        case Mode::ToyOhs:
        case Mode::ToyCompare:
        case Mode::ToyPde:
            cfg.toy.validate();
            break;
        case Mode::Simulate:
            require(cfg.simulate_paths >= 1, "simulate.n_paths must be >= 1");
            break;
    }
    return cfg;
}

/// FNV-1a over the canonical dump of the effective config.
inline std::uint64_t config_hash(const Json& j) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline Json policy_to_json(const PolicyParams& p) {
    Json j;
    j["family"] = std::string(family_name(p.family));
    Json params = Json::object();
    const auto names = family_parameters(p.family);
    for (std::size_t i = 0; i < names.size(); ++i) params[std::string(names[i])] = p.values[i];
    if (!names.empty()) j["params"] = params;
    return j;
}

}  // namespace buyback
