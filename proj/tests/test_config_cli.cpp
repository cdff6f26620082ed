#include <buyback/cli.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace buyback;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
    fs::path dir;
    explicit Sandbox(const std::string& name) : dir(fs::temp_directory_path() / ("buyback_cli_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }

    fs::path write(const std::string& file, const std::string& text) const {
        const auto p = dir / file;
        std::ofstream(p) << text;
        return p;
    }
};

int run_cli(std::vector<std::string> args, std::string* err_text = nullptr) {
    args.insert(args.begin(), "buyback_cli");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
    if (err_text) *err_text = err.str();
    return code;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

const char* kEvaluateConfig = R"({
  "mode": "evaluate",
  "seed": 17,
  "market": {"s0": 10, "sigma_annual": 0.2, "drift_correction": true},
  "contract": {"n_min": 60, "n_max": 60, "f_min": 200e6, "f_max": 200e6, "n_ex": 40},
  "policy": {"family": "Linear"},
  "eval": {"n_paths": 200, "histogram_bins": 20}
})";

}  // namespace

TEST(Config, ParsesSectionsAndDefaults) {
    auto root = Json::parse(kEvaluateConfig);
    const auto cfg = parse_run_config(root);
    EXPECT_EQ(cfg.mode, Mode::Evaluate);
    EXPECT_EQ(cfg.seed, 17u);
    EXPECT_TRUE(cfg.daily.drift_correction);
    EXPECT_DOUBLE_EQ(cfg.daily.sigma_daily, 0.2 / std::sqrt(252.0));
    EXPECT_EQ(cfg.daily.n_days, 60);
    EXPECT_EQ(cfg.eval_paths, 200u);
    EXPECT_TRUE(std::isinf(cfg.contract.v_max));
    ASSERT_TRUE(cfg.policy);
    EXPECT_EQ(cfg.policy->family, PolicyFamily::Linear);
}

TEST(Config, OverridesAndInfinity) {
    auto root = Json::parse(kEvaluateConfig);
    apply_override(root, "contract.v_max=8e6");
    apply_override(root, "contract.s_max=\"inf\"");
    apply_override(root, "policy.family=NoTrade");
    const auto cfg = parse_run_config(root);
    EXPECT_EQ(cfg.contract.v_max, 8e6);
    EXPECT_TRUE(std::isinf(cfg.contract.s_max));
    EXPECT_EQ(cfg.policy->family, PolicyFamily::NoTrade);
    EXPECT_THROW(apply_override(root, "novalue"), MalformedConfigError);
}

TEST(Config, ErrorKinds) {
    auto root = Json::parse(kEvaluateConfig);
    root.erase("seed");
    EXPECT_THROW(parse_run_config(root), ValidationError);
    root = Json::parse(kEvaluateConfig);
    root["mode"] = "price-everything";
    EXPECT_THROW(parse_run_config(root), UnknownModeError);
    root = Json::parse(kEvaluateConfig);
    root["contract"]["n_min"] = "sixty";
    EXPECT_THROW(parse_run_config(root), MalformedConfigError);
    root = Json::parse(kEvaluateConfig);
    root["mode"] = "optimize";
    root["policy"] = Json{{"family", "H1"}, {"optimize", true}};
    EXPECT_THROW(parse_run_config(root), MissingBoundsError);
    root["optimizer"]["bounds"] = Json{{"alpha", {-0.05, 0.05}}};
    EXPECT_THROW(parse_run_config(root), MissingBoundsError);
    root["optimizer"]["bounds"] = "default";
    EXPECT_NO_THROW(parse_run_config(root));
    root["policy"] = Json{{"family", "H1"}, {"params", {{"alpha", 0.01}, {"a", 0}, {"zeta", 1}}}};
    EXPECT_THROW(parse_run_config(root), ValidationError);
}

TEST(Config, BestPolicyJsonRoundTrips) {
    const PolicyParams p(PolicyFamily::H5, {0.02, -1.5, 0.25, -100.0});
    auto root = Json::parse(kEvaluateConfig);
    root["policy"] = policy_to_json(p);
    const auto cfg = parse_run_config(root);
    EXPECT_EQ(cfg.policy->params->values, p.values);
    EXPECT_EQ(config_hash(root), config_hash(Json::parse(root.dump())));
}

TEST(Cli, EvaluateWritesSummaryAndManifest) {
    Sandbox box("evaluate");
    const auto cfg = box.write("eval.json", kEvaluateConfig);
    const auto prefix = (box.dir / "out" / "lin").string();
    ASSERT_EQ(run_cli({"evaluate", "--config", cfg.string(), "--out", prefix}), kExitOk);
    const auto summary = slurp(prefix + "_summary.json");
    EXPECT_NE(summary.find("\"mean_bp\""), std::string::npos);
    const auto manifest = Json::parse(slurp(prefix + "_manifest.json"));
    EXPECT_EQ(manifest.at("seed"), 17);
    EXPECT_EQ(manifest.at("mode"), "evaluate");
    EXPECT_EQ(manifest.at("config_hash").get<std::string>().size(), 16u);
    EXPECT_TRUE(manifest.contains("version"));
    EXPECT_TRUE(fs::exists(prefix + "_payoffs.csv"));
}

TEST(Cli, ExitCodesAndNoOutputsOnFailure) {
    Sandbox box("codes");
    const auto good = box.write("good.json", kEvaluateConfig);
    auto bad_root = Json::parse(kEvaluateConfig);
    bad_root["contract"]["f_min"] = 300e6;
    const auto bad = box.write("bad.json", bad_root.dump());
    const auto broken = box.write("broken.json", "{ \"mode\": \"evaluate\", ");
    auto opt_root = Json::parse(kEvaluateConfig);
    opt_root["policy"] = Json{{"family", "H1"}, {"optimize", true}};
    const auto no_bounds = box.write("nobounds.json", opt_root.dump());

    const auto out = (box.dir / "out" / "run").string();
    std::string err;
    EXPECT_EQ(run_cli({"evaluate", "--config", bad.string(), "--out", out}, &err), kExitValidation);
    EXPECT_NE(err.find("f_min"), std::string::npos);
    EXPECT_FALSE(fs::exists(box.dir / "out"));

    EXPECT_EQ(run_cli({"price-everything", "--config", good.string(), "--out", out}, &err), kExitUnknownMode);
    EXPECT_NE(err.find("unknown mode"), std::string::npos);
    EXPECT_EQ(run_cli({"evaluate", "--config", broken.string(), "--out", out}, &err), kExitMalformed);
    EXPECT_EQ(run_cli({"evaluate", "--config", (box.dir / "missing.json").string(), "--out", out}), kExitMalformed);
    EXPECT_EQ(run_cli({"optimize", "--config", no_bounds.string(), "--out", out}, &err), kExitMissingBounds);
    EXPECT_NE(err.find("bounds"), std::string::npos);
    EXPECT_FALSE(fs::exists(box.dir / "out"));

    EXPECT_EQ(run_cli({"evaluate"}), kExitUsage);
    EXPECT_EQ(run_cli({"--help"}), kExitOk);
}

TEST(Cli, RerunsAreByteIdentical) {
    Sandbox box("rerun");
    auto root = Json::parse(kEvaluateConfig);
    root["mode"] = "compare-policies";
    root["contract"]["f_max"] = 250e6;
    root["policies"] = Json::array({Json{{"family", "Linear"}}, Json{{"family", "MinMaxTarget"}},
                                    Json{{"family", "H1"}, {"optimize", true}}});
    root["optimizer"] = Json{{"n_trials", 30}, {"n_paths_per_trial", 100}};
    const auto cfg = box.write("cmp.json", root.dump());
    const auto a = box.dir / "a" / "cmp";
    const auto b = box.dir / "b" / "cmp";
    ASSERT_EQ(run_cli({"compare-policies", "--config", cfg.string(), "--out", a.string(), "--threads", "2"}), 0);
    ASSERT_EQ(run_cli({"compare-policies", "--config", cfg.string(), "--out", b.string(), "--threads", "1"}), 0);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(box.dir / "a")) {
        if (entry.path().extension() != ".csv") continue;
        const auto twin = box.dir / "b" / entry.path().filename();
        ASSERT_TRUE(fs::exists(twin)) << twin;
        EXPECT_EQ(slurp(entry.path()), slurp(twin)) << entry.path().filename();
        ++compared;
    }
    EXPECT_EQ(compared, 10u);
    const auto table = slurp(a.string() + "_table.csv");
    EXPECT_EQ(table.substr(0, table.find('\n')), "policy,pnl_million,mean_bp,std_bp,params");
}

TEST(Cli, SeedFlagChangesResults) {
    Sandbox box("seed");
    const auto cfg = box.write("eval.json", kEvaluateConfig);
    const auto a = (box.dir / "a").string(), b = (box.dir / "b").string();
    ASSERT_EQ(run_cli({"evaluate", "--config", cfg.string(), "--out", a}), 0);
    ASSERT_EQ(run_cli({"evaluate", "--config", cfg.string(), "--out", b, "--seed", "18", "--paths", "150"}), 0);
    EXPECT_NE(slurp(a + "_payoffs.csv"), slurp(b + "_payoffs.csv"));
    EXPECT_EQ(Json::parse(slurp(b + "_manifest.json")).at("seed"), 18);
}

TEST(Cli, SimulateAndToyModes) {
    Sandbox box("modes");
    auto root = Json::parse(kEvaluateConfig);
    root["simulate"] = Json{{"model", "daily"}, {"n_paths", 2}};
    root["toy"] = Json{{"n_train_paths", 300}, {"n_eval_paths", 300}, {"pde", {{"n_y", 101}, {"n_t", 200}}}};
    root["optimizer"] = Json{{"n_trials", 25}};
    const auto cfg = box.write("modes.json", root.dump());
    const auto out = [&](const char* name) { return (box.dir / name).string(); };

    ASSERT_EQ(run_cli({"simulate", "--config", cfg.string(), "--out", out("sim")}), 0);
    EXPECT_TRUE(fs::exists(out("sim") + "_paths.csv"));
    EXPECT_TRUE(fs::exists(out("sim") + "_trace_1.csv"));

    ASSERT_EQ(run_cli({"toy-pde", "--config", cfg.string(), "--out", out("pde")}), 0);
    EXPECT_TRUE(fs::exists(out("pde") + "_pde.csv"));
    ASSERT_EQ(run_cli({"toy-ls", "--config", cfg.string(), "--out", out("ls")}), 0);
    EXPECT_TRUE(fs::exists(out("ls") + "_ls_coefficients.csv"));
    ASSERT_EQ(run_cli({"toy-ohs", "--config", cfg.string(), "--out", out("ohs")}), 0);
    EXPECT_TRUE(fs::exists(out("ohs") + "_ohs_trials.csv"));
    ASSERT_EQ(run_cli({"toy-compare", "--config", cfg.string(), "--out", out("cmp")}), 0);
    const auto table = slurp(out("cmp") + "_table.csv");
    EXPECT_EQ(table.substr(0, table.find('\n')), "method,mean,stddev");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
}

TEST(Cli, OptimizeWritesReusableBestPolicy) {
    Sandbox box("optimize");
    auto root = Json::parse(kEvaluateConfig);
    root["policy"] = Json{{"family", "H1"}};
    root["optimizer"] = Json{{"n_trials", 25}, {"n_paths_per_trial", 100}, {"bounds", "default"}};
    const auto cfg = box.write("opt.json", root.dump());
    const auto prefix = (box.dir / "opt").string();
    std::string err;
    ASSERT_EQ(run_cli({"optimize", "--config", cfg.string(), "--out", prefix, "--trials", "20"}, &err), 0) << err;
    const auto trials = slurp(prefix + "_trials.csv");
    EXPECT_EQ(std::count(trials.begin(), trials.end(), '\n'), 21);
    const auto best = prefix + "_best_policy.json";
    ASSERT_TRUE(fs::exists(best));
    ASSERT_EQ(run_cli({"evaluate", "--config", best, "--out", (box.dir / "reeval").string()}, &err), 0) << err;
}

TEST(Cli, ExecutablePropagatesExitCode) {
    Sandbox box("exe");
    auto bad_root = Json::parse(kEvaluateConfig);
    bad_root["contract"]["f_min"] = 300e6;
    const auto bad = box.write("bad.json", bad_root.dump());
    const std::string cmd = std::string(BUYBACK_CLI_PATH) + " evaluate --config " + bad.string() + " --out " +
                            (box.dir / "x").string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), kExitValidation);
}
