#pragma once

// Derivative-free maximisation over box-bounded parameter vectors with a
// scrambled Sobol sampler and a univariate Tree-structured Parzen Estimator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace buyback {

struct Dimension {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
};

struct SearchSpace {
    std::vector<Dimension> dims;

    void validate() const {
        require(!dims.empty(), "SearchSpace: at least one dimension required");
        for (const auto& d : dims)
            require(std::isfinite(d.lower) && std::isfinite(d.upper) && d.lower < d.upper,
                    "SearchSpace: need lower < upper for '" + d.name + "'");
    }

    [[nodiscard]] std::size_t size() const { return dims.size(); }

    [[nodiscard]] bool contains(std::span<const double> x) const {
        if (x.size() != dims.size()) return false;
        for (std::size_t d = 0; d < dims.size(); ++d)
            if (!(x[d] >= dims[d].lower && x[d] <= dims[d].upper)) return false;
        return true;
    }

    [[nodiscard]] std::vector<double> from_unit(std::span<const double> u) const {
        std::vector<double> x(dims.size());
        for (std::size_t d = 0; d < dims.size(); ++d)
            x[d] = std::clamp(dims[d].lower + u[d] * (dims[d].upper - dims[d].lower), dims[d].lower, dims[d].upper);
        return x;
    }
};

// ---------------------------------------------------------------------------
// Sobol sequence (Joe & Kuo direction numbers), optional digital shift

namespace detail {

struct SobolPolynomial {
    unsigned degree;
    unsigned coeffs;
    std::array<std::uint32_t, 5> m;
};

// Dimension 1 is the van der Corput sequence; the rest use primitive polynomials.
inline constexpr std::array<SobolPolynomial, 9> kSobolTable{{
    {1, 0, {1, 0, 0, 0, 0}},
    {2, 1, {1, 3, 0, 0, 0}},
    {3, 1, {1, 3, 1, 0, 0}},
    {3, 2, {1, 1, 1, 0, 0}},
    {4, 1, {1, 1, 3, 3, 0}},
    {4, 4, {1, 3, 5, 13, 0}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
}};

inline constexpr std::size_t kSobolMaxDims = kSobolTable.size() + 1;

inline std::array<std::uint32_t, 32> sobol_directions(std::size_t dim) {
    std::array<std::uint32_t, 32> v{};
    if (dim == 0) {
        for (unsigned k = 0; k < 32; ++k) v[k] = 1u << (31 - k);
        return v;
    }
    const auto& poly = kSobolTable[dim - 1];
    const unsigned s = poly.degree;
    for (unsigned k = 0; k < s; ++k) v[k] = poly.m[k] << (31 - k);
    for (unsigned k = s; k < 32; ++k) {
        std::uint32_t value = v[k - s] ^ (v[k - s] >> s);
        for (unsigned i = 1; i < s; ++i)
            if ((poly.coeffs >> (s - 1 - i)) & 1u) value ^= v[k - i];
        v[k] = value;
    }
    return v;
}

}  // namespace detail

/// Point `index` of the d-dimensional Sobol sequence in [0,1)^d. A non-zero
/// seed applies a random digital (XOR) shift per dimension.
inline std::vector<double> sobol_point(std::size_t dims, std::uint64_t index, std::uint64_t seed = 0) {
    require(dims >= 1 && dims <= detail::kSobolMaxDims,
            "sobol_point: supports 1.." + std::to_string(detail::kSobolMaxDims) + " dimensions");
    std::vector<double> point(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        const auto v = detail::sobol_directions(d);
        std::uint32_t x = 0;
        for (unsigned bit = 0; bit < 32 && (index >> bit) != 0; ++bit)
            if ((index >> bit) & 1u) x ^= v[bit];
        if (seed != 0) x ^= static_cast<std::uint32_t>(mix64(seed + 0x51ED27ULL * (d + 1)) >> 32);
        point[d] = static_cast<double>(x) / 4294967296.0;
    }
    return point;
}

inline std::vector<double> qmc_sample(const SearchSpace& space, std::uint64_t index, std::uint64_t seed) {
    space.validate();
    return space.from_unit(sobol_point(space.size(), index, seed));
}

// ---------------------------------------------------------------------------
// Trials

struct TrialRecord {
    std::size_t index = 0;
    std::vector<double> params;
    double objective = 0.0;
    double stderr_ = 0.0;
    bool failed = false;
    double best_so_far = -std::numeric_limits<double>::infinity();
};

enum class Sampler { QuasiRandom, TPE };

// How many of n successful trials are labelled "good":
// Linear -> ceil(gamma * n), SquareRoot -> ceil(gamma * sqrt(n)); both capped at max_good.
enum class TpeSplit { Linear, SquareRoot };

struct TpeSettings {
    double gamma = 0.25;
    int n_candidates = 24;   // draws from l(x) per proposal
    double min_bandwidth_frac = 1e-3;
    TpeSplit split = TpeSplit::Linear;
    int max_good = 25;
};

struct OptimizerConfig {
    Sampler sampler = Sampler::TPE;
    int n_trials = 300;
    int n_startup_trials = 20;
    std::uint64_t seed = 0;
    int n_paths_per_trial = 2000;
    bool common_random_numbers = true;
    TpeSettings tpe;

    void validate() const {
        require(n_trials >= 1, "OptimizerConfig: n_trials must be >= 1");
        require(n_startup_trials >= 0 && n_startup_trials <= n_trials,
                "OptimizerConfig: need 0 <= n_startup_trials <= n_trials");
        require(n_paths_per_trial >= 1, "OptimizerConfig: n_paths_per_trial must be >= 1");
        require(tpe.gamma > 0.0 && tpe.gamma < 1.0, "OptimizerConfig: tpe gamma must be in (0,1)");
        require(tpe.n_candidates >= 1, "OptimizerConfig: tpe n_candidates must be >= 1");
        require(tpe.max_good >= 1, "OptimizerConfig: tpe max_good must be >= 1");
    }
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// One-dimensional mixture of Gaussians truncated to [lower, upper], plus a
// broad prior component centred in the interval.
class ParzenEstimator {
public:
    ParzenEstimator(std::vector<double> centres, double lower, double upper, double min_bw_frac)
        : lower_(lower), upper_(upper) {
        const double range = upper - lower;
        const auto n = static_cast<double>(centres.size());
        double bandwidth = range;
        if (centres.size() > 1) {
            const double mean = std::accumulate(centres.begin(), centres.end(), 0.0) / n;
            double ss = 0.0;
            for (double c : centres) ss += (c - mean) * (c - mean);
            const double sd = std::sqrt(ss / (n - 1));
            bandwidth = 1.06 * sd * std::pow(n, -0.2);  // Scott's rule
        } else if (centres.size() == 1) {
            bandwidth = 0.5 * range;
        }
        // Floor at range / min(100, n + 1) so a tight good set cannot freeze the search.
        const double floor = std::max(min_bw_frac, 1.0 / std::min(100.0, n + 1.0)) * range;
        bandwidth = std::clamp(bandwidth, floor, range);
        for (double c : centres) components_.push_back({c, bandwidth, 1.0});
        components_.push_back({0.5 * (lower + upper), range, 1.0});  // prior
        double total = 0.0;
        for (auto& k : components_) total += k.weight;
        for (auto& k : components_) {
            k.weight /= total;
            k.mass = normal_cdf((upper_ - k.mu) / k.sigma) - normal_cdf((lower_ - k.mu) / k.sigma);
        }
    }

    [[nodiscard]] double log_pdf(double x) const {
        double density = 0.0;
        for (const auto& k : components_) {
            const double z = (x - k.mu) / k.sigma;
            density += k.weight * std::exp(-0.5 * z * z) / (k.sigma * std::sqrt(2.0 * M_PI) * k.mass);
        }
        return std::log(std::max(density, std::numeric_limits<double>::min()));
    }

    template <class Engine>
    double sample(Engine& engine) const {
        std::uniform_real_distribution<double> pick(0.0, 1.0);
        double r = pick(engine);
        std::size_t idx = 0;
        for (; idx + 1 < components_.size(); ++idx) {
            r -= components_[idx].weight;
            if (r < 0.0) break;
        }
        const auto& k = components_[idx];
        std::normal_distribution<double> normal(k.mu, k.sigma);
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double x = normal(engine);
            if (x >= lower_ && x <= upper_) return x;
        }
        return std::clamp(k.mu, lower_, upper_);
    }

private:
    struct Component {
        double mu, sigma, weight, mass = 1.0;
    };
    double lower_, upper_;
    std::vector<Component> components_;
};

}  // namespace detail

/// Proposes the next point from the trial log. Until `n_startup_trials`
/// successful trials exist it returns the QMC point for `index`.
inline std::vector<double> tpe_sample(const SearchSpace& space, std::span<const TrialRecord> log,
                                      const OptimizerConfig& cfg, std::uint64_t seed, std::uint64_t index) {
    space.validate();
    std::vector<const TrialRecord*> ok;
    for (const auto& t : log)
        if (!t.failed) ok.push_back(&t);
    if (ok.empty() || ok.size() < static_cast<std::size_t>(cfg.n_startup_trials)) return qmc_sample(space, index, seed);

    std::stable_sort(ok.begin(), ok.end(),
                     [](const TrialRecord* a, const TrialRecord* b) { return a->objective > b->objective; });
    const double n_ok = static_cast<double>(ok.size());
    const double raw = cfg.tpe.gamma * (cfg.tpe.split == TpeSplit::SquareRoot ? std::sqrt(n_ok) : n_ok);
    const auto n_good = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(raw)), 1,
                                                static_cast<std::size_t>(cfg.tpe.max_good));

    std::vector<detail::ParzenEstimator> good, bad;
    for (std::size_t d = 0; d < space.size(); ++d) {
        std::vector<double> g, b;
        for (std::size_t i = 0; i < ok.size(); ++i) (i < n_good ? g : b).push_back(ok[i]->params[d]);
        const auto& dim = space.dims[d];
        good.emplace_back(std::move(g), dim.lower, dim.upper, cfg.tpe.min_bandwidth_frac);
        bad.emplace_back(std::move(b), dim.lower, dim.upper, cfg.tpe.min_bandwidth_frac);
    }

    auto engine = RngKey{seed, index}.engine();
    std::vector<double> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cfg.tpe.n_candidates; ++c) {
        std::vector<double> x(space.size());
        double score = 0.0;
        for (std::size_t d = 0; d < space.size(); ++d) {
            x[d] = good[d].sample(engine);
            score += good[d].log_pdf(x[d]) - bad[d].log_pdf(x[d]);
        }
        if (score > best_score) {
            best_score = score;
            best = std::move(x);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Driver

struct ObjectiveValue {
    double value = 0.0;
    double stderr_ = 0.0;
};

using Objective = std::function<ObjectiveValue(std::span<const double>)>;

struct OptimizationResult {
    std::vector<double> best_params;
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<TrialRecord> trials;
};

inline OptimizationResult optimize(const Objective& objective, const SearchSpace& space,
                                   const OptimizerConfig& cfg) {
    space.validate();
    cfg.validate();
    const std::uint64_t sampler_seed = derive_seed(cfg.seed, SeedDomain::Optimizer);

    OptimizationResult result;
    result.trials.reserve(static_cast<std::size_t>(cfg.n_trials));
    for (int t = 0; t < cfg.n_trials; ++t) {
        const auto index = static_cast<std::uint64_t>(t);
        TrialRecord trial;
        trial.index = static_cast<std::size_t>(t);
        trial.params = cfg.sampler == Sampler::TPE ? tpe_sample(space, result.trials, cfg, sampler_seed, index)
                                                   : qmc_sample(space, index, sampler_seed);
        const ObjectiveValue v = objective(trial.params);
        trial.objective = v.value;
        trial.stderr_ = v.stderr_;
        trial.failed = !std::isfinite(v.value);
        if (!trial.failed && trial.objective > result.best_value) {
            result.best_value = trial.objective;
            result.best_params = trial.params;
        }
        trial.best_so_far = result.best_value;
        result.trials.push_back(std::move(trial));
    }
    return result;
}

// Columns: trial,<param names...>,objective,stderr,failed,best_so_far
inline void write_trials_csv(std::ostream& out, const SearchSpace& space, std::span<const TrialRecord> trials) {
    out << "trial";
    for (const auto& d : space.dims) out << ',' << d.name;
    out << ",objective,stderr,failed,best_so_far\n";
    for (const auto& t : trials) {
        out << t.index << ',' << join_doubles(t.params) << ',' << format_double(t.objective) << ','
            << format_double(t.stderr_) << ',' << (t.failed ? 1 : 0) << ',' << format_double(t.best_so_far) << '\n';
    }
}

}  // namespace buyback
