#pragma once

// Stopping rules for the toy problem sup E[Y_tau]: regression Monte Carlo
// (Longstaff-Schwartz), the parametric frontier family, and a generic Monte
// Carlo evaluator shared by every rule (including the PDE-induced one).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "path_sim.hpp"

namespace buyback {

// ---------------------------------------------------------------------------
// Longstaff-Schwartz

struct LsModel {
    int degree = 2;
    // coefficients[n] are the monomial coefficients {1, y, y^2, ...} of the
    // continuation value at step n, for n = 0 .. N-1.
    std::vector<std::vector<double>> coefficients;
    // Steps where the regression was rank deficient and the mean was used.
    std::vector<bool> fallback;
    double in_sample_value = 0.0;

    [[nodiscard]] std::size_t n_steps() const { return coefficients.size(); }

    [[nodiscard]] double continuation(std::size_t step, double y) const {
        const auto& c = coefficients.at(step);
        double value = 0.0;
        for (std::size_t p = c.size(); p-- > 0;) value = value * y + c[p];
        return value;
    }

    [[nodiscard]] bool any_fallback() const {
        return std::find(fallback.begin(), fallback.end(), true) != fallback.end();
    }
};

inline LsModel fit_longstaff_schwartz(const YPathSet& paths, int degree = 2) {
    require(degree >= 0, "fit_longstaff_schwartz: degree must be >= 0");
    require(paths.n_paths >= 2, "fit_longstaff_schwartz: need at least 2 paths");
    require(paths.n_nodes() >= 3, "fit_longstaff_schwartz: need a grid with at least 2 steps");

    const std::size_t m = paths.n_paths;
    const std::size_t last = paths.n_nodes() - 1;
    const auto n_coef = static_cast<Eigen::Index>(degree + 1);

    LsModel model;
    model.degree = degree;
    model.coefficients.assign(last, std::vector<double>(static_cast<std::size_t>(n_coef), 0.0));
    model.fallback.assign(last, false);

    // Realized value of following the fitted policy from step n+1 onward.
    std::vector<double> cashflow(m);
    for (std::size_t i = 0; i < m; ++i) cashflow[i] = paths.at(i, last);

    Eigen::MatrixXd basis(static_cast<Eigen::Index>(m), n_coef);
    Eigen::VectorXd target(static_cast<Eigen::Index>(m));
    for (std::size_t n = last; n-- > 0;) {
        for (std::size_t i = 0; i < m; ++i) {
            const double y = paths.at(i, n);
            double power = 1.0;
            for (Eigen::Index p = 0; p < n_coef; ++p) {
                basis(static_cast<Eigen::Index>(i), p) = power;
                power *= y;
            }
            target(static_cast<Eigen::Index>(i)) = cashflow[i];
        }

        auto& coef = model.coefficients[n];
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
        if (qr.rank() < n_coef) {
            const double mean = std::accumulate(cashflow.begin(), cashflow.end(), 0.0) / static_cast<double>(m);
            std::fill(coef.begin(), coef.end(), 0.0);
            coef[0] = mean;
            model.fallback[n] = true;
        } else {
            const Eigen::VectorXd solution = qr.solve(target);
            for (Eigen::Index p = 0; p < n_coef; ++p) coef[static_cast<std::size_t>(p)] = solution(p);
        }

        for (std::size_t i = 0; i < m; ++i) {
            const double y = paths.at(i, n);
            if (y >= model.continuation(n, y)) cashflow[i] = y;
        }
    }
    model.in_sample_value = std::accumulate(cashflow.begin(), cashflow.end(), 0.0) / static_cast<double>(m);
    return model;
}

/// Stop iff the immediate value y is at least the regressed continuation value.
inline bool ls_stop_decision(const LsModel& model, std::size_t step, double y) {
    if (step >= model.n_steps()) return true;
    return y >= model.continuation(step, y);
}

// ---------------------------------------------------------------------------
// Parametric frontier

// Which side of the frontier triggers a stop. `AsPrinted` keeps
//   f = b1 + b2 (1 - t/T) + b3 (1 - t/T)^2 - (y - 1)
// literally, which stops on low ratios. `StopAbove` flips the sign,
//   f = (y - 1) - [b1 + b2 (1 - t/T) + b3 (1 - t/T)^2],
// so that the rule stops once Y climbs above a time-dependent threshold.
enum class FrontierOrientation { AsPrinted, StopAbove };

struct FrontierParams {
    std::array<double, 3> beta{0.0, 0.0, 0.0};
    FrontierOrientation orientation = FrontierOrientation::AsPrinted;

    void validate() const {
        for (double b : beta) require(std::isfinite(b), "FrontierParams: components must be finite");
    }
};

inline double frontier_value(const FrontierParams& p, double t, double y, double horizon) {
    const double s = 1.0 - t / horizon;
    const double threshold = p.beta[0] + p.beta[1] * s + p.beta[2] * s * s;
    return p.orientation == FrontierOrientation::AsPrinted ? threshold - (y - 1.0) : (y - 1.0) - threshold;
}

inline bool frontier_stop_decision(const FrontierParams& p, double t, double y, double horizon) {
    if (t >= horizon) return true;
    return frontier_value(p, t, y, horizon) > 0.0;
}

// ---------------------------------------------------------------------------
// Monte Carlo evaluation of a stopping rule

struct StopPolicyResult {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation over paths
    std::vector<double> values;
    std::vector<std::size_t> stop_steps;

    [[nodiscard]] double std_error() const {
        return values.empty() ? 0.0 : stddev / std::sqrt(static_cast<double>(values.size()));
    }
};

inline void summarize(StopPolicyResult& r) {
    const auto n = static_cast<double>(r.values.size());
    r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : r.values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / n);
}

/// `decision(step, t, y)` is queried along each path; the path's value is Y at
/// the first step where it returns true, or Y_T if it never does.
template <class Decision>
StopPolicyResult evaluate_stop_policy(Decision&& decision, const YPathSet& paths,
                                      std::size_t threads = 1) {
    require(paths.n_paths >= 1, "evaluate_stop_policy: need at least one path");
    StopPolicyResult result;
    result.values.resize(paths.n_paths);
    result.stop_steps.resize(paths.n_paths);
    const std::size_t last = paths.n_nodes() - 1;
    parallel_for(paths.n_paths, threads, [&](std::size_t i) {
        std::size_t k = 0;
        for (; k < last; ++k)
            if (decision(k, paths.times[k], paths.at(i, k))) break;
        result.values[i] = paths.at(i, k);
        result.stop_steps[i] = k;
    });
    summarize(result);
    return result;
}

}  // namespace buyback
