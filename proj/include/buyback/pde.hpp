#pragma once

// Backward implicit Euler for the optimal stopping problem on Y = A/S:
//
//   min{ -u_t - 0.5 s^2 y^2 u_yy - (s^2 y + (1 - y)/t) u_y , u - y } = 0,
//   u(T, y) = y,
//
// with zero-flux (Neumann) boundaries. Each time step solves the discrete
// obstacle problem exactly by policy iteration on the tridiagonal system.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "path_sim.hpp"

namespace buyback {

enum class DriftScheme { Upwind, Central };
enum class ObstacleMethod { PolicyIteration, Projection };

struct PdeSolverConfig {
    double y_min = 0.8;
    double y_max = 1.2;
    int n_y = 401;
    int n_t = 1000;
    DriftScheme drift = DriftScheme::Upwind;
    ObstacleMethod obstacle = ObstacleMethod::PolicyIteration;
    double exercise_tol = 1e-8;  // relative
    int max_policy_iterations = 200;

    void validate() const {
        require(std::isfinite(y_min) && std::isfinite(y_max) && y_min < 1.0 && 1.0 < y_max,
                "PdeSolverConfig: need y_min < 1 < y_max");
        require(y_min > 0.0, "PdeSolverConfig: y_min must be > 0");
        require(n_y >= 3, "PdeSolverConfig: n_y must be >= 3");
        require(n_t >= 1, "PdeSolverConfig: n_t must be >= 1");
        require(exercise_tol >= 0.0, "PdeSolverConfig: exercise_tol must be >= 0");
        require(max_policy_iterations >= 1, "PdeSolverConfig: max_policy_iterations must be >= 1");
    }

    [[nodiscard]] double dy() const { return (y_max - y_min) / (n_y - 1); }
};

/// Grid solution. Time slices run from t_1 = T/n_t up to T (t = 0 is excluded
/// because the averaging drift is singular there).
struct PdeSolution {
    std::vector<double> t_nodes;
    std::vector<double> y_nodes;
    std::vector<double> u;        // row-major [time][space]
    std::vector<char> exercise;   // same layout
    double exercise_tol = 1e-8;
    int max_policy_iterations_used = 0;

    [[nodiscard]] std::size_t n_t() const { return t_nodes.size(); }
    [[nodiscard]] std::size_t n_y() const { return y_nodes.size(); }
    [[nodiscard]] double value(std::size_t i, std::size_t j) const { return u[i * n_y() + j]; }
    [[nodiscard]] bool is_exercise(std::size_t i, std::size_t j) const { return exercise[i * n_y() + j] != 0; }
    [[nodiscard]] double horizon() const { return t_nodes.back(); }

    [[nodiscard]] bool within_tol(double value, double y) const {
        return value - y <= exercise_tol * std::max(1.0, std::abs(y));
    }

    /// Bilinear interpolation, coordinates clamped to the grid.
    [[nodiscard]] double value_at(double t, double y) const {
        t = std::clamp(t, t_nodes.front(), t_nodes.back());
        y = std::clamp(y, y_nodes.front(), y_nodes.back());
        const auto ti = bracket(t_nodes, t);
        const auto yj = bracket(y_nodes, y);
        const double wt = t_nodes.size() > 1 ? (t - t_nodes[ti]) / (t_nodes[ti + 1] - t_nodes[ti]) : 0.0;
        const double wy = (y - y_nodes[yj]) / (y_nodes[yj + 1] - y_nodes[yj]);
        const std::size_t ti1 = t_nodes.size() > 1 ? ti + 1 : ti;
        const double lo = (1 - wy) * value(ti, yj) + wy * value(ti, yj + 1);
        const double hi = (1 - wy) * value(ti1, yj) + wy * value(ti1, yj + 1);
        return (1 - wt) * lo + wt * hi;
    }

    /// The contract value estimate u(0+, 1), read on the first time slice.
    [[nodiscard]] double value_at_origin() const { return value_at(t_nodes.front(), 1.0); }

    void write_csv(std::ostream& out) const;

private:
    static std::size_t bracket(const std::vector<double>& grid, double x) {
        if (grid.size() < 2) return 0;
        auto it = std::upper_bound(grid.begin(), grid.end(), x);
        auto idx = static_cast<std::size_t>(std::distance(grid.begin(), it));
        return std::min(idx == 0 ? 0 : idx - 1, grid.size() - 2);
    }
};

namespace detail {

struct Tridiagonal {
    std::vector<double> lower, diag, upper;
    explicit Tridiagonal(std::size_t n) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}
};

// Thomas algorithm; the systems assembled here are M-matrices so no pivoting
// is needed.
inline std::vector<double> solve_tridiagonal(const Tridiagonal& m, const std::vector<double>& rhs) {
    const std::size_t n = rhs.size();
    std::vector<double> c(n), d(n), x(n);
    c[0] = m.upper[0] / m.diag[0];
    d[0] = rhs[0] / m.diag[0];
    for (std::size_t j = 1; j < n; ++j) {
        const double denom = m.diag[j] - m.lower[j] * c[j - 1];
        c[j] = j + 1 < n ? m.upper[j] / denom : 0.0;
        d[j] = (rhs[j] - m.lower[j] * d[j - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t j = n - 1; j-- > 0;) x[j] = d[j] - c[j] * x[j + 1];
    return x;
}

}  // namespace detail

/// Assembles (I - dt L(t)) for the Y-operator at time t, Neumann ghost nodes folded in.
inline detail::Tridiagonal assemble_implicit_operator(double sigma, double t, double dt,
                                                       const std::vector<double>& y, double dy,
                                                       DriftScheme scheme) {
    const std::size_t n = y.size();
    detail::Tridiagonal m(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double diffusion = 0.5 * sigma * sigma * y[j] * y[j] / (dy * dy);
        const double b = sigma * sigma * y[j] + (1.0 - y[j]) / t;
        double lo = 0.0, up = 0.0, di = 0.0;
        if (scheme == DriftScheme::Upwind) {
            lo = -dt * (diffusion + std::max(-b, 0.0) / dy);
            up = -dt * (diffusion + std::max(b, 0.0) / dy);
            di = 1.0 + dt * (2.0 * diffusion + std::abs(b) / dy);
        } else {
            lo = -dt * (diffusion - b / (2.0 * dy));
            up = -dt * (diffusion + b / (2.0 * dy));
            di = 1.0 + dt * 2.0 * diffusion;
            if (lo > 0.0 || up > 0.0) {
                std::ostringstream msg;
                msg << "solve_qvi: central drift differencing loses diagonal dominance at t=" << t
                    << ", y=" << y[j] << " (drift " << b << ", dt " << dt << ", dy " << dy
                    << "); refine dy, coarsen the singular early slices, or use the upwind scheme";
                throw ConfigurationError(msg.str());
            }
        }
        // Zero-derivative ghost node: u_{-1} = u_1, u_{n} = u_{n-2}.
        if (j == 0) {
            up += lo;
            lo = 0.0;
        } else if (j == n - 1) {
            lo += up;
            up = 0.0;
        }
        m.lower[j] = lo;
        m.diag[j] = di;
        m.upper[j] = up;
    }
    return m;
}

inline PdeSolution solve_qvi(const GbmSpec& model, const PdeSolverConfig& cfg) {
    model.validate();
    cfg.validate();

    const auto ny = static_cast<std::size_t>(cfg.n_y);
    const auto nt = static_cast<std::size_t>(cfg.n_t);
    const double horizon = model.horizon;
    const double dt = horizon / cfg.n_t;
    const double dy = cfg.dy();
    const double sigma = model.sigma_annual;

    PdeSolution sol;
    sol.exercise_tol = cfg.exercise_tol;
    sol.y_nodes.resize(ny);
    for (std::size_t j = 0; j < ny; ++j) sol.y_nodes[j] = cfg.y_min + dy * static_cast<double>(j);
    sol.y_nodes.back() = cfg.y_max;
    sol.t_nodes.resize(nt);
    for (std::size_t i = 0; i < nt; ++i) sol.t_nodes[i] = horizon * static_cast<double>(i + 1) / cfg.n_t;
    sol.t_nodes.back() = horizon;
    sol.u.assign(nt * ny, 0.0);
    sol.exercise.assign(nt * ny, 0);

    const auto& y = sol.y_nodes;
    std::vector<double> next(y.begin(), y.end());  // terminal slice u(T, y) = y
    std::copy(next.begin(), next.end(), sol.u.begin() + static_cast<std::ptrdiff_t>((nt - 1) * ny));
    std::vector<char> active(ny, 1);  // obstacle rows, warm-started from the later slice

    for (std::size_t i = nt - 1; i-- > 0;) {
        const auto op = assemble_implicit_operator(sigma, sol.t_nodes[i], dt, y, dy, cfg.drift);
        std::vector<double> current;

        if (cfg.obstacle == ObstacleMethod::Projection) {
            current = detail::solve_tridiagonal(op, next);
            for (std::size_t j = 0; j < ny; ++j) current[j] = std::max(current[j], y[j]);
        } else {
            constexpr double kSwitchTol = 1e-13;
            int iteration = 0;
            for (;; ++iteration) {
                detail::Tridiagonal sys = op;
                std::vector<double> rhs = next;
                for (std::size_t j = 0; j < ny; ++j) {
                    if (!active[j]) continue;
                    sys.lower[j] = 0.0;
                    sys.upper[j] = 0.0;
                    sys.diag[j] = 1.0;
                    rhs[j] = y[j];
                }
                current = detail::solve_tridiagonal(sys, rhs);

                bool changed = false;
                for (std::size_t j = 0; j < ny; ++j) {
                    double pde = op.diag[j] * current[j] - next[j];
                    if (j > 0) pde += op.lower[j] * current[j - 1];
                    if (j + 1 < ny) pde += op.upper[j] * current[j + 1];
                    const char want = (current[j] - y[j] < pde - kSwitchTol) ? 1 : 0;
                    if (want != active[j]) {
                        active[j] = want;
                        changed = true;
                    }
                }
                if (!changed) break;
                if (iteration + 1 >= cfg.max_policy_iterations)
                    throw ConfigurationError("solve_qvi: policy iteration did not converge at t=" +
                                             std::to_string(sol.t_nodes[i]));
            }
            sol.max_policy_iterations_used = std::max(sol.max_policy_iterations_used, iteration + 1);
            // Obstacle rows hold y exactly; continuation rows are >= y up to rounding.
            for (std::size_t j = 0; j < ny; ++j) current[j] = active[j] ? y[j] : std::max(current[j], y[j]);
        }

        std::copy(current.begin(), current.end(), sol.u.begin() + static_cast<std::ptrdiff_t>(i * ny));
        next = std::move(current);
    }

    for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t j = 0; j < ny; ++j)
            sol.exercise[i * ny + j] = sol.within_tol(sol.value(i, j), y[j]) ? 1 : 0;
    return sol;
}

/// Stop iff the interpolated value function touches the obstacle. Always true at T.
inline bool pde_stop_decision(const PdeSolution& sol, double t, double y) {
    if (t >= sol.horizon()) return true;
    const double yc = std::clamp(y, sol.y_nodes.front(), sol.y_nodes.back());
    return sol.within_tol(sol.value_at(t, yc), yc);
}

// Columns: t,y,u,exercise
inline void PdeSolution::write_csv(std::ostream& out) const {
    out << "t,y,u,exercise\n";
    for (std::size_t i = 0; i < n_t(); ++i)
        for (std::size_t j = 0; j < n_y(); ++j)
            out << format_double(t_nodes[i]) << ',' << format_double(y_nodes[j]) << ','
                << format_double(value(i, j)) << ',' << (is_exercise(i, j) ? 1 : 0) << '\n';
}

}  // namespace buyback
