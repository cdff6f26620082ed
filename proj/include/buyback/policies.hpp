#pragma once

// Benchmark and heuristic execution/stopping policies for the daily contract.
//
// Heuristic families share the execution rule
//   v_n = 2 / (1 + exp(e_n)) * (F_bar - X_n) / (S_n (T_n - n)),  F_bar = (F_min + F_max)/2,
// and differ in the exponent e_n and the stopping threshold on A_n/S_n - 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contract.hpp"
#include "errors.hpp"

namespace buyback {

enum class PolicyFamily { Linear, MinMaxTarget, NoTrade, H1, H2, H3, H4, H5, H6 };

inline constexpr std::array<PolicyFamily, 9> kAllFamilies{
    PolicyFamily::Linear, PolicyFamily::MinMaxTarget, PolicyFamily::NoTrade,
    PolicyFamily::H1,     PolicyFamily::H2,           PolicyFamily::H3,
    PolicyFamily::H4,     PolicyFamily::H5,           PolicyFamily::H6};

inline std::string_view family_name(PolicyFamily f) {
    switch (f) {
        case PolicyFamily::Linear: return "Linear";
        case PolicyFamily::MinMaxTarget: return "MinMaxTarget";
        case PolicyFamily::NoTrade: return "NoTrade";
        case PolicyFamily::H1: return "H1";
        case PolicyFamily::H2: return "H2";
        case PolicyFamily::H3: return "H3";
        case PolicyFamily::H4: return "H4";
        case PolicyFamily::H5: return "H5";
        case PolicyFamily::H6: return "H6";
    }
    return "?";
}

inline PolicyFamily parse_family(std::string_view name) {
    for (auto f : kAllFamilies)
        if (family_name(f) == name) return f;
    throw ValidationError("unknown policy family '" + std::string(name) + "'");
}

/// Ordered parameter names of each family.
inline std::span<const std::string_view> family_parameters(PolicyFamily f) {
    static constexpr std::array<std::string_view, 0> none{};
    static constexpr std::array<std::string_view, 2> h1{"alpha", "a"};
    static constexpr std::array<std::string_view, 4> h2{"alpha", "beta", "gamma", "a"};
    static constexpr std::array<std::string_view, 3> h3{"alpha", "a", "a1"};
    static constexpr std::array<std::string_view, 4> h4{"alpha", "a", "a1", "a2"};
    static constexpr std::array<std::string_view, 4> h5{"alpha", "a", "a1", "b"};
    static constexpr std::array<std::string_view, 6> h6{"alpha", "a", "a1", "b", "b1", "c"};
    switch (f) {
        case PolicyFamily::H1: return h1;
        case PolicyFamily::H2: return h2;
        case PolicyFamily::H3: return h3;
        case PolicyFamily::H4: return h4;
        case PolicyFamily::H5: return h5;
        case PolicyFamily::H6: return h6;
        default: return none;
    }
}

struct PolicyParams {
    PolicyFamily family = PolicyFamily::Linear;
    std::vector<double> values;  // ordered as family_parameters(family)

    PolicyParams() = default;
    explicit PolicyParams(PolicyFamily f) : PolicyParams(f, {}) {}
    PolicyParams(PolicyFamily f, std::vector<double> v) : family(f), values(std::move(v)) { validate(); }

    void validate() const {
        const auto names = family_parameters(family);
        require(values.size() == names.size(),
                "PolicyParams: family " + std::string(family_name(family)) + " expects " +
                    std::to_string(names.size()) + " parameters, got " + std::to_string(values.size()));
        for (double v : values) require(std::isfinite(v), "PolicyParams: parameters must be finite");
    }

    /// Named lookup; absent names read as zero, so the general exponent below
    /// covers every family.
    [[nodiscard]] double get(std::string_view name) const {
        const auto names = family_parameters(family);
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return values[i];
        return 0.0;
    }

    [[nodiscard]] std::string label() const {
        std::string s(family_name(family));
        const auto names = family_parameters(family);
        for (std::size_t i = 0; i < names.size(); ++i)
            s += (i ? "," : "(") + std::string(names[i]) + "=" + format_double(values[i]);
        if (!names.empty()) s += ")";
        return s;
    }
};

inline bool is_heuristic(PolicyFamily f) { return !family_parameters(f).empty(); }

/// 2 / (1 + e^x), in (0, 2) for finite x.
inline double logistic_factor(double exponent) {
    if (exponent > 700.0) return 0.0;
    return 2.0 / (1.0 + std::exp(exponent));
}

/// Exponent e_n of the heuristic execution rule (zero-valued parameters vanish).
inline double heuristic_exponent(const PolicyParams& p, const ContractState& s, const ContractSpec& spec,
                                 double price) {
    const int horizon = maturity(s, spec);
    const double remaining_frac = static_cast<double>(horizon - s.n) / horizon;
    const double ratio = s.has_average() ? s.average() / price - 1.0 : 0.0;
    double e = p.get("a") + p.get("a1") * remaining_frac;
    if (spec.n_ex > 0) e += p.get("a2") * std::max(spec.n_ex - s.n, 0) / static_cast<double>(spec.n_ex);
    e += (p.get("b") + p.get("b1") * remaining_frac) * ratio;
    if (p.family == PolicyFamily::H6 && std::isfinite(spec.v_max) && horizon > s.n)
        e += p.get("c") * (spec.f_min - s.x) / (price * spec.v_max * (horizon - s.n));
    return e;
}

/// Requested (pre-clipping) volume in shares for today.
inline double decide_volume(const PolicyParams& p, const ContractState& s, const ContractSpec& spec,
                            double price) {
    if (s.stopped) throw UsageError("decide_volume: contract already stopped");
    const int horizon = maturity(s, spec);
    const int remaining = horizon - s.n;
    if (remaining <= 0) {
        // Last day: everything still required towards the (reduced) minimum notional.
        return std::max(reduced_min_notional(s, spec) - s.x, 0.0) / price;
    }
    const double days = static_cast<double>(remaining);
    switch (p.family) {
        case PolicyFamily::Linear:
            return (spec.f_max - s.x) / (price * days);
        case PolicyFamily::MinMaxTarget: {
            const bool cheap = !s.has_average() || price <= s.average();
            return ((cheap ? spec.f_max : spec.f_min) - s.x) / (price * days);
        }
        case PolicyFamily::NoTrade:
            return 0.0;
        default:
            return logistic_factor(heuristic_exponent(p, s, spec, price)) * (spec.f_bar() - s.x) /
                   (price * days);
    }
}

/// Policy stop request; the engine combines it with may_stop/must_stop.
inline bool decide_stop(const PolicyParams& p, const ContractState& s, const ContractSpec& spec, double price) {
    if (!s.has_average()) return false;
    const double avg = s.average();
    const double ratio = avg / price - 1.0;
    switch (p.family) {
        case PolicyFamily::Linear:
        case PolicyFamily::NoTrade:
            return false;
        case PolicyFamily::MinMaxTarget:
            return price < avg && s.n >= spec.n_ex;
        case PolicyFamily::H2: {
            const int horizon = maturity(s, spec);
            const double threshold = p.get("alpha") + p.get("beta") * (horizon - s.n) / horizon +
                                     p.get("gamma") * s.x / spec.f_min;
            return ratio >= threshold;
        }
        default:
            return ratio >= p.get("alpha");
    }
}

}  // namespace buyback
