#pragma once

// Online power-control policies. A PolicySpec is an immutable description;
// a PolicyInstance adds the per-trajectory memory and emits one power level
// per slot.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ehpc/dist.hpp"
#include "ehpc/error.hpp"

namespace ehpc {

/// Spend a fixed fraction q of the stored energy every slot.
struct FixedFraction {
    double q = 1.0;
};

/// Spend everything.
struct Greedy {};

/// Spend mu whenever the battery holds at least mu, otherwise wait.
struct Constant {
    double mu = 0.0;
};

/// Optimal allocation for full-recharge Bernoulli arrivals: after each
/// recharge, allocations[i] is spent i slots later, zero beyond n_tilde.
struct BernoulliAllocation {
    std::size_t n_tilde = 0;
    double lambda_tilde = 0.0;
    std::vector<double> allocations;
    double p = 1.0;
    double bbar = 1.0;
    double gamma = 1.0;
};

struct BernoulliOptimal {
    BernoulliAllocation alloc;
};

/// Grid-based policy, typically extracted from the value-iteration solver.
struct Tabular {
    std::vector<double> grid;
    std::vector<double> actions;
};

using PolicySpec = std::variant<FixedFraction, Greedy, Constant, BernoulliOptimal, Tabular>;

inline std::string policy_name(const PolicySpec& spec) {
    return std::visit(detail::overloaded{
                          [](const FixedFraction&) { return std::string("ff"); },
                          [](const Greedy&) { return std::string("greedy"); },
                          [](const Constant&) { return std::string("const"); },
                          [](const BernoulliOptimal&) { return std::string("bopt"); },
                          [](const Tabular&) { return std::string("tabular"); },
                      },
                      spec);
}

inline void validate(const PolicySpec& spec, double bbar) {
    std::visit(detail::overloaded{
                   [](const FixedFraction& f) {
                       if (!(f.q > 0.0 && f.q <= 1.0)) throw ParameterError("ff: q must lie in (0,1]");
                   },
                   [](const Greedy&) {},
                   [&](const Constant& c) {
                       if (!(c.mu >= 0.0 && c.mu <= bbar)) throw ParameterError("const: mu must lie in [0,bbar]");
                   },
                   [&](const BernoulliOptimal& b) {
                       if (b.alloc.allocations.empty()) throw ParameterError("bopt: empty allocation");
                       if (b.alloc.bbar != bbar) throw ParameterError("bopt: allocation solved for another capacity");
                   },
                   [&](const Tabular& t) {
                       if (t.grid.size() < 2 || t.grid.size() != t.actions.size())
                           throw ParameterError("tabular: grid and actions must have equal size >= 2");
                       for (std::size_t i = 0; i < t.grid.size(); ++i) {
                           if (i > 0 && !(t.grid[i] > t.grid[i - 1]))
                               throw ParameterError("tabular: grid must be strictly increasing");
                           if (!(t.actions[i] >= 0.0 && t.actions[i] <= t.grid[i] * (1 + 1e-12)))
                               throw ParameterError("tabular: actions must lie in [0, grid]");
                       }
                       if (t.grid.front() < 0.0 || t.grid.back() > bbar * (1 + 1e-12))
                           throw ParameterError("tabular: grid must lie within [0, bbar]");
                   },
               },
               spec);
}

/// Expected per-slot rate of an allocation sequence under full-recharge
/// Bernoulli(p) arrivals: sum_i p(1-p)^(i-1) * 0.5*log2(1 + gamma*E_i).
inline double allocation_objective(double p, double gamma, std::span<const double> alloc) {
    double total = 0.0;
    double weight = p;
    for (double e : alloc) {
        total += weight * 0.5 * std::log2(1.0 + gamma * e);
        weight *= 1.0 - p;
    }
    return total;
}

/// Closed-form KKT solution of the Bernoulli allocation problem.
///
/// n_tilde is the smallest positive N with (1-p)^N [1 + p(gamma*bbar + N)] < 1.
/// When that expression equals 1 the last allocation is exactly zero and is
/// dropped, so n_tilde == allocations.size() always.
inline BernoulliAllocation solve_bernoulli_kkt(double p, const SystemParams& params) {
    params.validate();
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("bopt: p must lie in (0,1]");
    const double gb = params.gamma * params.bbar;
    const double log_q = std::log1p(-p);  // -inf for p == 1

    std::size_t n = 1;
    for (;; ++n) {
        const double tail = p == 1.0 ? 0.0 : std::exp(static_cast<double>(n) * log_q);
        if (tail * (1.0 + p * (gb + static_cast<double>(n))) < 1.0) break;
        if (n > 100'000'000) throw ParameterError("bopt: active horizon too long for p");
    }

    BernoulliAllocation out;
    out.p = p;
    out.bbar = params.bbar;
    out.gamma = params.gamma;
    const double covered = p == 1.0 ? 1.0 : -std::expm1(static_cast<double>(n) * log_q);
    out.lambda_tilde = covered / (2.0 * (params.bbar + static_cast<double>(n) / params.gamma));

    out.allocations.reserve(n);
    double weight = p;
    for (std::size_t i = 0; i < n; ++i) {
        out.allocations.push_back(weight / (2.0 * out.lambda_tilde) - 1.0 / params.gamma);
        weight *= 1.0 - p;
    }
    const double zero_tol = 1e-12 * std::max(params.bbar, 1.0 / params.gamma);
    while (out.allocations.size() > 1 && out.allocations.back() <= zero_tol) out.allocations.pop_back();
    out.n_tilde = out.allocations.size();
    return out;
}

/// Checks stationarity, dual feasibility past n_tilde and the energy budget.
inline bool kkt_verify(const BernoulliAllocation& a) {
    if (a.allocations.empty() || a.allocations.size() != a.n_tilde) return false;
    if (!(a.lambda_tilde > 0.0)) return false;
    double total = 0.0;
    double weight = a.p;
    for (std::size_t i = 0; i < a.n_tilde; ++i) {
        const double e = a.allocations[i];
        if (!(e > 0.0)) return false;
        if (i > 0 && !(e < a.allocations[i - 1])) return false;
        const double marginal = weight * 0.5 * a.gamma / (1.0 + a.gamma * e);
        if (std::abs(marginal - a.lambda_tilde) > 1e-8 * a.lambda_tilde) return false;
        total += e;
        weight *= 1.0 - a.p;
    }
    for (std::size_t i = a.n_tilde; i < a.n_tilde + 50; ++i) {
        if (a.lambda_tilde - weight * 0.5 * a.gamma < -1e-12) return false;
        weight *= 1.0 - a.p;
    }
    return std::abs(total - a.bbar) <= 1e-9 * std::max(1.0, a.bbar);
}

/// Linear interpolation of a tabulated function, constant beyond the ends.
inline double interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto hi = static_cast<std::size_t>(it - xs.begin());
    const auto lo = hi - 1;
    const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

/// A policy bound to one trajectory. Copying an instance forks its state;
/// the spec itself is shared.
class PolicyInstance {
public:
    PolicyInstance(std::shared_ptr<const PolicySpec> spec, double bbar) : spec_(std::move(spec)), bbar_(bbar) {
        validate(*spec_, bbar_);
    }
    PolicyInstance(const PolicySpec& spec, double bbar)
        : PolicyInstance(std::make_shared<const PolicySpec>(spec), bbar) {}

    /// Power for the current slot; 0 <= result <= battery.
    double next_power(double battery, bool arrived_this_slot) {
        if (!(battery >= 0.0 && battery <= bbar_))
            throw StateError("battery level " + std::to_string(battery) + " outside [0, bbar]");
        const double g = std::visit(
            detail::overloaded{
                [&](const FixedFraction& f) { return f.q * battery; },
                [&](const Greedy&) { return battery; },
                [&](const Constant& c) { return battery >= c.mu ? c.mu : 0.0; },
                [&](const BernoulliOptimal& b) {
                    if (arrived_this_slot) since_arrival_ = 0;
                    const auto& alloc = b.alloc.allocations;
                    const double e = since_arrival_ < alloc.size() ? alloc[since_arrival_] : 0.0;
                    ++since_arrival_;
                    return e;
                },
                [&](const Tabular& t) { return interpolate(t.grid, t.actions, battery); },
            },
            *spec_);
        return std::clamp(g, 0.0, battery);
    }

    const PolicySpec& spec() const noexcept { return *spec_; }

private:
    std::shared_ptr<const PolicySpec> spec_;
    double bbar_;
    std::size_t since_arrival_ = 0;
};

}  // namespace ehpc
