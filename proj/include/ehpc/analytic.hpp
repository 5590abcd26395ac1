#pragma once

// Closed-form throughputs and bounds. All rates are in bits per slot.

#include <cmath>
#include <numbers>
#include <optional>

#include "ehpc/dist.hpp"
#include "ehpc/error.hpp"
#include "ehpc/policy.hpp"

namespace ehpc {

/// Universal additive gap of the fixed-fraction policy, 1/(2 ln 2).
inline constexpr double kAdditiveGap = 0.5 / std::numbers::ln2;

inline double rate(double gamma, double power) { return 0.5 * std::log2(1.0 + gamma * power); }

/// Jensen bound: no online policy beats 0.5*log2(1 + gamma*mu).
inline double upper_bound(double mu, double gamma) { return rate(gamma, mu); }

/// Exact long-run throughput of the fixed-fraction policy under full-recharge
/// Bernoulli(p) arrivals, via the renewal series
///   sum_i p(1-p)^(i-1) * rate(bbar*p*(1-p)^(i-1)).
/// Terms decrease, so after M terms the remainder is at most
/// (1-p)^M * rate(bbar*p*(1-p)^M); summation stops once that is below tail_tol.
inline double ff_bernoulli_exact(double p, const SystemParams& params, double tail_tol = 1e-12) {
    params.validate();
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("p must lie in (0,1]");
    if (!(tail_tol > 0.0)) throw ParameterError("tail tolerance must be positive");
    double sum = 0.0;
    double survive = 1.0;  // (1-p)^(i-1)
    while (true) {
        sum += p * survive * rate(params.gamma, params.bbar * p * survive);
        survive *= 1.0 - p;
        if (survive * rate(params.gamma, params.bbar * p * survive) < tail_tol) break;
    }
    return sum;
}

/// (1-p)/(2p) * log2(1/(1-p)), the Bernoulli additive penalty; 0 at p = 1.
inline double bernoulli_penalty(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("p must lie in (0,1]");
    if (p == 1.0) return 0.0;
    return (1.0 - p) / (2.0 * p) * (-std::log1p(-p) / std::numbers::ln2);
}

/// Bernoulli additive lower bound on the fixed-fraction throughput.
inline double ff_additive_lower_bernoulli(double p, const SystemParams& params) {
    params.validate();
    return rate(params.gamma, p * params.bbar) - bernoulli_penalty(p);
}

/// Distribution-free additive lower bound, 0.5*log2(1+gamma*mu) - 1/(2 ln 2).
inline double ff_additive_lower(double mu, double gamma) { return upper_bound(mu, gamma) - kAdditiveGap; }

/// Distribution-free multiplicative lower bound, half the upper bound.
inline double ff_multiplicative_lower(double mu, double gamma) { return 0.5 * upper_bound(mu, gamma); }

/// Sharper Bernoulli multiplicative bound, rate(p*bbar) / (2 - p).
inline double ff_multiplicative_lower_bernoulli(double p, const SystemParams& params) {
    params.validate();
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("p must lie in (0,1]");
    return rate(params.gamma, p * params.bbar) / (2.0 - p);
}

/// Optimal throughput under full-recharge Bernoulli arrivals (finite sum).
inline double bernoulli_optimal_throughput(const BernoulliAllocation& alloc) {
    return allocation_objective(alloc.p, alloc.gamma, alloc.allocations);
}

/// Greedy throughput under full-recharge Bernoulli arrivals, p*rate(bbar).
inline double greedy_bernoulli_throughput(double p, const SystemParams& params) {
    params.validate();
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("p must lie in (0,1]");
    return p * rate(params.gamma, params.bbar);
}

struct BoundsReport {
    double mu = 0.0;
    double upper = 0.0;
    double ff_additive_lower = 0.0;
    double ff_multiplicative_lower = 0.0;
    // Only defined for Bernoulli arrivals that fully recharge the battery.
    std::optional<double> ff_bernoulli_exact;
    std::optional<double> bernoulli_optimal;
    std::optional<double> greedy_bernoulli;
};

inline BoundsReport bounds_report(const EnergyModel& model, const SystemParams& params) {
    params.validate();
    BoundsReport r;
    r.mu = clipped_mean(model, params.bbar);
    r.upper = upper_bound(r.mu, params.gamma);
    r.ff_multiplicative_lower = ff_multiplicative_lower(r.mu, params.gamma);
    if (const auto p = full_recharge_probability(model, params.bbar)) {
        r.ff_additive_lower = ff_additive_lower_bernoulli(*p, params);
        r.ff_bernoulli_exact = ff_bernoulli_exact(*p, params);
        r.bernoulli_optimal = bernoulli_optimal_throughput(solve_bernoulli_kkt(*p, params));
        r.greedy_bernoulli = greedy_bernoulli_throughput(*p, params);
    } else {
        r.ff_additive_lower = ff_additive_lower(r.mu, params.gamma);
    }
    return r;
}

}  // namespace ehpc
