#pragma once

// Seeded Monte Carlo engine for the battery dynamics
//   b_t = min(b_{t-1} - g_{t-1} + E_t, bbar),
// plus exact expectation by enumeration for finite-support arrivals.
//
// Timing: b_1 is given and E_1 is never drawn. For t >= 2 the arrival E_t is
// drawn at the start of slot t, before the policy acts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ehpc/analytic.hpp"
#include "ehpc/dist.hpp"
#include "ehpc/error.hpp"
#include "ehpc/policy.hpp"
#include "ehpc/rng.hpp"

namespace ehpc {

struct SimConfig {
    long horizon = 100'000;
    long runs = 16;
    std::uint64_t seed = 1;
    std::optional<double> initial_battery;  ///< defaults to bbar
    unsigned workers = 0;                   ///< 0 = hardware concurrency

    void validate(double bbar) const {
        if (horizon < 1) throw ParameterError("sim: horizon must be at least 1");
        if (runs < 1) throw ParameterError("sim: runs must be at least 1");
        if (initial_battery && !(*initial_battery >= 0.0 && *initial_battery <= bbar))
            throw ParameterError("sim: initial battery must lie in [0, bbar]");
    }
};

struct ThroughputEstimate {
    double mean = 0.0;       ///< bits per slot
    double std_error = 0.0;  ///< across independent trajectories
    long horizon = 0;
    long runs = 0;
    double mean_battery = 0.0;
    double energy_wasted_frac = 0.0;  ///< overflow losses / total arrived energy
};

/// Per-trajectory totals. Energy bookkeeping satisfies
///   initial + credited == power + final_battery
/// up to rounding.
struct TrajectoryStats {
    double avg_rate = 0.0;
    double avg_battery = 0.0;
    double power = 0.0;     ///< sum of emitted powers
    double arrived = 0.0;   ///< sum of drawn arrivals
    double credited = 0.0;  ///< arrivals actually stored
    double wasted = 0.0;    ///< overflow above bbar
    double initial_battery = 0.0;
    double final_battery = 0.0;
    double min_battery = 0.0;
    double max_battery = 0.0;
};

/// Battery recursion; throws AdmissibilityError if g exceeds the battery.
inline double step(double battery, double g, double e_next, double bbar) {
    if (g > battery + 1e-12 || g < 0.0)
        throw AdmissibilityError("policy emitted " + std::to_string(g) + " with battery " + std::to_string(battery));
    return std::min(std::max(battery - g, 0.0) + e_next, bbar);
}

/// Fixed-order pairwise summation; the result does not depend on scheduling.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const auto half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

namespace detail {
// Neumaier compensated sum; keeps long-horizon averages accurate to a few ulps.
struct Accumulator {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};
}  // namespace detail

inline TrajectoryStats simulate_trajectory(PolicyInstance policy, const EnergyModel& model,
                                           const SystemParams& params, long horizon, double initial_battery,
                                           Stream& stream) {
    TrajectoryStats st;
    double b = initial_battery;
    st.initial_battery = b;
    st.min_battery = st.max_battery = b;
    detail::Accumulator rate_sum, battery_sum;
    bool arrived = false;
    for (long t = 1; t <= horizon; ++t) {
        battery_sum.add(b);
        const double g = policy.next_power(b, arrived);
        rate_sum.add(rate(params.gamma, g));
        st.power += g;
        if (t == horizon) {
            b = std::max(b - g, 0.0);
            break;
        }
        const double e = sample(model, stream, params.bbar);
        const double unclipped = std::max(b - g, 0.0) + e;
        const double next = step(b, g, e, params.bbar);
        st.arrived += e;
        st.wasted += unclipped - next;
        st.credited += e - (unclipped - next);
        arrived = e > 0.0;
        b = next;
        st.min_battery = std::min(st.min_battery, b);
        st.max_battery = std::max(st.max_battery, b);
    }
    st.final_battery = b;
    st.avg_rate = rate_sum.value() / static_cast<double>(horizon);
    st.avg_battery = battery_sum.value() / static_cast<double>(horizon);
    return st;
}

/// Monte Carlo estimate of the n-horizon throughput. Trajectory r uses
/// Stream(cfg.seed, r), so results are identical for any worker count.
inline ThroughputEstimate run(const PolicySpec& policy, const EnergyModel& model, const SystemParams& params,
                              const SimConfig& cfg) {
    params.validate();
    validate(model);
    cfg.validate(params.bbar);
    const auto shared = std::make_shared<const PolicySpec>(policy);
    const PolicyInstance prototype(shared, params.bbar);
    const double b1 = cfg.initial_battery.value_or(params.bbar);

    const auto runs = static_cast<std::size_t>(cfg.runs);
    std::vector<TrajectoryStats> stats(runs);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            Stream stream(cfg.seed, r);
            stats[r] = simulate_trajectory(prototype, model, params, cfg.horizon, b1, stream);
        }
    };
    const unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
    const std::size_t w = std::min<std::size_t>(workers, runs);
    if (w <= 1) {
        work(0, runs);
    } else {
        // Exceptions thrown inside a worker would terminate; collect them instead.
        std::vector<std::exception_ptr> errors(w);
        {
            std::vector<std::jthread> pool;
            for (std::size_t t = 0; t < w; ++t) {
                pool.emplace_back([&, t] {
                    try {
                        work(runs * t / w, runs * (t + 1) / w);
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    std::vector<double> rates(runs), batteries(runs), wasted(runs), arrived(runs);
    for (std::size_t r = 0; r < runs; ++r) {
        rates[r] = stats[r].avg_rate;
        batteries[r] = stats[r].avg_battery;
        wasted[r] = stats[r].wasted;
        arrived[r] = stats[r].arrived;
    }
    ThroughputEstimate est;
    est.horizon = cfg.horizon;
    est.runs = cfg.runs;
    const double n = static_cast<double>(runs);
    est.mean = pairwise_sum(rates) / n;
    if (runs > 1) {
        std::vector<double> sq(runs);
        for (std::size_t r = 0; r < runs; ++r) sq[r] = (rates[r] - est.mean) * (rates[r] - est.mean);
        est.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    }
    est.mean_battery = pairwise_sum(batteries) / n;
    const double total_arrived = pairwise_sum(arrived);
    est.energy_wasted_frac = total_arrived > 0.0 ? pairwise_sum(wasted) / total_arrived : 0.0;
    return est;
}

namespace detail {
inline double enumerate_from(PolicyInstance& policy, const DiscreteEmpirical& model, const SystemParams& params,
                             double battery, bool arrived, long remaining) {
    const double g = policy.next_power(battery, arrived);
    double total = rate(params.gamma, g);
    if (remaining == 1) return total;
    for (std::size_t k = 0; k < model.values.size(); ++k) {
        if (model.probs[k] == 0.0) continue;
        PolicyInstance branch = policy;
        const double e = model.values[k];
        total += model.probs[k] *
                 enumerate_from(branch, model, params, step(battery, g, e, params.bbar), e > 0.0, remaining - 1);
    }
    return total;
}
}  // namespace detail

/// Exact n-horizon expected throughput from b_1 = initial_battery, summing
/// over every arrival sequence E_2..E_n. Throws SizeError if the tree has more
/// than 1e7 leaves.
inline double enumerate_exact(const PolicySpec& policy, const DiscreteEmpirical& model, const SystemParams& params,
                              long horizon, double initial_battery) {
    params.validate();
    validate(EnergyModel{model});
    if (horizon < 1) throw ParameterError("enumerate: horizon must be at least 1");
    if (!(initial_battery >= 0.0 && initial_battery <= params.bbar))
        throw ParameterError("enumerate: initial battery must lie in [0, bbar]");
    const double leaves = std::pow(static_cast<double>(model.values.size()), static_cast<double>(horizon - 1));
    if (leaves > 1e7) throw SizeError("enumerate: more than 1e7 arrival sequences");
    PolicyInstance instance(policy, params.bbar);
    return detail::enumerate_from(instance, model, params, initial_battery, false, horizon) /
           static_cast<double>(horizon);
}

/// |T_n(b_1 = bbar) - T_n(b_1 = 0)| estimated with common random numbers.
inline double initial_state_sensitivity(const PolicySpec& policy, const EnergyModel& model,
                                        const SystemParams& params, long horizon, std::uint64_t seed,
                                        long runs = 8) {
    SimConfig cfg;
    cfg.horizon = horizon;
    cfg.runs = runs;
    cfg.seed = seed;
    cfg.initial_battery = params.bbar;
    const double full = run(policy, model, params, cfg).mean;
    cfg.initial_battery = 0.0;
    const double empty = run(policy, model, params, cfg).mean;
    return std::abs(full - empty);
}

}  // namespace ehpc
