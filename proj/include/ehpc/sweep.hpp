#pragma once

// Capacity sweeps: for each battery size, simulate a set of policies and
// compare them with the optimal throughput and the Jensen upper bound.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ehpc/analytic.hpp"
#include "ehpc/dist.hpp"
#include "ehpc/error.hpp"
#include "ehpc/mdp.hpp"
#include "ehpc/policy.hpp"
#include "ehpc/sim.hpp"

namespace ehpc {

/// Parses `ff`, `ff:q=0.2`, `greedy`, `const`, `const:mu=2`, `bopt` or
/// `tabular:<path>`. `ff` and `const` default to the clipped mean of `model`.
inline PolicySpec parse_policy(std::string_view text, const EnergyModel& model, const SystemParams& params) {
    params.validate();
    const auto colon = text.find(':');
    const auto kind = text.substr(0, colon);
    const auto arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    auto keyed = [&](std::string_view key) -> std::optional<double> {
        if (arg.empty()) return std::nullopt;
        const auto eq = arg.find('=');
        if (eq == std::string_view::npos || arg.substr(0, eq) != key)
            throw FormatError("expected " + std::string(key) + "=<value> in policy '" + std::string(text) + "'");
        return detail::parse_number(arg.substr(eq + 1), key);
    };

    PolicySpec spec;
    if (kind == "ff") {
        const auto q = keyed("q");
        spec = FixedFraction{q ? *q : clipped_mean(model, params.bbar) / params.bbar};
    } else if (kind == "greedy") {
        if (!arg.empty()) throw FormatError("greedy takes no arguments");
        spec = Greedy{};
    } else if (kind == "const") {
        const auto mu = keyed("mu");
        spec = Constant{mu ? *mu : clipped_mean(model, params.bbar)};
    } else if (kind == "bopt") {
        if (!arg.empty()) throw FormatError("bopt takes no arguments");
        const auto p = full_recharge_probability(model, params.bbar);
        if (!p) throw ParameterError("bopt requires Bernoulli arrivals that fully recharge the battery");
        spec = BernoulliOptimal{solve_bernoulli_kkt(*p, params)};
    } else if (kind == "tabular") {
        if (arg.empty()) throw FormatError("tabular requires a solution file path");
        std::ifstream in{std::string(arg)};
        if (!in) throw FormatError("cannot open solution file '" + std::string(arg) + "'");
        const auto sol = read_solution(in);
        if (std::abs(sol.bbar - params.bbar) > 1e-12 * params.bbar)
            throw ParameterError("tabular: solution was computed for a different battery capacity");
        spec = to_tabular(sol);
    } else {
        throw FormatError("unknown policy '" + std::string(text) + "'");
    }
    validate(spec, params.bbar);
    return spec;
}

/// Arrival family whose parameters scale with the battery capacity.
struct ModelFamily {
    enum class Kind { bernoulli, uniform, exponential, discrete };
    Kind kind = Kind::bernoulli;
    double p = 0.1;          ///< bernoulli; amplitude is the capacity
    double lo_frac = 0.0;    ///< uniform on [lo_frac*bbar, hi_frac*bbar]
    double hi_frac = 1.0;
    double mean_frac = 0.1;  ///< exponential with mean mean_frac*bbar
    std::vector<double> value_fracs;
    std::vector<double> probs;

    EnergyModel at(double bbar) const {
        switch (kind) {
            case Kind::bernoulli: return Bernoulli{p, bbar};
            case Kind::uniform: return Uniform{lo_frac * bbar, hi_frac * bbar};
            case Kind::exponential: return Exponential{mean_frac * bbar};
            case Kind::discrete: {
                DiscreteEmpirical d;
                for (double v : value_fracs) d.values.push_back(v * bbar);
                d.probs = probs;
                return d;
            }
        }
        throw ParameterError("unknown model family");
    }
};

struct SweepSpec {
    ModelFamily model;
    std::vector<double> bbar_grid;
    double gamma = 1.0;
    std::vector<std::string> policies{"ff", "greedy", "const"};
    SimConfig sim;
    bool include_mdp_optimal = false;
    MdpConfig mdp;
    unsigned workers = 0;  ///< concurrent sweep points; 0 = hardware concurrency

    void validate() const {
        if (bbar_grid.empty()) throw ParameterError("sweep: empty capacity grid");
        for (std::size_t i = 0; i < bbar_grid.size(); ++i) {
            if (!(bbar_grid[i] > 0.0)) throw ParameterError("sweep: capacities must be positive");
            if (i > 0 && !(bbar_grid[i] > bbar_grid[i - 1]))
                throw ParameterError("sweep: capacity grid must be strictly increasing");
        }
        if (!(gamma > 0.0)) throw ParameterError("sweep: gamma must be positive");
        if (policies.empty()) throw ParameterError("sweep: no policies");
        mdp.validate();
    }
};

inline std::vector<double> log_grid(double lo, double hi, std::size_t points) {
    if (!(lo > 0.0 && hi > lo) || points < 2) throw ParameterError("log grid needs 0 < lo < hi and >= 2 points");
    std::vector<double> grid(points);
    const double a = std::log10(lo), b = std::log10(hi);
    for (std::size_t i = 0; i < points; ++i)
        grid[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

/// Figure presets: fig3/fig4/fig5 are Bernoulli with p = 0.1/0.5/0.9,
/// fig6 is uniform on [0, bbar], fig7 exponential with mean 0.1*bbar.
/// All use gamma = 1 and 25 log-spaced capacities over [0.1, 1000].
inline SweepSpec preset(std::string_view name) {
    SweepSpec spec;
    spec.bbar_grid = log_grid(0.1, 1000.0, 25);
    spec.sim.horizon = 100'000;
    spec.sim.runs = 16;
    spec.mdp.n_states = 256;
    spec.mdp.n_actions = 128;
    spec.mdp.arrival_atoms = 32;
    using K = ModelFamily::Kind;
    if (name == "fig3") {
        spec.model.kind = K::bernoulli;
        spec.model.p = 0.1;
    } else if (name == "fig4") {
        spec.model.kind = K::bernoulli;
        spec.model.p = 0.5;
    } else if (name == "fig5") {
        spec.model.kind = K::bernoulli;
        spec.model.p = 0.9;
    } else if (name == "fig6") {
        spec.model.kind = K::uniform;
    } else if (name == "fig7") {
        spec.model.kind = K::exponential;
        spec.model.mean_frac = 0.1;
    } else {
        throw ParameterError("unknown preset '" + std::string(name) + "'");
    }
    return spec;
}

struct SweepRow {
    double bbar = 0.0;
    std::string policy;
    std::optional<double> throughput;
    std::optional<double> std_error;
    std::optional<double> theta_optimal;
    std::string theta_source;  ///< "analytic" or "mdp"
    std::optional<double> upper_bound;
    std::optional<double> additive_gap;
    std::optional<double> ratio;  ///< omitted when theta_optimal < 1e-12
    std::string error;
};

namespace detail {
inline std::vector<SweepRow> sweep_point(const SweepSpec& spec, double bbar) {
    const SystemParams params{bbar, spec.gamma};
    std::vector<SweepRow> rows(spec.policies.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        rows[k].bbar = bbar;
        rows[k].policy = spec.policies[k];
    }

    std::string point_error;
    std::optional<EnergyModel> model;
    std::optional<double> theta;
    std::string source;
    try {
        model = spec.model.at(bbar);
        const double mu = clipped_mean(*model, bbar);
        for (auto& r : rows) r.upper_bound = upper_bound(mu, spec.gamma);
        const auto p = full_recharge_probability(*model, bbar);
        if (p && !spec.include_mdp_optimal) {
            theta = bernoulli_optimal_throughput(solve_bernoulli_kkt(*p, params));
            source = "analytic";
        } else {
            MdpConfig cfg = spec.mdp;
            cfg.workers = 1;
            theta = solve(*model, params, cfg).gain;
            source = "mdp";
        }
    } catch (const std::exception& e) {
        point_error = e.what();
    }

    for (auto& r : rows) {
        r.theta_optimal = theta;
        r.theta_source = source;
        r.error = point_error;
        if (!model) continue;
        try {
            SimConfig sim = spec.sim;
            sim.workers = 1;
            const auto est = run(parse_policy(r.policy, *model, params), *model, params, sim);
            r.throughput = est.mean;
            r.std_error = est.std_error;
            if (theta) {
                r.additive_gap = *theta - est.mean;
                if (*theta >= 1e-12) r.ratio = est.mean / *theta;
            }
        } catch (const std::exception& e) {
            r.error = r.error.empty() ? std::string(e.what()) : r.error + "; " + e.what();
        }
    }
    return rows;
}
}  // namespace detail

/// One row per (capacity, policy) in grid order. Module errors are recorded
/// in the row's error column instead of aborting the sweep.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
    spec.validate();
    const std::size_t n = spec.bbar_grid.size();
    std::vector<std::vector<SweepRow>> per_point(n);
    const unsigned workers = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
    const std::size_t w = std::min<std::size_t>(workers, n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) per_point[i] = detail::sweep_point(spec, spec.bbar_grid[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < w; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) per_point[i] = detail::sweep_point(spec, spec.bbar_grid[i]);
            });
        }
    }
    std::vector<SweepRow> rows;
    for (auto& point : per_point)
        for (auto& r : point) rows.push_back(std::move(r));
    return rows;
}

// ---------------------------------------------------------------------------
// CSV: bbar,policy,throughput,std_error,theta_optimal,theta_source,
//      upper_bound,additive_gap,ratio,error
// Missing values are empty fields; commas and newlines in messages become ';'.
// ---------------------------------------------------------------------------

inline constexpr const char* kSweepHeader =
    "bbar,policy,throughput,std_error,theta_optimal,theta_source,upper_bound,additive_gap,ratio,error";

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    auto opt = [](const std::optional<double>& v) { return v ? detail::format_number(*v) : std::string(); };
    auto clean = [](std::string s) {
        std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ';');
        return s;
    };
    os << kSweepHeader << '\n';
    for (const auto& r : rows) {
        os << detail::format_number(r.bbar) << ',' << clean(r.policy) << ',' << opt(r.throughput) << ','
           << opt(r.std_error) << ',' << opt(r.theta_optimal) << ',' << r.theta_source << ',' << opt(r.upper_bound)
           << ',' << opt(r.additive_gap) << ',' << opt(r.ratio) << ',' << clean(r.error) << '\n';
    }
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kSweepHeader) throw FormatError("sweep csv: bad header");
    auto opt = [](std::string_view s) -> std::optional<double> {
        if (s.empty()) return std::nullopt;
        return detail::parse_number(s, "sweep csv");
    };
    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = detail::split(line, ',');
        if (f.size() != 10) throw FormatError("sweep csv: expected 10 fields");
        SweepRow r;
        r.bbar = detail::parse_number(f[0], "bbar");
        r.policy = std::string(f[1]);
        r.throughput = opt(f[2]);
        r.std_error = opt(f[3]);
        r.theta_optimal = opt(f[4]);
        r.theta_source = std::string(f[5]);
        r.upper_bound = opt(f[6]);
        r.additive_gap = opt(f[7]);
        r.ratio = opt(f[8]);
        r.error = std::string(f[9]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace ehpc
