#pragma once

// Command dispatch shared by the `ehpc` tool and its tests: argument structs,
// report formatting (CSV or JSON) and sweep configuration files.

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "ehpc/analytic.hpp"
#include "ehpc/dist.hpp"
#include "ehpc/mdp.hpp"
#include "ehpc/sim.hpp"
#include "ehpc/sweep.hpp"

namespace ehpc::cli {

using nlohmann::json;

enum class Format { csv, json };

inline Format parse_format(const std::string& s) {
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    throw FormatError("unknown format '" + s + "' (expected csv or json)");
}

namespace detail {
inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
inline std::string num(double v) { return ehpc::detail::format_number(v); }
inline std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }
}  // namespace detail

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

struct BoundsArgs {
    std::string dist;
    double bbar = 1.0;
    double gamma = 1.0;
    Format format = Format::csv;
};

inline constexpr const char* kBoundsHeader =
    "bbar,gamma,mu,upper,ff_additive_lower,ff_multiplicative_lower,ff_bernoulli_exact,bernoulli_optimal,"
    "greedy_bernoulli";

inline void run_bounds(const BoundsArgs& args, std::ostream& out) {
    const SystemParams params{args.bbar, args.gamma};
    const auto model = parse_model(args.dist);
    const auto r = bounds_report(model, params);
    if (args.format == Format::json) {
        json j{{"dist", to_string(model)},
               {"bbar", args.bbar},
               {"gamma", args.gamma},
               {"mu", r.mu},
               {"upper", r.upper},
               {"ff_additive_lower", r.ff_additive_lower},
               {"ff_multiplicative_lower", r.ff_multiplicative_lower},
               {"ff_bernoulli_exact", detail::opt(r.ff_bernoulli_exact)},
               {"bernoulli_optimal", detail::opt(r.bernoulli_optimal)},
               {"greedy_bernoulli", detail::opt(r.greedy_bernoulli)}};
        out << j.dump(2) << '\n';
        return;
    }
    using detail::num;
    out << kBoundsHeader << '\n'
        << num(args.bbar) << ',' << num(args.gamma) << ',' << num(r.mu) << ',' << num(r.upper) << ','
        << num(r.ff_additive_lower) << ',' << num(r.ff_multiplicative_lower) << ',' << num(r.ff_bernoulli_exact)
        << ',' << num(r.bernoulli_optimal) << ',' << num(r.greedy_bernoulli) << '\n';
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string policy = "ff";
    std::string dist;
    double bbar = 1.0;
    double gamma = 1.0;
    long horizon = 100'000;
    long runs = 16;
    std::uint64_t seed = 1;
    std::optional<double> initial_battery;
    unsigned workers = 0;
    Format format = Format::csv;
};

inline constexpr const char* kEstimateHeader = "policy,mean,std_error,horizon,runs,mean_battery,energy_wasted_frac";

inline void write_estimate(std::ostream& out, const std::string& policy, const ThroughputEstimate& est, Format format) {
    if (format == Format::json) {
        json j{{"policy", policy},
               {"mean", est.mean},
               {"std_error", est.std_error},
               {"horizon", est.horizon},
               {"runs", est.runs},
               {"mean_battery", est.mean_battery},
               {"energy_wasted_frac", est.energy_wasted_frac}};
        out << j.dump(2) << '\n';
        return;
    }
    using detail::num;
    out << kEstimateHeader << '\n'
        << policy << ',' << num(est.mean) << ',' << num(est.std_error) << ',' << est.horizon << ',' << est.runs
        << ',' << num(est.mean_battery) << ',' << num(est.energy_wasted_frac) << '\n';
}

inline ThroughputEstimate run_simulate(const SimulateArgs& args, std::ostream& out) {
    const SystemParams params{args.bbar, args.gamma};
    const auto model = parse_model(args.dist);
    const auto policy = parse_policy(args.policy, model, params);
    SimConfig cfg;
    cfg.horizon = args.horizon;
    cfg.runs = args.runs;
    cfg.seed = args.seed;
    cfg.initial_battery = args.initial_battery;
    cfg.workers = args.workers;
    const auto est = run(policy, model, params, cfg);
    write_estimate(out, args.policy, est, args.format);
    return est;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

struct SolveArgs {
    std::string dist;
    double bbar = 1.0;
    double gamma = 1.0;
    MdpConfig mdp;
};

/// Writes the solution file to `out` and a one-line summary to `log`.
inline MdpSolution run_solve(const SolveArgs& args, std::ostream& out, std::ostream& log) {
    const SystemParams params{args.bbar, args.gamma};
    const auto model = parse_model(args.dist);
    auto sol = solve(model, params, args.mdp);
    write_solution(out, sol);
    log << "gain=" << detail::num(sol.gain) << " iters=" << sol.iters_used << " span=" << detail::num(sol.final_span)
        << '\n';
    return sol;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// Builds a SweepSpec from JSON. Keys mirror SweepSpec; an optional "preset"
/// key supplies defaults that the remaining keys override.
///
/// {
///   "preset": "fig3",
///   "model": {"kind": "bernoulli", "p": 0.1},   // or uniform lo_frac/hi_frac,
///                                               // exp mean_frac, discrete value_fracs/probs
///   "bbar_grid": [0.1, 1, 10] | {"min": 0.1, "max": 1000, "points": 25},
///   "gamma": 1,
///   "policies": ["ff", "greedy", "const"],
///   "sim": {"horizon": 100000, "runs": 16, "seed": 1},
///   "include_mdp_optimal": false,
///   "mdp": {"n_states": 256, "n_actions": 128, "arrival_atoms": 32, "span_tol": 1e-7, "max_iters": 100000}
/// }
inline SweepSpec sweep_from_json(const json& j) {
    SweepSpec spec = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : SweepSpec{};
    if (!j.contains("preset")) spec.bbar_grid = log_grid(0.1, 1000.0, 25);
    try {
        if (j.contains("model")) {
            const auto& m = j.at("model");
            const auto kind = m.at("kind").get<std::string>();
            ModelFamily fam;
            using K = ModelFamily::Kind;
            if (kind == "bernoulli") {
                fam.kind = K::bernoulli;
                fam.p = m.at("p").get<double>();
            } else if (kind == "uniform") {
                fam.kind = K::uniform;
                fam.lo_frac = m.value("lo_frac", 0.0);
                fam.hi_frac = m.value("hi_frac", 1.0);
            } else if (kind == "exp") {
                fam.kind = K::exponential;
                fam.mean_frac = m.value("mean_frac", 0.1);
            } else if (kind == "discrete") {
                fam.kind = K::discrete;
                fam.value_fracs = m.at("value_fracs").get<std::vector<double>>();
                fam.probs = m.at("probs").get<std::vector<double>>();
            } else {
                throw FormatError("unknown model kind '" + kind + "'");
            }
            spec.model = fam;
        }
        if (j.contains("bbar_grid")) {
            const auto& g = j.at("bbar_grid");
            if (g.is_array()) {
                spec.bbar_grid = g.get<std::vector<double>>();
            } else {
                spec.bbar_grid = log_grid(g.at("min").get<double>(), g.at("max").get<double>(),
                                          g.at("points").get<std::size_t>());
            }
        }
        spec.gamma = j.value("gamma", spec.gamma);
        if (j.contains("policies")) spec.policies = j.at("policies").get<std::vector<std::string>>();
        if (j.contains("sim")) {
            const auto& s = j.at("sim");
            spec.sim.horizon = s.value("horizon", spec.sim.horizon);
            spec.sim.runs = s.value("runs", spec.sim.runs);
            spec.sim.seed = s.value("seed", spec.sim.seed);
        }
        spec.include_mdp_optimal = j.value("include_mdp_optimal", spec.include_mdp_optimal);
        if (j.contains("mdp")) {
            const auto& m = j.at("mdp");
            spec.mdp.n_states = m.value("n_states", spec.mdp.n_states);
            spec.mdp.n_actions = m.value("n_actions", spec.mdp.n_actions);
            spec.mdp.arrival_atoms = m.value("arrival_atoms", spec.mdp.arrival_atoms);
            spec.mdp.span_tol = m.value("span_tol", spec.mdp.span_tol);
            spec.mdp.max_iters = m.value("max_iters", spec.mdp.max_iters);
        }
        spec.workers = j.value("workers", spec.workers);
    } catch (const json::exception& e) {
        throw FormatError(std::string("sweep config: ") + e.what());
    }
    spec.validate();
    return spec;
}

inline SweepSpec load_sweep_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config '" + path + "'");
    try {
        return sweep_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("config '") + path + "': " + e.what());
    }
}

inline void write_sweep(std::ostream& out, const std::vector<SweepRow>& rows, Format format) {
    if (format == Format::csv) {
        write_sweep_csv(out, rows);
        return;
    }
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back({{"bbar", r.bbar},
                       {"policy", r.policy},
                       {"throughput", detail::opt(r.throughput)},
                       {"std_error", detail::opt(r.std_error)},
                       {"theta_optimal", detail::opt(r.theta_optimal)},
                       {"theta_source", r.theta_source},
                       {"upper_bound", detail::opt(r.upper_bound)},
                       {"additive_gap", detail::opt(r.additive_gap)},
                       {"ratio", detail::opt(r.ratio)},
                       {"error", r.error}});
    }
    out << arr.dump(2) << '\n';
}

}  // namespace ehpc::cli
