// ehpc: bounds, simulation, dynamic programming and sweeps for
// energy-harvesting power control.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ehpc/cli.hpp"

namespace {

struct Output {
    std::ofstream file;
    std::ostream* stream = &std::cout;

    explicit Output(const std::string& path) {
        if (path.empty() || path == "-") return;
        file.open(path);
        if (!file) throw ehpc::FormatError("cannot open output file '" + path + "'");
        stream = &file;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online power control for energy-harvesting transmitters"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 1;
    std::string out_path;
    std::string format = "csv";
    app.add_option("--seed", seed, "Global random seed")->capture_default_str();
    app.add_option("--out", out_path, "Output path (default: standard output)");
    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    std::string dist;
    double bbar = 1.0;
    double gamma = 1.0;
    auto add_model_options = [&](CLI::App* sub) {
        sub->add_option("--dist", dist, "Arrival distribution, e.g. bernoulli:p=0.1 or exp:mean=1")->required();
        sub->add_option("--bbar", bbar, "Battery capacity")->required();
        sub->add_option("--gamma", gamma, "Channel gain")->capture_default_str();
    };

    auto* bounds = app.add_subcommand("bounds", "Analytic throughputs and bounds");
    add_model_options(bounds);

    ehpc::cli::SimulateArgs sim_args;
    std::optional<double> initial_battery;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo throughput of one policy");
    add_model_options(simulate);
    simulate->add_option("--policy", sim_args.policy, "ff, ff:q=<q>, greedy, const, bopt, tabular:<file>")
        ->capture_default_str();
    simulate->add_option("--horizon", sim_args.horizon, "Slots per trajectory")->capture_default_str();
    simulate->add_option("--runs", sim_args.runs, "Independent trajectories")->capture_default_str();
    simulate->add_option("--initial-battery", initial_battery, "Initial battery level (default: capacity)");
    simulate->add_option("--workers", sim_args.workers, "Worker threads (0 = all cores)");

    ehpc::cli::SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "Relative value iteration on a quantized battery grid");
    add_model_options(solve);
    solve->add_option("--grid", solve_args.mdp.n_states, "Battery grid points")->capture_default_str();
    solve->add_option("--actions", solve_args.mdp.n_actions, "Actions per state")->capture_default_str();
    solve->add_option("--atoms", solve_args.mdp.arrival_atoms, "Arrival quantization atoms")->capture_default_str();
    solve->add_option("--tol", solve_args.mdp.span_tol, "Span stopping tolerance")->capture_default_str();
    solve->add_option("--max-iters", solve_args.mdp.max_iters, "Iteration limit")->capture_default_str();
    solve->add_option("--workers", solve_args.mdp.workers, "Worker threads (0 = all cores)");

    std::string preset;
    std::string config;
    std::optional<long> sweep_horizon, sweep_runs;
    auto* sweep = app.add_subcommand("sweep", "Capacity sweep comparing policies with the optimum");
    auto* preset_opt =
        sweep->add_option("--preset", preset, "fig3, fig4, fig5, fig6 or fig7")
            ->check(CLI::IsMember({"fig3", "fig4", "fig5", "fig6", "fig7"}));
    sweep->add_option("--config", config, "JSON sweep configuration")->excludes(preset_opt);
    sweep->add_option("--horizon", sweep_horizon, "Override slots per trajectory");
    sweep->add_option("--runs", sweep_runs, "Override trajectories per point");

    CLI11_PARSE(app, argc, argv);

    try {
        Output out(out_path);
        const auto fmt = ehpc::cli::parse_format(format);
        if (*bounds) {
            ehpc::cli::run_bounds({dist, bbar, gamma, fmt}, *out.stream);
        } else if (*simulate) {
            sim_args.dist = dist;
            sim_args.bbar = bbar;
            sim_args.gamma = gamma;
            sim_args.seed = seed;
            sim_args.initial_battery = initial_battery;
            sim_args.format = fmt;
            ehpc::cli::run_simulate(sim_args, *out.stream);
        } else if (*solve) {
            solve_args.dist = dist;
            solve_args.bbar = bbar;
            solve_args.gamma = gamma;
            ehpc::cli::run_solve(solve_args, *out.stream, std::cerr);
        } else if (*sweep) {
            if (preset.empty() && config.empty()) throw ehpc::ParameterError("sweep needs --preset or --config");
            auto spec = config.empty() ? ehpc::preset(preset) : ehpc::cli::load_sweep_config(config);
            if (app.count("--seed")) spec.sim.seed = seed;
            if (sweep_horizon) spec.sim.horizon = *sweep_horizon;
            if (sweep_runs) spec.sim.runs = *sweep_runs;
            ehpc::cli::write_sweep(*out.stream, ehpc::run_sweep(spec), fmt);
        }
    } catch (const std::exception& e) {
        std::cerr << "ehpc: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
