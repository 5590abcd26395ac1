#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "ehpc/mdp.hpp"
#include "ehpc/sim.hpp"

using namespace ehpc;

namespace {

double lerp_on(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x >= xs.back()) return ys.back();
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        if (x <= xs[i + 1]) return ys[i] + (x - xs[i]) / (xs[i + 1] - xs[i]) * (ys[i + 1] - ys[i]);
    return ys.back();
}

double discretization_slack(const MdpConfig& cfg, const SystemParams& params) {
    const double spacing = params.bbar / static_cast<double>(cfg.n_states - 1);
    return 2.0 * spacing * params.gamma / std::numbers::ln2;
}

}  // namespace

TEST(BellmanBackup, DeterministicFullRechargeAtCapacity) {
    const SystemParams params{3.0, 1.0};
    const auto grid = uniform_grid(3.0, 7);
    const DiscreteEmpirical arrivals{{3.0}, {1.0}};
    const auto r = bellman_backup(std::vector<double>(7, 0.0), grid, arrivals, params, 16);
    EXPECT_DOUBLE_EQ(r.values.back(), 0.5 * std::log2(4.0));
    EXPECT_DOUBLE_EQ(r.actions.back(), 3.0);
}

TEST(BellmanBackup, ZeroBiasIsGreedy) {
    const SystemParams params{5.0, 2.0};
    const auto grid = uniform_grid(5.0, 11);
    const DiscreteEmpirical arrivals{{0.0, 1.0, 4.0}, {0.2, 0.5, 0.3}};
    const auto r = bellman_backup(std::vector<double>(11, 0.0), grid, arrivals, params, 9);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_DOUBLE_EQ(r.actions[i], grid[i]);
        EXPECT_DOUBLE_EQ(r.values[i], rate(2.0, grid[i]));
    }
}

TEST(BellmanBackup, ThreeStateToyMatchesEnumeration) {
    const SystemParams params{1.0, 1.0};
    const std::vector<double> grid{0.0, 0.5, 1.0};
    const std::vector<double> bias{0.0, 0.3, 0.45};
    const DiscreteEmpirical arrivals{{0.0, 1.0}, {0.5, 0.5}};
    for (std::size_t n_actions : {2u, 3u, 5u}) {
        const auto r = bellman_backup(bias, grid, arrivals, params, n_actions);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double best = -1e300, best_g = -1.0;
            for (std::size_t j = 0; j < n_actions; ++j) {
                const double g = grid[i] * static_cast<double>(j) / static_cast<double>(n_actions - 1);
                double v = 0.5 * std::log2(1.0 + g);
                for (std::size_t k = 0; k < 2; ++k)
                    v += arrivals.probs[k] * lerp_on(grid, bias, std::min(grid[i] - g + arrivals.values[k], 1.0));
                if (v > best) {
                    best = v;
                    best_g = g;
                }
            }
            EXPECT_NEAR(r.values[i], best, 1e-14) << "state " << i << " actions " << n_actions;
            EXPECT_NEAR(r.actions[i], best_g, 1e-14);
        }
    }
}

TEST(BellmanBackup, RejectsGridNotSpanningCapacity) {
    const DiscreteEmpirical arrivals{{1.0}, {1.0}};
    EXPECT_THROW(bellman_backup({0.0, 0.0}, {0.0, 0.5}, arrivals, {1.0, 1.0}, 4), ParameterError);
    EXPECT_THROW(bellman_backup({0.0}, {0.0}, arrivals, {1.0, 1.0}, 4), ParameterError);
}

TEST(Solve, DeterministicArrivalsGainIsFullRate) {
    const auto sol = solve(Bernoulli{1.0, std::nullopt}, {3.0, 1.0});
    EXPECT_NEAR(sol.gain, 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(sol.policy_table.back(), 3.0);
    EXPECT_EQ(sol.bias.front(), 0.0);
}

TEST(Solve, BernoulliGainMatchesClosedForm) {
    const SystemParams params{10.0, 1.0};
    const auto sol = solve(Bernoulli{0.1, std::nullopt}, params);
    EXPECT_NEAR(sol.gain, bernoulli_optimal_throughput(solve_bernoulli_kkt(0.1, params)), 5e-3);
}

TEST(Solve, PolicyAtCapacityMatchesFirstKktAllocation) {
    const SystemParams params{1.0, 1.0};
    MdpConfig cfg;
    const auto sol = solve(Bernoulli{0.5, std::nullopt}, params, cfg);
    const auto alloc = solve_bernoulli_kkt(0.5, params);
    EXPECT_NEAR(sol.policy_table.back(), alloc.allocations[0], params.bbar / static_cast<double>(cfg.n_actions - 1));
}

TEST(Solve, BracketIsMonotoneAndContainsGain) {
    MdpConfig cfg;
    cfg.n_states = 128;
    cfg.n_actions = 64;
    cfg.record_trace = true;
    for (const EnergyModel& m : {EnergyModel{Bernoulli{0.2, std::nullopt}}, EnergyModel{Uniform{0.0, 6.0}},
                                 EnergyModel{Exponential{0.6}}}) {
        const auto sol = solve(m, {6.0, 1.0}, cfg);
        ASSERT_EQ(sol.trace.size(), static_cast<std::size_t>(sol.iters_used));
        for (std::size_t k = 0; k < sol.trace.size(); ++k) {
            EXPECT_LE(sol.trace[k].first, sol.gain + 1e-12);
            EXPECT_GE(sol.trace[k].second, sol.gain - 1e-12);
            if (k > 0) {
                EXPECT_GE(sol.trace[k].first, sol.trace[k - 1].first - 1e-12);
                EXPECT_LE(sol.trace[k].second, sol.trace[k - 1].second + 1e-12);
            }
        }
        EXPECT_LT(sol.final_span, cfg.span_tol);
        EXPECT_EQ(sol.gain_upper - sol.gain_lower, sol.final_span);
    }
}

TEST(Solve, GainBelowUpperBoundPlusSlack) {
    MdpConfig cfg;
    cfg.n_states = 128;
    cfg.n_actions = 64;
    for (const EnergyModel& m : {EnergyModel{Bernoulli{0.3, std::nullopt}}, EnergyModel{Uniform{0.0, 2.0}},
                                 EnergyModel{Exponential{0.4}},
                                 EnergyModel{DiscreteEmpirical{{0.0, 1.0, 9.0}, {0.5, 0.3, 0.2}}}}) {
        for (double gamma : {0.5, 3.0}) {
            const SystemParams params{4.0, gamma};
            const auto sol = solve(m, params, cfg);
            EXPECT_LE(sol.gain, upper_bound(clipped_mean(m, 4.0), gamma) + discretization_slack(cfg, params));
            for (std::size_t i = 0; i < sol.grid.size(); ++i) {
                EXPECT_GE(sol.policy_table[i], 0.0);
                EXPECT_LE(sol.policy_table[i], sol.grid[i]);
                EXPECT_TRUE(std::isfinite(sol.bias[i]));
            }
        }
    }
}

TEST(Solve, GridRefinementConvergesToClosedForm) {
    const SystemParams params{10.0, 1.0};
    const double theta = bernoulli_optimal_throughput(solve_bernoulli_kkt(0.1, params));
    double prev_err = 1.0;
    for (std::size_t n : {128u, 256u, 512u}) {
        MdpConfig cfg;
        cfg.n_states = n;
        const double err = std::abs(solve(Bernoulli{0.1, std::nullopt}, params, cfg).gain - theta);
        EXPECT_LE(err, prev_err + 1e-6) << "n_states " << n;
        EXPECT_LT(err, 5e-3);
        prev_err = err;
    }
}

TEST(Solve, DeterministicForAnyWorkerCount) {
    MdpConfig one, many;
    one.n_states = many.n_states = 96;
    one.n_actions = many.n_actions = 48;
    one.workers = 1;
    many.workers = 3;
    const auto a = solve(Exponential{0.7}, {3.0, 1.0}, one);
    const auto b = solve(Exponential{0.7}, {3.0, 1.0}, many);
    EXPECT_EQ(a.gain, b.gain);
    EXPECT_EQ(a.bias, b.bias);
    EXPECT_EQ(a.policy_table, b.policy_table);
}

TEST(Solve, NonConvergenceCarriesFinalSpan) {
    MdpConfig cfg;
    cfg.n_states = 32;
    cfg.n_actions = 8;
    cfg.max_iters = 1;
    try {
        solve(Exponential{0.3}, {3.0, 1.0}, cfg);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.final_span(), cfg.span_tol);
        EXPECT_EQ(e.iters(), 1);
    }
}

TEST(Solve, RejectsBadConfig) {
    MdpConfig cfg;
    cfg.n_states = 1;
    EXPECT_THROW(solve(Exponential{1.0}, {1.0, 1.0}, cfg), ParameterError);
    cfg = {};
    cfg.span_tol = 0.0;
    EXPECT_THROW(solve(Exponential{1.0}, {1.0, 1.0}, cfg), ParameterError);
    cfg = {};
    cfg.n_actions = 1;
    EXPECT_THROW(solve(Exponential{1.0}, {1.0, 1.0}, cfg), ParameterError);
}

TEST(Solve, TabularReplayMatchesGain) {
    MdpConfig cfg;
    cfg.n_states = 256;
    cfg.n_actions = 128;
    const SystemParams params{4.0, 1.0};
    for (const EnergyModel& m : {EnergyModel{Bernoulli{0.3, std::nullopt}}, EnergyModel{Uniform{0.0, 4.0}}}) {
        const auto sol = solve(m, params, cfg);
        SimConfig sim;
        sim.horizon = 200'000;
        sim.runs = 16;
        sim.seed = 9;
        const auto est = run(to_tabular(sol), m, params, sim);
        EXPECT_NEAR(est.mean, sol.gain, 3.0 * est.std_error + discretization_slack(cfg, params)) << to_string(m);
    }
}

TEST(SolutionFile, RoundTrips) {
    MdpConfig cfg;
    cfg.n_states = 40;
    cfg.n_actions = 16;
    const auto sol = solve(Uniform{0.0, 2.0}, {2.0, 1.5}, cfg);
    std::stringstream ss;
    write_solution(ss, sol);
    const auto back = read_solution(ss);
    EXPECT_EQ(back.grid, sol.grid);
    EXPECT_EQ(back.bias, sol.bias);
    EXPECT_EQ(back.policy_table, sol.policy_table);
    EXPECT_EQ(back.gain, sol.gain);
    EXPECT_EQ(back.bbar, sol.bbar);
    EXPECT_EQ(back.gamma, sol.gamma);
    EXPECT_EQ(back.iters_used, sol.iters_used);
}

TEST(SolutionFile, RejectsBadInput) {
    std::stringstream wrong_magic("something-else,1\n");
    EXPECT_THROW(read_solution(wrong_magic), FormatError);
    std::stringstream wrong_version("ehpc-mdp-solution,9\n");
    EXPECT_THROW(read_solution(wrong_version), FormatError);
    std::stringstream truncated(
        "ehpc-mdp-solution,1\nn_states,bbar,gamma,gain,iters_used,final_span\n3,1,1,0.2,4,1e-8\ngrid,bias,policy\n0,0,0\n");
    EXPECT_THROW(read_solution(truncated), FormatError);
}
