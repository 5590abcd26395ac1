#pragma once

// Average-reward dynamic programming on a quantized battery grid.
//
// The state is the battery level b on a uniform grid over [0, bbar]; the
// action g ranges over a per-state uniform grid on [0, b]; the next state is
// min(b - g + e, bbar) with e drawn from a finite arrival distribution. Bias
// values at off-grid next states are linearly interpolated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ehpc/analytic.hpp"
#include "ehpc/dist.hpp"
#include "ehpc/error.hpp"
#include "ehpc/policy.hpp"

namespace ehpc {

struct MdpConfig {
    std::size_t n_states = 512;
    std::size_t n_actions = 256;
    double span_tol = 1e-7;
    long max_iters = 100'000;
    std::size_t arrival_atoms = 64;
    unsigned workers = 0;       ///< 0 = hardware concurrency
    bool record_trace = false;  ///< keep the per-sweep (min, max) difference bracket

    void validate() const {
        if (n_states < 2) throw ParameterError("mdp: n_states must be at least 2");
        if (n_actions < 2) throw ParameterError("mdp: n_actions must be at least 2");
        if (!(span_tol > 0.0)) throw ParameterError("mdp: span_tol must be positive");
        if (max_iters < 1) throw ParameterError("mdp: max_iters must be positive");
        if (arrival_atoms < 2) throw ParameterError("mdp: arrival_atoms must be at least 2");
    }
};

struct MdpSolution {
    double bbar = 0.0;
    double gamma = 0.0;
    double gain = 0.0;
    double gain_lower = 0.0;  ///< min one-step difference of the final sweep
    double gain_upper = 0.0;  ///< max one-step difference of the final sweep
    std::vector<double> grid;
    std::vector<double> bias;  ///< h(grid[0]) == 0
    std::vector<double> policy_table;
    long iters_used = 0;
    double final_span = 0.0;
    std::vector<std::pair<double, double>> trace;
};

struct BackupResult {
    std::vector<double> values;
    std::vector<double> actions;
};

inline std::vector<double> uniform_grid(double bbar, std::size_t n) {
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i)
        grid[i] = i + 1 == n ? bbar : bbar * static_cast<double>(i) / static_cast<double>(n - 1);
    return grid;
}

/// One-step Bellman operator with the reward table and arrival alphabet
/// precomputed. apply() is deterministic for any worker count: states are
/// independent and no cross-state reductions happen.
class BellmanOperator {
public:
    BellmanOperator(std::vector<double> grid, const DiscreteEmpirical& arrivals, const SystemParams& params,
                    std::size_t n_actions, unsigned workers = 1)
        : grid_(std::move(grid)), bbar_(params.bbar), n_actions_(n_actions), workers_(std::max(1u, workers)) {
        params.validate();
        if (grid_.size() < 2) throw ParameterError("bellman: grid needs at least two points");
        if (n_actions_ < 2) throw ParameterError("bellman: n_actions must be at least 2");
        if (grid_.front() != 0.0 || std::abs(grid_.back() - bbar_) > 1e-12 * bbar_)
            throw ParameterError("bellman: grid must span [0, bbar]");
        for (std::size_t i = 1; i < grid_.size(); ++i)
            if (!(grid_[i] > grid_[i - 1])) throw ParameterError("bellman: grid must be strictly increasing");

        step_ = bbar_ / static_cast<double>(grid_.size() - 1);
        uniform_ = true;
        for (std::size_t i = 0; i < grid_.size(); ++i)
            if (std::abs(grid_[i] - step_ * static_cast<double>(i)) > 1e-9 * bbar_) uniform_ = false;

        std::vector<std::size_t> order(arrivals.values.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return arrivals.values[a] < arrivals.values[b]; });
        for (auto k : order) {
            if (arrivals.probs[k] <= 0.0) continue;
            energy_.push_back(arrivals.values[k]);
            prob_.push_back(arrivals.probs[k]);
        }
        if (energy_.empty()) throw ParameterError("bellman: empty arrival distribution");
        suffix_.assign(prob_.size() + 1, 0.0);
        for (std::size_t k = prob_.size(); k-- > 0;) suffix_[k] = suffix_[k + 1] + prob_[k];

        const std::size_t n = grid_.size();
        power_.resize(n * n_actions_);
        reward_.resize(n * n_actions_);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n_actions_; ++j) {
                const double g = j + 1 == n_actions_
                                     ? grid_[i]
                                     : grid_[i] * static_cast<double>(j) / static_cast<double>(n_actions_ - 1);
                power_[i * n_actions_ + j] = g;
                reward_[i * n_actions_ + j] = rate(params.gamma, g);
            }
        }
    }

    const std::vector<double>& grid() const noexcept { return grid_; }

    /// values[i] = max_g { rate(g) + sum_e P(e) h(min(b_i - g + e, bbar)) }.
    void apply(const std::vector<double>& bias, std::vector<double>& values, std::vector<double>& actions) const {
        const std::size_t n = grid_.size();
        if (bias.size() != n) throw ParameterError("bellman: bias size does not match grid");
        values.resize(n);
        actions.resize(n);
        auto work = [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) backup_state(i, bias, values[i], actions[i]);
        };
        const std::size_t w = std::min<std::size_t>(workers_, n);
        if (w <= 1) {
            work(0, n);
            return;
        }
        std::vector<std::jthread> pool;
        pool.reserve(w);
        for (std::size_t t = 0; t < w; ++t) pool.emplace_back(work, n * t / w, n * (t + 1) / w);
    }

private:
    double interp(const std::vector<double>& h, double x) const {
        if (x >= bbar_) return h.back();
        if (x <= 0.0) return h.front();
        std::size_t lo;
        if (uniform_) {
            lo = std::min(static_cast<std::size_t>(x / step_), grid_.size() - 2);
        } else {
            lo = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), x) - grid_.begin()) - 1;
            lo = std::min(lo, grid_.size() - 2);
        }
        const double t = (x - grid_[lo]) / (grid_[lo + 1] - grid_[lo]);
        return h[lo] + t * (h[lo + 1] - h[lo]);
    }

    void backup_state(std::size_t i, const std::vector<double>& h, double& best_value, double& best_action) const {
        best_value = -std::numeric_limits<double>::infinity();
        best_action = 0.0;
        const double b = grid_[i];
        const double full = h.back();
        for (std::size_t j = 0; j < n_actions_; ++j) {
            const double g = power_[i * n_actions_ + j];
            const double left = b - g;
            double future = 0.0;
            for (std::size_t k = 0; k < energy_.size(); ++k) {
                const double x = left + energy_[k];
                if (x >= bbar_) {
                    future += suffix_[k] * full;
                    break;
                }
                future += prob_[k] * interp(h, x);
            }
            const double v = reward_[i * n_actions_ + j] + future;
            if (v > best_value) {
                best_value = v;
                best_action = g;
            }
        }
    }

    std::vector<double> grid_;
    double bbar_;
    std::size_t n_actions_;
    unsigned workers_;
    double step_ = 0.0;
    bool uniform_ = true;
    std::vector<double> energy_, prob_, suffix_;
    std::vector<double> power_, reward_;
};

/// Single Bellman backup; see BellmanOperator::apply.
inline BackupResult bellman_backup(const std::vector<double>& bias, const std::vector<double>& grid,
                                   const DiscreteEmpirical& arrivals, const SystemParams& params,
                                   std::size_t n_actions) {
    BellmanOperator op(grid, arrivals, params, n_actions);
    BackupResult r;
    op.apply(bias, r.values, r.actions);
    return r;
}

inline unsigned resolve_workers(unsigned requested) {
    if (requested) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Relative value iteration with reference state b = 0. Stops when the span
/// of the one-step difference falls below cfg.span_tol; the gain is the
/// midpoint of that final bracket.
inline MdpSolution solve(const EnergyModel& model, const SystemParams& params, const MdpConfig& cfg = {}) {
    params.validate();
    cfg.validate();
    validate(model);

    const auto arrivals = discretize(model, params.bbar, cfg.arrival_atoms);
    BellmanOperator op(uniform_grid(params.bbar, cfg.n_states), arrivals, params, cfg.n_actions,
                       resolve_workers(cfg.workers));

    MdpSolution sol;
    sol.bbar = params.bbar;
    sol.gamma = params.gamma;
    sol.grid = op.grid();
    std::vector<double> h(cfg.n_states, 0.0), v, actions;

    double span = std::numeric_limits<double>::infinity();
    for (long it = 1; it <= cfg.max_iters; ++it) {
        op.apply(h, v, actions);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double d = v[i] - h[i];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        span = hi - lo;
        if (cfg.record_trace) sol.trace.emplace_back(lo, hi);
        const double ref = v.front();
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = v[i] - ref;
        if (span < cfg.span_tol) {
            sol.gain_lower = lo;
            sol.gain_upper = hi;
            sol.gain = 0.5 * (lo + hi);
            sol.bias = std::move(h);
            sol.policy_table = std::move(actions);
            sol.iters_used = it;
            sol.final_span = span;
            return sol;
        }
    }
    std::ostringstream msg;
    msg << "relative value iteration did not converge in " << cfg.max_iters << " sweeps (span " << span << ")";
    throw ConvergenceError(msg.str(), span, cfg.max_iters);
}

/// Tabular policy view of a solution.
inline Tabular to_tabular(const MdpSolution& sol) { return Tabular{sol.grid, sol.policy_table}; }

// ---------------------------------------------------------------------------
// Solution file: a versioned header followed by grid/bias/policy CSV columns.
//
//   ehpc-mdp-solution,1
//   n_states,bbar,gamma,gain,iters_used,final_span
//   <values>
//   grid,bias,policy
//   <one row per grid point>
// ---------------------------------------------------------------------------

inline constexpr const char* kSolutionMagic = "ehpc-mdp-solution";
inline constexpr int kSolutionVersion = 1;

inline void write_solution(std::ostream& os, const MdpSolution& sol) {
    const auto old = os.precision(17);
    os << kSolutionMagic << ',' << kSolutionVersion << '\n';
    os << "n_states,bbar,gamma,gain,iters_used,final_span\n";
    os << sol.grid.size() << ',' << sol.bbar << ',' << sol.gamma << ',' << sol.gain << ',' << sol.iters_used << ','
       << sol.final_span << '\n';
    os << "grid,bias,policy\n";
    for (std::size_t i = 0; i < sol.grid.size(); ++i)
        os << sol.grid[i] << ',' << sol.bias[i] << ',' << sol.policy_table[i] << '\n';
    os.precision(old);
}

inline MdpSolution read_solution(std::istream& is) {
    auto next_line = [&](const char* what) {
        std::string line;
        if (!std::getline(is, line)) throw FormatError(std::string("solution file: missing ") + what);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    auto fields = [](const std::string& line) {
        std::vector<std::string> out;
        for (auto f : detail::split(line, ',')) out.emplace_back(f);
        return out;
    };
    auto num = [](const std::string& s) { return detail::parse_number(s, "solution file"); };

    const auto magic = fields(next_line("header"));
    if (magic.size() != 2 || magic[0] != kSolutionMagic) throw FormatError("solution file: bad magic line");
    if (magic[1] != std::to_string(kSolutionVersion))
        throw FormatError("solution file: unsupported version " + magic[1]);
    if (next_line("summary header") != "n_states,bbar,gamma,gain,iters_used,final_span")
        throw FormatError("solution file: bad summary header");
    const auto summary = fields(next_line("summary"));
    if (summary.size() != 6) throw FormatError("solution file: bad summary row");

    MdpSolution sol;
    const auto n = static_cast<std::size_t>(num(summary[0]));
    sol.bbar = num(summary[1]);
    sol.gamma = num(summary[2]);
    sol.gain = num(summary[3]);
    sol.gain_lower = sol.gain_upper = sol.gain;
    sol.iters_used = static_cast<long>(num(summary[4]));
    sol.final_span = num(summary[5]);
    if (next_line("column header") != "grid,bias,policy") throw FormatError("solution file: bad column header");
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = fields(next_line("table row"));
        if (row.size() != 3) throw FormatError("solution file: bad table row");
        sol.grid.push_back(num(row[0]));
        sol.bias.push_back(num(row[1]));
        sol.policy_table.push_back(num(row[2]));
    }
    return sol;
}

}  // namespace ehpc
