#pragma once

// Energy arrival models: i.i.d. harvesting distributions, their statistics
// after clipping at the battery capacity, sampling and quantization.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ehpc/error.hpp"
#include "ehpc/rng.hpp"

namespace ehpc {

/// Battery capacity and channel coefficient of a single transmitter.
struct SystemParams {
    double bbar = 1.0;   ///< battery capacity
    double gamma = 1.0;  ///< channel SNR coefficient

    void validate() const {
        if (!(bbar > 0.0) || !std::isfinite(bbar)) throw ParameterError("battery capacity must be positive and finite");
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("channel gain must be positive and finite");
    }
};

/// Arrivals equal `amplitude` with probability p, else 0. An unset amplitude
/// means "the battery capacity", i.e. every arrival fully recharges.
struct Bernoulli {
    double p = 0.5;
    std::optional<double> amplitude;

    double amp(double bbar) const { return amplitude.value_or(bbar); }
};

struct Uniform {
    double lo = 0.0;
    double hi = 1.0;
};

/// Parameterized by the mean, not the rate.
struct Exponential {
    double mean = 1.0;
};

struct DiscreteEmpirical {
    std::vector<double> values;
    std::vector<double> probs;
};

using EnergyModel = std::variant<Bernoulli, Uniform, Exponential, DiscreteEmpirical>;

namespace detail {
template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }
}  // namespace detail

/// Throws ParameterError unless the model is well formed and has a positive mean.
inline void validate(const EnergyModel& model) {
    std::visit(detail::overloaded{
                   [](const Bernoulli& m) {
                       if (!detail::is_probability(m.p)) throw ParameterError("bernoulli: p must lie in [0,1]");
                       if (m.p == 0.0) throw ParameterError("bernoulli: p = 0 gives zero mean arrivals");
                       if (m.amplitude && !(*m.amplitude > 0.0 && std::isfinite(*m.amplitude)))
                           throw ParameterError("bernoulli: amplitude must be positive");
                   },
                   [](const Uniform& m) {
                       if (!(m.lo >= 0.0) || !std::isfinite(m.hi)) throw ParameterError("uniform: lo must be >= 0");
                       if (!(m.lo <= m.hi)) throw ParameterError("uniform: lo must not exceed hi");
                       if (!(m.hi > 0.0)) throw ParameterError("uniform: zero mean arrivals");
                   },
                   [](const Exponential& m) {
                       if (!(m.mean > 0.0) || !std::isfinite(m.mean)) throw ParameterError("exp: mean must be positive");
                   },
                   [](const DiscreteEmpirical& m) {
                       if (m.values.empty() || m.values.size() != m.probs.size())
                           throw ParameterError("discrete: values and probs must be non-empty and equally long");
                       double total = 0.0;
                       double mean = 0.0;
                       for (std::size_t i = 0; i < m.values.size(); ++i) {
                           if (!(m.values[i] >= 0.0) || !std::isfinite(m.values[i]))
                               throw ParameterError("discrete: values must be non-negative");
                           if (!detail::is_probability(m.probs[i]))
                               throw ParameterError("discrete: probabilities must lie in [0,1]");
                           total += m.probs[i];
                           mean += m.probs[i] * m.values[i];
                       }
                       if (std::abs(total - 1.0) > 1e-12) throw ParameterError("discrete: probabilities must sum to 1");
                       if (!(mean > 0.0)) throw ParameterError("discrete: zero mean arrivals");
                   },
               },
               model);
}

/// E[min(E_t, bbar)], in closed form for every variant.
inline double clipped_mean(const EnergyModel& model, double bbar) {
    validate(model);
    if (!(bbar > 0.0)) throw ParameterError("battery capacity must be positive");
    return std::visit(detail::overloaded{
                          [&](const Bernoulli& m) { return m.p * std::min(m.amp(bbar), bbar); },
                          [&](const Uniform& m) {
                              if (m.hi <= bbar) return 0.5 * (m.lo + m.hi);
                              if (m.lo >= bbar) return bbar;
                              const double width = m.hi - m.lo;
                              return (0.5 * (bbar * bbar - m.lo * m.lo) + bbar * (m.hi - bbar)) / width;
                          },
                          [&](const Exponential& m) { return -m.mean * std::expm1(-bbar / m.mean); },
                          [&](const DiscreteEmpirical& m) {
                              double mu = 0.0;
                              for (std::size_t i = 0; i < m.values.size(); ++i)
                                  mu += m.probs[i] * std::min(m.values[i], bbar);
                              return mu;
                          },
                      },
                      model);
}

/// One draw from the unclipped distribution. `bbar` resolves a default
/// Bernoulli amplitude and is otherwise unused.
inline double sample(const EnergyModel& model, Stream& stream, double bbar) {
    return std::visit(detail::overloaded{
                          [&](const Bernoulli& m) { return stream.uniform() < m.p ? m.amp(bbar) : 0.0; },
                          [&](const Uniform& m) { return m.lo + (m.hi - m.lo) * stream.uniform(); },
                          [&](const Exponential& m) { return -m.mean * std::log1p(-stream.uniform()); },
                          [&](const DiscreteEmpirical& m) {
                              const double u = stream.uniform();
                              double acc = 0.0;
                              for (std::size_t i = 0; i + 1 < m.values.size(); ++i) {
                                  acc += m.probs[i];
                                  if (u < acc) return m.values[i];
                              }
                              return m.values.back();
                          },
                      },
                      model);
}

/// Quantizes min(E_t, bbar) onto at most `n_atoms` support points.
///
/// [0, bbar] is split into n_atoms equal cells; each cell's probability mass
/// is placed at the conditional mean of the clipped variable inside the cell,
/// so the clipped mean is preserved. Empty cells are dropped.
inline DiscreteEmpirical discretize(const EnergyModel& model, double bbar, std::size_t n_atoms) {
    validate(model);
    if (!(bbar > 0.0)) throw ParameterError("battery capacity must be positive");
    if (n_atoms < 2) throw ParameterError("discretize: n_atoms must be at least 2");

    const double width = bbar / static_cast<double>(n_atoms);
    std::vector<double> mass(n_atoms, 0.0);
    std::vector<double> moment(n_atoms, 0.0);

    auto cell_of = [&](double x) {
        if (x >= bbar) return n_atoms - 1;
        return std::min(static_cast<std::size_t>(x / width), n_atoms - 1);
    };
    auto add_point = [&](double x, double prob) {
        x = std::min(x, bbar);
        const std::size_t k = cell_of(x);
        mass[k] += prob;
        moment[k] += prob * x;
    };
    auto edge = [&](std::size_t k) { return k == n_atoms ? bbar : width * static_cast<double>(k); };

    std::visit(detail::overloaded{
                   [&](const Bernoulli& m) {
                       add_point(0.0, 1.0 - m.p);
                       add_point(m.amp(bbar), m.p);
                   },
                   [&](const Uniform& m) {
                       if (m.hi == m.lo) {
                           add_point(m.lo, 1.0);
                           return;
                       }
                       const double span = m.hi - m.lo;
                       for (std::size_t k = 0; k < n_atoms; ++k) {
                           const double a = std::max(edge(k), m.lo);
                           const double b = std::min(edge(k + 1), m.hi);
                           if (b <= a) continue;
                           const double pm = (b - a) / span;
                           mass[k] += pm;
                           moment[k] += pm * 0.5 * (a + b);
                       }
                       if (m.hi > bbar) add_point(bbar, (m.hi - std::max(bbar, m.lo)) / span);
                   },
                   [&](const Exponential& m) {
                       for (std::size_t k = 0; k < n_atoms; ++k) {
                           const double a = edge(k);
                           const double d = edge(k + 1) - a;
                           const double r = d / m.mean;
                           const double pm = -std::exp(-a / m.mean) * std::expm1(-r);
                           if (!(pm > 0.0)) continue;
                           const double cond = a + m.mean - d / std::expm1(r);
                           mass[k] += pm;
                           moment[k] += pm * cond;
                       }
                       add_point(bbar, std::exp(-bbar / m.mean));
                   },
                   [&](const DiscreteEmpirical& m) {
                       for (std::size_t i = 0; i < m.values.size(); ++i) add_point(m.values[i], m.probs[i]);
                   },
               },
               model);

    DiscreteEmpirical out;
    for (std::size_t k = 0; k < n_atoms; ++k) {
        if (!(mass[k] > 0.0)) continue;
        const double lo = width * static_cast<double>(k);
        const double hi = k + 1 == n_atoms ? bbar : width * static_cast<double>(k + 1);
        out.values.push_back(std::clamp(moment[k] / mass[k], lo, hi));
        out.probs.push_back(mass[k]);
    }
    return out;
}

/// For a Bernoulli model whose arrivals fully recharge the battery, returns p.
inline std::optional<double> full_recharge_probability(const EnergyModel& model, double bbar) {
    if (const auto* b = std::get_if<Bernoulli>(&model); b && b->amp(bbar) >= bbar) return b->p;
    return std::nullopt;
}

/// Finite-support view of the model when it has one (Bernoulli or discrete).
inline std::optional<DiscreteEmpirical> as_discrete(const EnergyModel& model, double bbar) {
    if (const auto* b = std::get_if<Bernoulli>(&model)) {
        if (b->p == 1.0) return DiscreteEmpirical{{b->amp(bbar)}, {1.0}};
        return DiscreteEmpirical{{0.0, b->amp(bbar)}, {1.0 - b->p, b->p}};
    }
    if (const auto* d = std::get_if<DiscreteEmpirical>(&model)) return *d;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Text grammar: bernoulli:p=0.1[,amp=10]  uniform:lo=0,hi=10  exp:mean=1
//               discrete:v=0|1|2,p=0.5|0.3|0.2
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_number(std::string_view text, std::string_view what) {
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty())
        throw FormatError("malformed number '" + std::string(text) + "' for " + std::string(what));
    return value;
}

inline std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

inline std::vector<double> parse_list(std::string_view text, std::string_view what) {
    std::vector<double> out;
    for (auto part : split(text, '|')) out.push_back(parse_number(part, what));
    return out;
}

/// Shortest text that reads back to the same double.
inline std::string format_number(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/// Parses the distribution grammar; throws FormatError or ParameterError.
inline EnergyModel parse_model(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view kind = text.substr(0, colon);
    std::vector<std::pair<std::string_view, std::string_view>> kv;
    if (colon != std::string_view::npos) {
        for (auto item : detail::split(text.substr(colon + 1), ',')) {
            const auto eq = item.find('=');
            if (eq == std::string_view::npos) throw FormatError("expected key=value in '" + std::string(item) + "'");
            kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
        }
    }
    auto take = [&](std::string_view key) -> std::optional<std::string_view> {
        for (auto it = kv.begin(); it != kv.end(); ++it) {
            if (it->first == key) {
                auto v = it->second;
                kv.erase(it);
                return v;
            }
        }
        return std::nullopt;
    };
    auto require = [&](std::string_view key) {
        auto v = take(key);
        if (!v) throw FormatError(std::string(kind) + ": missing '" + std::string(key) + "'");
        return *v;
    };

    EnergyModel model;
    if (kind == "bernoulli") {
        Bernoulli m;
        m.p = detail::parse_number(require("p"), "p");
        if (auto amp = take("amp")) m.amplitude = detail::parse_number(*amp, "amp");
        model = m;
    } else if (kind == "uniform") {
        Uniform m;
        m.lo = detail::parse_number(require("lo"), "lo");
        m.hi = detail::parse_number(require("hi"), "hi");
        model = m;
    } else if (kind == "exp") {
        model = Exponential{detail::parse_number(require("mean"), "mean")};
    } else if (kind == "discrete") {
        DiscreteEmpirical m;
        m.values = detail::parse_list(require("v"), "v");
        m.probs = detail::parse_list(require("p"), "p");
        model = std::move(m);
    } else {
        throw FormatError("unknown distribution '" + std::string(kind) + "'");
    }
    if (!kv.empty()) throw FormatError("unknown key '" + std::string(kv.front().first) + "'");
    validate(model);
    return model;
}

inline std::string to_string(const EnergyModel& model) {
    using detail::format_number;
    return std::visit(detail::overloaded{
                          [](const Bernoulli& m) {
                              std::string s = "bernoulli:p=" + format_number(m.p);
                              if (m.amplitude) s += ",amp=" + format_number(*m.amplitude);
                              return s;
                          },
                          [](const Uniform& m) {
                              return "uniform:lo=" + format_number(m.lo) + ",hi=" + format_number(m.hi);
                          },
                          [](const Exponential& m) { return "exp:mean=" + format_number(m.mean); },
                          [](const DiscreteEmpirical& m) {
                              std::string v, p;
                              for (std::size_t i = 0; i < m.values.size(); ++i) {
                                  if (i) {
                                      v += '|';
                                      p += '|';
                                  }
                                  v += format_number(m.values[i]);
                                  p += format_number(m.probs[i]);
                              }
                              return "discrete:v=" + v + ",p=" + p;
                          },
                      },
                      model);
}

}  // namespace ehpc
