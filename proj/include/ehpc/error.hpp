#pragma once

#include <stdexcept>
#include <string>

namespace ehpc {

/// Invalid model, policy or configuration parameters.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A policy was queried in a state outside its domain (e.g. battery > capacity).
class StateError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A policy emitted more power than the battery holds.
class AdmissibilityError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Exact enumeration would visit too many arrival sequences.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Relative value iteration did not reach the span tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double final_span, long iters)
        : std::runtime_error(what), final_span_(final_span), iters_(iters) {}

    double final_span() const noexcept { return final_span_; }
    long iters() const noexcept { return iters_; }

private:
    double final_span_;
    long iters_;
};

/// Malformed input text or file contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ehpc
