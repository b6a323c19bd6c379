#pragma once

#include <stdexcept>
#include <string>

namespace sbtrpo {

/// Invalid arguments to an operation (dimension mismatch, out of range, ...).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Operation called in a state that does not admit it (e.g. step after done).
struct StateError : std::runtime_error {
    explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerics broke down: non-finite intermediates, CG on a broken operator,
/// importance ratios far outside the trust region.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// No strictly safe policy exists for the requested tabular problem.
struct InfeasibleError : std::runtime_error {
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// The analytic QP preconditions do not hold (parallel or zero gradients,
/// singular metric, tangential cost demand).
struct DegenerateInstance : std::runtime_error {
    explicit DegenerateInstance(const std::string& what) : std::runtime_error(what) {}
};

/// Bad configuration file or override.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Training run failed (I/O or unrecoverable runtime error).
struct RunError : std::runtime_error {
    explicit RunError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sbtrpo
