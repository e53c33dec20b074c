#ifndef EMEST_ERRORS_HPP
#define EMEST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace emest {

// Error taxonomy shared by the library and the CLI. The CLI maps these onto
// process exit codes: 0 success, 2 config error, 3 infeasible sample budget,
// 4 numerical failure, 5 missing ground truth.

// Malformed or invalid configuration / input (bad flag values, schema
// violations, dimension mismatches caused by caller input).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The requested estimation cannot run because the sample budget is too small
// for the batch schedule. Carries the smallest N that would be feasible so
// callers can report something actionable.
class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(const std::string& what, long min_feasible_n)
        : std::runtime_error(what), min_feasible_n(min_feasible_n) {}

    long min_feasible_n;
};

// Numerical failure inside the estimation pipeline (singular matrices,
// degenerate acceptance, exhausted batch supply mid-recursion).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Rejection sampling accepted nothing, so there is no conditional sample to
// work with. Recoverable once: the recursion retries with a fresh batch.
class EmptyAcceptanceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// A batch supplier ran out of data before the recursion finished.
class SupplierExhaustedError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// An operation that needs the true mean (scoring, oracle baselines) was given
// a dataset without the ground-truth trailer.
class MissingTruthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace emest

#endif
