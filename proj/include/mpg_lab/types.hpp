#pragma once

#include <Eigen/Dense>
#include <exception>
#include <stdexcept>
#include <string>

namespace mpg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for all library errors. The CLI maps each subclass to a
/// distinct process exit code; library users can catch subclasses to
/// distinguish failure modes.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data (bad file, dimension mismatch,
/// internally contradictory model description). Exit code 1.
class SchemaError : public Error {
public:
  using Error::Error;
};

/// Model violates a standing assumption required for the analysis
/// (unstable open loop, unbounded constraint set, nonconvex objective,
/// insufficient monotonicity). Exit code 2.
class AssumptionError : public Error {
public:
  using Error::Error;
};

/// An iterative solver failed to reach its tolerance within its budget.
/// Exit code 3.
class SolverError : public Error {
public:
  using Error::Error;
};

/// A regularity condition needed for a local result does not hold at the
/// computed point (weakly active constraint, rank-deficient active set,
/// singular sensitivity system). Exit code 4.
class RegularityError : public Error {
public:
  using Error::Error;
};

/// A search terminated without either a positive result or evidence of
/// infeasibility. Exit code 5.
class InconclusiveError : public Error {
public:
  using Error::Error;
};

/// Exit code associated with an error class, for process boundaries.
int exit_code_for(const Error& e);

/// Rethrow a captured exception with a context prefix on the message,
/// preserving the error subclass. Non-library exceptions pass through
/// unchanged.
[[noreturn]] inline void rethrow_with_context(std::exception_ptr ep, const std::string& prefix) {
  try {
    std::rethrow_exception(ep);
  } catch (const SchemaError& e) {
    throw SchemaError(prefix + e.what());
  } catch (const AssumptionError& e) {
    throw AssumptionError(prefix + e.what());
  } catch (const SolverError& e) {
    throw SolverError(prefix + e.what());
  } catch (const RegularityError& e) {
    throw RegularityError(prefix + e.what());
  } catch (const InconclusiveError& e) {
    throw InconclusiveError(prefix + e.what());
  }
}

} // namespace mpg
