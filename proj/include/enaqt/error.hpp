#pragma once

#include <stdexcept>
#include <string>

namespace enaqt {

/// Thrown when a lattice, rate set or run configuration violates its invariants.
class InvalidSpec : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A closed form is requested outside the configurations it covers (e.g. even chains).
class UnsupportedConfiguration : public InvalidSpec {
 public:
  using InvalidSpec::InvalidSpec;
};

/// Base class for numerical failures inside a solver.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The generator has a (numerically) non-decaying subspace, so eta and tau are not defined.
class NonDecayingSubspace : public SolverError {
 public:
  using SolverError::SolverError;
};

/// A trajectory step would have a jump probability above the allowed limit.
class StepSizeViolation : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Root search found sign changes it cannot bracket uniquely.
class BracketError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace enaqt
