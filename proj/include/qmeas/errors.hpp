#pragma once

#include <stdexcept>
#include <string>

namespace qmeas {

/// Base class for all library errors. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent input (bad matrices, bad config, domain violations). Exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A scalar function was applied outside its domain on the spectrum. Exit code 1.
class DomainError : public InputError {
 public:
  using InputError::InputError;
};

/// A configured cap was exceeded (branch explosion, bucket explosion, node caps). Exit code 2.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a solver (non-convergence, rank decisions gone bad). Exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Simulation-level failure: constraint drift, blow-up, runaway walks,
/// product/ODE inconsistency, endpoint normalization failure. Exit code 3.
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// A synthesis target cannot be realized (open-interval or capacity violations,
/// center saturation). Exit code 4.
class NotAchievableError : public Error {
 public:
  using Error::Error;
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NotAchievableError*>(&e)) return 4;
  if (dynamic_cast<const ResourceError*>(&e)) return 2;
  if (dynamic_cast<const SimulationError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  if (dynamic_cast<const InputError*>(&e)) return 1;
  return 1;
}

}  // namespace qmeas
