#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>

namespace spemix {

// Bad arguments, malformed parameters, or inconsistent model configuration.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Problems with input files: unreadable, ragged, non-numeric, bad labels.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical failure that invalidates a fit (non-finite likelihood etc).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A component collapsed below the minimum usable soft count. The engine
// converts this into a flagged failure result instead of crashing a sweep.
class DegenerateComponentError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A sweep in which not a single grid cell converged; callers surface this
// as its own exit status because every downstream report would be empty.
class NoConvergedFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](const std::string& msg) {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "warning: " << msg << "\n";
  };
  return handler;
}

// Non-fatal diagnostics (eigenvalue flooring, ridge fallbacks, underflow
// rows). Handler is replaceable so tests can capture or silence them; it
// must be thread safe, since sweeps warn from worker threads.
inline void warn(const std::string& msg) {
  if (warning_handler()) warning_handler()(msg);
}

}  // namespace spemix
