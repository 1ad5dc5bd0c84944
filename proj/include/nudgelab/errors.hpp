#pragma once

#include <stdexcept>
#include <string>

namespace nudgelab {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad parameters or configuration (CFL guards, unknown keys, malformed
// init specs, unknown catalog names). CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A spectral field handed to a transform violates conjugate symmetry
// beyond tolerance, i.e. it does not represent a real-valued field.
class MalformedFieldError : public Error {
 public:
  using Error::Error;
};

// A state became nonfinite during time integration. Carries the step
// index at which the blow-up was detected. CLI exit code 3.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

// The reference spectrum reaches the dealiasing cutoff above the
// machine-precision band, so the run is under-resolved.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

// A decay-rate fit was requested on a window without usable samples.
class UndefinedFitError : public Error {
 public:
  using Error::Error;
};

}  // namespace nudgelab
