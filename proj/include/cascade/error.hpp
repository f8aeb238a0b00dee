#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-facing arguments (negative sizes, p outside [0,1], d < n, ...).
struct ConfigError : Error {
  using Error::Error;
};

struct InputError : Error {
  using Error::Error;
};

// Layer norm asked to normalise a (numerically) zero vector.
struct DegenerateStateError : Error {
  using Error::Error;
};

// Some supervised level has an empty frontier.
struct DegenerateFrontierError : Error {
  using Error::Error;
};

struct SingularMobiusError : Error {
  using Error::Error;
};

// Non-finite gradients or parameters during optimisation.
struct TrainingError : Error {
  using Error::Error;
};

struct UndefinedRatioError : Error {
  using Error::Error;
};

struct SchemaError : Error {
  using Error::Error;
};

}  // namespace cascade
