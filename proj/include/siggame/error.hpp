#pragma once

#include <stdexcept>
#include <string>

namespace siggame {

// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The game definition itself is unusable (n < 2, bad state distribution).
class InvalidGame : public Error {
 public:
  using Error::Error;
};

// Arguments disagree with each other (dimension mismatch, negative payoff).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A request would exceed configured memory or integer limits.
class ResourceLimit : public Error {
 public:
  using Error::Error;
};

// Selection probabilities are undefined (all weights zero).
class DegenerateState : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition (e.g. crediting a self-link).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Experiment or seeding configuration is malformed.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace siggame
