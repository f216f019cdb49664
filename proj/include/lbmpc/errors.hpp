#pragma once

#include <stdexcept>
#include <string>

namespace lbmpc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition of an operation violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Operation outside the supported envelope (e.g. singular map above dim 3).
struct UnsupportedError : Error {
  using Error::Error;
};

// Closed-loop matrix not Schur stable.
struct StabilityError : Error {
  using Error::Error;
};

// Safe input set came up empty: the scenario violates feasibility assumptions.
struct EmptySafeSetError : Error {
  using Error::Error;
};

// A controller could not produce a safe input. Carries where it happened.
struct PolicyFailure : Error {
  PolicyFailure(const std::string& msg, int t_step) : Error(msg), t(t_step) {}
  int t;
};

}  // namespace lbmpc
