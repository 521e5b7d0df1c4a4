#pragma once

#include <stdexcept>
#include <string>

namespace flowdiag {

// Caller broke an interface contract (dimension mismatch, invalid config).
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// |g0| >= f0: the mode has no real quasiparticle energy.
struct UnstableModeError : std::domain_error {
  using std::domain_error::domain_error;
};

// |delta| == omega: the fixed-generator denominator vanishes.
struct ResonanceError : std::domain_error {
  using std::domain_error::domain_error;
};

// beta <= 0: three-boson energy denominator is not positive.
struct DegenerateEnergyError : std::domain_error {
  using std::domain_error::domain_error;
};

// omega == delta == 0: no energy scale left in the channel.
struct DegenerateChannelError : std::domain_error {
  using std::domain_error::domain_error;
};

// A numeric kernel could not produce a finite result.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scenario text failed validation; `key` names the offending field.
struct ValidationError : std::invalid_argument {
  explicit ValidationError(const std::string& key, const std::string& what)
      : std::invalid_argument(what), key(key) {}
  std::string key;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace flowdiag
