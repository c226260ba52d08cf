#pragma once

#include <stdexcept>
#include <string>

namespace nflreach {

// A model or encoder was handed something it cannot represent
// (unbounded variable, empty max, unsupported norm, ...).
class EncodingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An input left the domain an abstraction was certified on.
class DomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// The solver could not produce a trustworthy answer (singular basis,
// inconsistent witness, backend failure).
class SolveError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Interval propagation escaped the clip threshold.
class BoundsBlowupError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Rejection sampling exhausted its draw budget.
class SamplingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad run configuration or input file.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace nflreach
