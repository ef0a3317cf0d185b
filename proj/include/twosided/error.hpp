#pragma once

#include <stdexcept>

namespace twosided {

// Rejected configuration (dimensions, horizons, schedule parameters).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Sampling could not produce strict preferences within the retry budget.
struct DegenerateInstanceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two alternatives share a mean; strict preferences are required.
struct TieError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct MalformedPreferencesError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SizeLimitError : std::length_error {
  using std::length_error::length_error;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad-event monitoring was requested on a trace recorded without estimate snapshots.
struct SnapshotsMissingError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace twosided
