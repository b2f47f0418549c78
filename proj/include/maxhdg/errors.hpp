// Error types shared across the library. Each maps to a distinct CLI exit code.
#pragma once

#include <stdexcept>
#include <string>

namespace maxhdg {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration: unknown construction tag, degree outside
// a construction's admissible range, bad level list, and similar.
struct ConfigError : Error {
  using Error::Error;
};

// The local interior block or the global condensed matrix is (numerically)
// singular: kappa^2 eps_r sits near a discrete Maxwell eigenvalue at this
// mesh size. Refining the mesh usually resolves it.
struct ResonanceError : Error {
  using Error::Error;
};

// A singular value fell inside the guard band around the rank threshold, so
// a dimension count would be a guess. Never silently resolved.
struct IndeterminateRankError : Error {
  using Error::Error;
};

// Contract violation inside the library (e.g. a saddle system that theory
// guarantees invertible came out singular). Indicates a bug, not bad input.
struct InternalError : Error {
  using Error::Error;
};

}  // namespace maxhdg
