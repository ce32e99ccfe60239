#pragma once

#include <stdexcept>
#include <string>

namespace landseg {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands (channel counts, spatial dims, ...).
struct DimensionError : Error {
  using Error::Error;
};

// Invalid operation parameter (non-positive stride, bad fraction, ...).
struct ParameterError : Error {
  using Error::Error;
};

// Invalid data content (class index out of range, off-palette color, ...).
struct DataError : Error {
  using Error::Error;
};

// Filesystem-level failure (open/read/write/rename).
struct IoError : Error {
  using Error::Error;
};

// Structured on-disk format violation; `kind` tells the callers apart.
struct FormatError : Error {
  enum class Kind {
    bad_magic,
    bad_version,
    truncated,
    count_mismatch,
    shape_mismatch,
    corrupt,
  };

  FormatError(Kind k, const std::string& msg) : Error(msg), kind(k) {}

  Kind kind;
};

// Training failed at a specific step (divergence, non-finite loss).
struct TrainingError : Error {
  TrainingError(long at_step, const std::string& msg) : Error(msg), step(at_step) {}

  long step;
};

}  // namespace landseg
