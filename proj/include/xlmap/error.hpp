#pragma once

#include <stdexcept>
#include <string>

namespace xlmap {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file (embeddings or dictionaries).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Shape mismatch or out-of-range argument.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Degenerate numerics: zero rows, rank deficiency, non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Dictionary induction produced no entries (every candidate was dropped).
class EmptyDictionaryError : public Error {
 public:
  using Error::Error;
};

}  // namespace xlmap
