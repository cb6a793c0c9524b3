#pragma once

#include <stdexcept>
#include <string>

namespace equilib {

// Shape or index disagreement between arguments.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Problem size exceeds an enumeration limit; the message names the
// sampled/reduced mode the caller should switch to.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file, document, or configuration input.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite value where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dim(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

inline void require_arg(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace equilib
