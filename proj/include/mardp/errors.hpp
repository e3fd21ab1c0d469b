#pragma once

#include <stdexcept>
#include <string>

namespace mardp {

/// Malformed or inconsistent input data (files, labels, counts).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine failed (non-PD matrix, non-finite log-density).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mardp
