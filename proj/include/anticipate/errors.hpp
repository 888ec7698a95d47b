// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace anticipate {

/// Malformed or missing input data (files, flags, fractions). CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs are individually valid but disagree with each other, e.g. a
/// checkpoint trained on a different vocabulary. CLI exit code 3.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss, diverging recursion or a failed gradient check. CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace anticipate
