// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference checks of both architectures at toy size.
#pragma once

#include <cstdint>

#include "anticipate/cnn.hpp"
#include "anticipate/optim.hpp"

namespace anticipate {

struct ToyGradCheckOptions {
  std::uint64_t seed = 0;
  /// Perturbs one analytic gradient entry; used to test failure reporting.
  bool inject_fault = false;
  GradCheckOptions check;
};

/// Two GRU layers of width 8, four classes, a random three-token sequence and target.
GradCheckReport rnn_toy_gradcheck(const ToyGradCheckOptions& options = {});

/// S = 16, C = 4, random one-hot input and target, given loss mode.
GradCheckReport cnn_toy_gradcheck(CnnLoss loss, const ToyGradCheckOptions& options = {});

}  // namespace anticipate
