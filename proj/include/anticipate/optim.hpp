// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "anticipate/tensor.hpp"

namespace anticipate {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one ordered parameter list.
struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  explicit AdamState(AdamConfig c = {}) : config(c) {}
};

/// One bias-corrected Adam update from the gradients stored in params.
void adam_step(const ParameterList& params, AdamState& state);

struct GradCheckBlock {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  bool finite = true;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;

  double max_rel_error() const;
  const GradCheckBlock* worst_block() const;
  bool all_finite() const;
  bool passed(double tolerance) const { return all_finite() && max_rel_error() < tolerance; }
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Gradients smaller than this in magnitude are compared on an absolute scale.
  double magnitude_floor = 1e-6;
  /// Check at most this many entries per block (evenly strided); 0 checks all.
  std::size_t max_entries_per_block = 0;
};

/// Compares analytic gradients against central finite differences.
///
/// `loss` must evaluate the objective at the current parameter values.
/// `compute_gradients` must zero and then fill Parameter::grad at the current values.
/// Relative error per entry is |a - n| / max(|a|, |n|, magnitude_floor).
GradCheckReport grad_check(const ParameterList& params, const std::function<double()>& loss,
                           const std::function<void()>& compute_gradients, const GradCheckOptions& options = {});

}  // namespace anticipate
