// SPDX-License-Identifier: Apache-2.0
#include "anticipate/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace anticipate {

void adam_step(const ParameterList& params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->value.shape());
      state.second_moment.emplace_back(p->value.shape());
    }
  }
  if (state.first_moment.size() != params.size())
    throw std::invalid_argument("adam_step: parameter list changed between steps");
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (p.grad.shape() != p.value.shape() || state.first_moment[i].shape() != p.value.shape())
      throw std::invalid_argument("adam_step: shape mismatch for " + p.name);
    double* w = p.value.ptr();
    const double* g = p.grad.ptr();
    double* m = state.first_moment[i].ptr();
    double* v = state.second_moment[i].ptr();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

double GradCheckReport::max_rel_error() const {
  double e = 0.0;
  for (const auto& b : blocks) e = std::max(e, b.max_rel_error);
  return e;
}

const GradCheckBlock* GradCheckReport::worst_block() const {
  const GradCheckBlock* worst = nullptr;
  for (const auto& b : blocks)
    if (!worst || !b.finite || b.max_rel_error > worst->max_rel_error) {
      worst = &b;
      if (!b.finite) break;
    }
  return worst;
}

bool GradCheckReport::all_finite() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const auto& b) { return b.finite; });
}

GradCheckReport grad_check(const ParameterList& params, const std::function<double()>& loss,
                           const std::function<void()>& compute_gradients, const GradCheckOptions& options) {
  compute_gradients();
  std::vector<Tensor> analytic;
  for (const auto* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t bi = 0; bi < params.size(); ++bi) {
    Parameter& p = *params[bi];
    GradCheckBlock block{p.name};
    const std::size_t n = p.value.size();
    std::size_t stride = 1;
    if (options.max_entries_per_block > 0 && n > options.max_entries_per_block)
      stride = (n + options.max_entries_per_block - 1) / options.max_entries_per_block;
    for (std::size_t j = 0; j < n; j += stride) {
      const double original = p.value[j];
      p.value[j] = original + options.step;
      const double up = loss();
      p.value[j] = original - options.step;
      const double down = loss();
      p.value[j] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[bi][j];
      ++block.checked;
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        block.finite = false;
        block.worst_index = j;
        continue;
      }
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.magnitude_floor});
      block.max_abs_error = std::max(block.max_abs_error, abs_err);
      if (rel > block.max_rel_error) {
        block.max_rel_error = rel;
        block.worst_index = j;
      }
    }
    report.blocks.push_back(block);
  }
  return report;
}

}  // namespace anticipate
