// SPDX-License-Identifier: Apache-2.0
//
// Brute-force metric oracles: per-frame counting and integer interval arithmetic.
#pragma once

#include <map>
#include <vector>

#include "anticipate/timeline.hpp"

namespace reference {

struct Run {
  anticipate::Label label;
  std::size_t begin, end;
};

inline std::vector<Run> runs(const std::vector<anticipate::Label>& f) {
  std::vector<Run> out;
  for (std::size_t i = 0; i < f.size();) {
    std::size_t j = i;
    while (j < f.size() && f[j] == f[i]) ++j;
    out.push_back({f[i], i, j});
    i = j;
  }
  return out;
}

inline double moc(const std::vector<anticipate::Label>& pred, const std::vector<anticipate::Label>& gt) {
  std::map<anticipate::Label, std::size_t> correct, total;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    ++total[gt[i]];
    if (pred[i] == gt[i]) ++correct[gt[i]];
  }
  double sum = 0.0;
  for (const auto& [c, n] : total) sum += static_cast<double>(correct[c]) / static_cast<double>(n);
  return sum / static_cast<double>(total.size());
}

/// Hit iff labels match and intersection / union >= num / den, compared in integers.
inline std::vector<bool> action_hits(const std::vector<anticipate::Label>& pred,
                                     const std::vector<anticipate::Label>& gt, std::size_t positions,
                                     std::size_t num = 1, std::size_t den = 2) {
  const auto p = runs(pred), g = runs(gt);
  std::vector<bool> hits(positions, false);
  for (std::size_t k = 0; k < positions && k < g.size() && k < p.size(); ++k) {
    const std::size_t lo = std::max(p[k].begin, g[k].begin), hi = std::min(p[k].end, g[k].end);
    const std::size_t inter = hi > lo ? hi - lo : 0;
    const std::size_t uni = (p[k].end - p[k].begin) + (g[k].end - g[k].begin) - inter;
    hits[k] = p[k].label == g[k].label && inter * den >= num * uni;
  }
  return hits;
}

}  // namespace reference
