// SPDX-License-Identifier: Apache-2.0
#include "anticipate/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "anticipate/errors.hpp"

namespace anticipate {

SequenceGrammar build_grammar(const std::vector<SegmentSequence>& training, std::size_t num_classes) {
  if (training.empty()) throw InputError("build_grammar: empty training set");
  SequenceGrammar g;
  std::set<std::vector<Label>> seen;
  std::vector<double> sum(num_classes, 0.0);
  std::vector<std::size_t> count(num_classes, 0);
  for (const auto& seq : training) {
    auto labels = seq.labels();
    for (const auto& s : seq.segments()) {
      if (s.label >= num_classes) throw InputError("build_grammar: label outside vocabulary");
      sum[s.label] += static_cast<double>(s.length);
      ++count[s.label];
    }
    if (seen.insert(labels).second) g.sequences.push_back(std::move(labels));
  }
  g.mean_length.assign(num_classes, 1);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (count[c] == 0) continue;
    const double mean = std::round(sum[c] / static_cast<double>(count[c]));
    g.mean_length[c] = std::max<std::size_t>(1, static_cast<std::size_t>(mean));
  }
  return g;
}

std::vector<std::size_t> grammar_candidates(const SequenceGrammar& grammar, const std::vector<Label>& observed) {
  std::vector<std::size_t> best;
  std::size_t best_prefix = 0;
  for (std::size_t i = 0; i < grammar.sequences.size(); ++i) {
    const auto& seq = grammar.sequences[i];
    std::size_t cp = 0;
    while (cp < seq.size() && cp < observed.size() && seq[cp] == observed[cp]) ++cp;
    if (best.empty() || cp > best_prefix) {
      best = {i};
      best_prefix = cp;
    } else if (cp == best_prefix) {
      best.push_back(i);
    }
  }
  return best;
}

FrameTimeline grammar_predict(const SequenceGrammar& grammar, const SegmentSequence& observed,
                              std::size_t horizon_frames, Rng& rng) {
  if (horizon_frames == 0) throw InputError("grammar_predict: horizon must be at least one frame");
  if (grammar.sequences.empty()) throw InputError("grammar_predict: empty grammar");
  const auto observed_labels = observed.labels();
  const auto candidates = grammar_candidates(grammar, observed_labels);
  const auto& chosen = grammar.sequences[candidates[rng.uniform_index(candidates.size())]];

  auto mean_of = [&grammar](Label l) { return l < grammar.mean_length.size() ? grammar.mean_length[l] : 1; };
  std::vector<Label> frames;
  frames.reserve(horizon_frames);
  const Segment& ongoing = observed.back();
  const std::size_t mean = mean_of(ongoing.label);
  if (mean > ongoing.length) frames.insert(frames.end(), mean - ongoing.length, ongoing.label);
  Label last = ongoing.label;
  for (std::size_t i = observed_labels.size(); i < chosen.size() && frames.size() < horizon_frames; ++i) {
    frames.insert(frames.end(), mean_of(chosen[i]), chosen[i]);
    last = chosen[i];
  }
  if (frames.size() < horizon_frames) frames.insert(frames.end(), horizon_frames - frames.size(), last);
  frames.resize(horizon_frames);
  return FrameTimeline(std::move(frames));
}

std::vector<Label> resample_nearest(std::span<const Label> src, std::size_t n) {
  if (src.empty() || n == 0) throw std::invalid_argument("resample_nearest: empty input or output");
  std::vector<Label> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = src[std::min(src.size() - 1, ((2 * j + 1) * src.size()) / (2 * n))];
  return out;
}

NeighborMatch nn_search(const std::vector<FrameTimeline>& training, const FrameTimeline& observed,
                        std::size_t video_length, std::size_t horizon_frames) {
  if (training.empty()) throw InputError("nn_predict: empty training set");
  if (horizon_frames == 0) throw InputError("nn_predict: horizon must be at least one frame");
  if (video_length < observed.size()) throw InputError("nn_predict: video shorter than its observation");
  const double alpha = static_cast<double>(observed.size()) / static_cast<double>(video_length);
  const double beta = static_cast<double>(horizon_frames) / static_cast<double>(video_length);

  std::size_t best = training.size();
  double best_distance = std::numeric_limits<double>::infinity();
  std::size_t best_boundary = 0;
  for (std::size_t i = 0; i < training.size(); ++i) {
    const auto& tl = training[i];
    if (tl.size() < 2) continue;
    const std::size_t boundary = std::clamp<std::size_t>(fraction_of(alpha, tl.size()), 1, tl.size() - 1);
    const auto head = resample_nearest(tl.frames().subspan(0, boundary), observed.size());
    std::size_t mismatches = 0;
    for (std::size_t f = 0; f < head.size(); ++f) mismatches += head[f] != observed[f];
    const double d = static_cast<double>(mismatches) / static_cast<double>(observed.size());
    if (d < best_distance) {
      best = i;
      best_distance = d;
      best_boundary = boundary;
    }
  }
  if (best == training.size()) throw InputError("nn_predict: no training video has at least two frames");
  const auto& tl = training[best];
  const auto span = static_cast<std::size_t>(std::llround(beta * static_cast<double>(tl.size())));
  const std::size_t length = std::clamp<std::size_t>(span, 1, tl.size() - best_boundary);
  auto future = resample_nearest(tl.frames().subspan(best_boundary, length), horizon_frames);
  return {best, best_distance, FrameTimeline(std::move(future))};
}

FrameTimeline nn_predict(const std::vector<FrameTimeline>& training, const FrameTimeline& observed,
                         std::size_t video_length, std::size_t horizon_frames) {
  return nn_search(training, observed, video_length, horizon_frames).prediction;
}

}  // namespace anticipate
