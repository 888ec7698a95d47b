// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "anticipate/random.hpp"
#include "anticipate/timeline.hpp"

namespace anticipate {

/// Every label sequence seen in training plus the mean length of each class.
struct SequenceGrammar {
  /// Distinct label sequences in first-seen order.
  std::vector<std::vector<Label>> sequences;
  /// Rounded mean segment length per class, >= 1. Classes never seen get 1.
  std::vector<std::size_t> mean_length;
};

SequenceGrammar build_grammar(const std::vector<SegmentSequence>& training, std::size_t num_classes);

/// Indices of the grammar sequences consistent with the observed label order: those
/// having it as a prefix, or else those sharing the longest common prefix with it.
std::vector<std::size_t> grammar_candidates(const SequenceGrammar& grammar, const std::vector<Label>& observed_labels);

/// Picks a candidate uniformly, completes the ongoing action up to its mean length,
/// appends the remaining actions of the picked sequence at their mean lengths and
/// forward-fills the last label if the sequence runs out.
FrameTimeline grammar_predict(const SequenceGrammar& grammar, const SegmentSequence& observed,
                              std::size_t horizon_frames, Rng& rng);

struct NeighborMatch {
  std::size_t index = 0;
  double distance = 0.0;
  FrameTimeline prediction;
};

/// Resamples src to n frames by nearest index (centre-aligned).
std::vector<Label> resample_nearest(std::span<const Label> src, std::size_t n);

/// Nearest training video by frame-wise mismatch rate of the observed part.
///
/// The observed fraction is observed.size() / video_length. Each training video's
/// leading part of the same fraction is resampled to the observed length and
/// compared frame by frame; ties go to the earliest video. The neighbor's frames
/// after its own boundary, covering the same share of its length as the horizon does
/// of the query, are resampled to horizon_frames.
NeighborMatch nn_search(const std::vector<FrameTimeline>& training, const FrameTimeline& observed,
                        std::size_t video_length, std::size_t horizon_frames);

FrameTimeline nn_predict(const std::vector<FrameTimeline>& training, const FrameTimeline& observed,
                         std::size_t video_length, std::size_t horizon_frames);

}  // namespace anticipate
