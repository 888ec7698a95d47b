// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace anticipate {

using Label = std::uint32_t;

/// Ordered class names; a class index is its position in the list.
class LabelVocabulary {
 public:
  explicit LabelVocabulary(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(Label label) const { return names_.at(label); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<Label> find(const std::string& name) const;

  /// FNV-1a over the newline-joined names; stored in checkpoints.
  std::uint64_t hash() const;

  bool operator==(const LabelVocabulary& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Label> index_;
};

/// One class index per video frame. Never empty.
class FrameTimeline {
 public:
  explicit FrameTimeline(std::vector<Label> frames);

  std::size_t size() const { return frames_.size(); }
  Label operator[](std::size_t i) const { return frames_[i]; }
  std::span<const Label> frames() const { return frames_; }
  const std::vector<Label>& vector() const { return frames_; }

  /// Frames [begin, end). Throws std::invalid_argument on an empty or out-of-range slice.
  FrameTimeline slice(std::size_t begin, std::size_t end) const;

  /// Throws InputError if any frame is >= num_classes.
  void validate(std::size_t num_classes) const;

  bool operator==(const FrameTimeline&) const = default;

 private:
  std::vector<Label> frames_;
};

struct Segment {
  Label label = 0;
  std::size_t length = 0;

  bool operator==(const Segment&) const = default;
};

/// Maximal runs of a timeline: lengths >= 1, adjacent labels distinct.
class SegmentSequence {
 public:
  /// Validates the invariants; throws std::invalid_argument.
  explicit SegmentSequence(std::vector<Segment> segments);

  /// Merges adjacent equal labels and drops nothing; lengths must be >= 1.
  static SegmentSequence merged(const std::vector<Segment>& segments);

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  const Segment& operator[](std::size_t i) const { return segments_[i]; }
  const Segment& back() const { return segments_.back(); }
  std::size_t video_length() const { return video_length_; }
  std::vector<Label> labels() const;

  bool operator==(const SegmentSequence&) const = default;

 private:
  std::vector<Segment> segments_;
  std::size_t video_length_ = 0;
};

/// Observation fraction alpha in (0,1) and prediction fraction beta in (0,1], alpha + beta <= 1.
struct ObservationSplit {
  double observe_fraction;
  double predict_fraction;

  ObservationSplit(double alpha, double beta);
};

SegmentSequence segments_from_frames(const FrameTimeline& timeline);
FrameTimeline frames_from_segments(const SegmentSequence& sequence);

/// floor(fraction * total) computed with a small tolerance so that e.g. 0.3 * 10 gives 3.
std::size_t fraction_of(double fraction, std::size_t total);

struct ObservedFuture {
  FrameTimeline observed;
  FrameTimeline future;
};

/// observed = frames [0, floor(alpha*T)), future = the rest.
ObservedFuture split_observation(const FrameTimeline& timeline, double alpha);
/// Same, additionally checking alpha + beta <= 1 and a non-empty scored span.
ObservedFuture split_observation(const FrameTimeline& timeline, const ObservationSplit& split);

/// First floor(beta*T) frames of a prediction.
FrameTimeline truncate_future(const FrameTimeline& prediction, double beta, std::size_t video_length);

}  // namespace anticipate
