// SPDX-License-Identifier: Apache-2.0
#include "anticipate/timeline.hpp"

#include <cmath>
#include <stdexcept>

#include "anticipate/errors.hpp"

namespace anticipate {

LabelVocabulary::LabelVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw InputError("vocabulary is empty");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw InputError("vocabulary contains an empty class name");
    if (!index_.emplace(names_[i], static_cast<Label>(i)).second)
      throw InputError("duplicate class name in vocabulary: " + names_[i]);
  }
}

std::optional<Label> LabelVocabulary::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t LabelVocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& name : names_) {
    for (char c : name) mix(static_cast<unsigned char>(c));
    mix('\n');
  }
  return h;
}

FrameTimeline::FrameTimeline(std::vector<Label> frames) : frames_(std::move(frames)) {
  if (frames_.empty()) throw std::invalid_argument("frame timeline must contain at least one frame");
}

FrameTimeline FrameTimeline::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > frames_.size())
    throw std::invalid_argument("invalid timeline slice [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") of " + std::to_string(frames_.size()));
  return FrameTimeline(std::vector<Label>(frames_.begin() + static_cast<std::ptrdiff_t>(begin),
                                          frames_.begin() + static_cast<std::ptrdiff_t>(end)));
}

void FrameTimeline::validate(std::size_t num_classes) const {
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    if (frames_[i] >= num_classes)
      throw InputError("frame " + std::to_string(i) + " has label " + std::to_string(frames_[i]) +
                       " outside vocabulary of size " + std::to_string(num_classes));
  }
}

SegmentSequence::SegmentSequence(std::vector<Segment> segments) : segments_(std::move(segments)) {
  if (segments_.empty()) throw std::invalid_argument("segment sequence must not be empty");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].length == 0) throw std::invalid_argument("segment length must be >= 1");
    if (i > 0 && segments_[i].label == segments_[i - 1].label)
      throw std::invalid_argument("adjacent segments share label " + std::to_string(segments_[i].label));
    video_length_ += segments_[i].length;
  }
}

SegmentSequence SegmentSequence::merged(const std::vector<Segment>& segments) {
  std::vector<Segment> out;
  out.reserve(segments.size());
  for (const auto& s : segments) {
    if (s.length == 0) throw std::invalid_argument("segment length must be >= 1");
    if (!out.empty() && out.back().label == s.label)
      out.back().length += s.length;
    else
      out.push_back(s);
  }
  return SegmentSequence(std::move(out));
}

std::vector<Label> SegmentSequence::labels() const {
  std::vector<Label> out;
  out.reserve(segments_.size());
  for (const auto& s : segments_) out.push_back(s.label);
  return out;
}

ObservationSplit::ObservationSplit(double alpha, double beta)
    : observe_fraction(alpha), predict_fraction(beta) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("observation fraction must lie in (0, 1)");
  if (!(beta > 0.0 && beta <= 1.0)) throw InputError("prediction fraction must lie in (0, 1]");
  if (alpha + beta > 1.0 + 1e-9)
    throw InputError("observation + prediction fraction exceeds 1 (" + std::to_string(alpha) + " + " +
                     std::to_string(beta) + ")");
}

SegmentSequence segments_from_frames(const FrameTimeline& timeline) {
  std::vector<Segment> segments;
  for (Label label : timeline.frames()) {
    if (!segments.empty() && segments.back().label == label)
      ++segments.back().length;
    else
      segments.push_back({label, 1});
  }
  return SegmentSequence(std::move(segments));
}

FrameTimeline frames_from_segments(const SegmentSequence& sequence) {
  std::vector<Label> frames;
  frames.reserve(sequence.video_length());
  for (const auto& s : sequence.segments()) frames.insert(frames.end(), s.length, s.label);
  return FrameTimeline(std::move(frames));
}

std::size_t fraction_of(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
}

ObservedFuture split_observation(const FrameTimeline& timeline, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("observation fraction must lie in (0, 1)");
  const std::size_t t = fraction_of(alpha, timeline.size());
  if (t == 0 || t >= timeline.size())
    throw InputError("observation fraction " + std::to_string(alpha) + " leaves an empty part of a " +
                     std::to_string(timeline.size()) + "-frame video");
  return {timeline.slice(0, t), timeline.slice(t, timeline.size())};
}

ObservedFuture split_observation(const FrameTimeline& timeline, const ObservationSplit& split) {
  if (fraction_of(split.predict_fraction, timeline.size()) == 0)
    throw InputError("prediction fraction selects zero frames of a " + std::to_string(timeline.size()) +
                     "-frame video");
  return split_observation(timeline, split.observe_fraction);
}

FrameTimeline truncate_future(const FrameTimeline& prediction, double beta, std::size_t video_length) {
  const std::size_t n = fraction_of(beta, video_length);
  if (n == 0) throw InputError("prediction fraction selects zero frames");
  if (prediction.size() < n)
    throw InputError("prediction has " + std::to_string(prediction.size()) + " frames but " +
                     std::to_string(n) + " are required");
  return prediction.slice(0, n);
}

}  // namespace anticipate
