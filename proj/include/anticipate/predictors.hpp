// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "anticipate/baselines.hpp"
#include "anticipate/cnn.hpp"
#include "anticipate/rnn.hpp"
#include "anticipate/timeline.hpp"

namespace anticipate {

/// Common interface of everything that can fill in a video's future.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  /// Labels for the horizon_frames frames that follow `observed` in a video of
  /// video_length frames. `seed` drives any randomness for this one call.
  virtual FrameTimeline predict(const FrameTimeline& observed, std::size_t video_length, std::size_t horizon_frames,
                                std::uint64_t seed) const = 0;
};

/// When the recursion hits its iteration cap, the partial prediction is padded with
/// its last label (or the last observed label) and the event is counted.
class RnnPredictor : public Predictor {
 public:
  explicit RnnPredictor(RnnModel model) : model_(std::move(model)) {}
  std::string name() const override { return "rnn"; }
  FrameTimeline predict(const FrameTimeline& observed, std::size_t video_length, std::size_t horizon_frames,
                        std::uint64_t seed) const override;
  const RnnModel& model() const { return model_; }
  std::size_t recursion_limit_hits() const { return limit_hits_; }

 private:
  RnnModel model_;
  mutable std::atomic<std::size_t> limit_hits_{0};
};

class CnnPredictor : public Predictor {
 public:
  explicit CnnPredictor(CnnModel model, CnnPredictOptions options = {}, std::string name = "cnn")
      : model_(std::move(model)), options_(options), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  /// The model always predicts the floor(T/2) frames after the observation.
  FrameTimeline predict(const FrameTimeline& observed, std::size_t video_length, std::size_t horizon_frames,
                        std::uint64_t seed) const override;
  const CnnModel& model() const { return model_; }

 private:
  CnnModel model_;
  CnnPredictOptions options_;
  std::string name_;
};

class GrammarPredictor : public Predictor {
 public:
  explicit GrammarPredictor(SequenceGrammar grammar) : grammar_(std::move(grammar)) {}
  std::string name() const override { return "grammar"; }
  FrameTimeline predict(const FrameTimeline& observed, std::size_t video_length, std::size_t horizon_frames,
                        std::uint64_t seed) const override;
  const SequenceGrammar& grammar() const { return grammar_; }

 private:
  SequenceGrammar grammar_;
};

class NearestNeighborPredictor : public Predictor {
 public:
  explicit NearestNeighborPredictor(std::vector<FrameTimeline> training) : training_(std::move(training)) {}
  std::string name() const override { return "nn-baseline"; }
  FrameTimeline predict(const FrameTimeline& observed, std::size_t video_length, std::size_t horizon_frames,
                        std::uint64_t seed) const override;

 private:
  std::vector<FrameTimeline> training_;
};

}  // namespace anticipate
