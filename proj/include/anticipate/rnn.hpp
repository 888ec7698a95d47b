// SPDX-License-Identifier: Apache-2.0
//
// Recursive segment predictor. The observed segments are fed as
// (normalized length, one-hot label) tokens through an input projection and two
// stacked GRU layers; three heads on the final hidden state predict the
// remaining length of the current segment, the length of the next segment and
// the label of the next segment. Predictions are appended to the input and the
// network is queried again until the horizon is covered.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "anticipate/checkpoint.hpp"
#include "anticipate/layers.hpp"
#include "anticipate/optim.hpp"
#include "anticipate/random.hpp"
#include "anticipate/timeline.hpp"

namespace anticipate {

inline constexpr const char* kRnnArchitecture = "rnn-v1";

/// One observed segment. normalized_length = scale * frames / video_length.
struct RnnToken {
  double normalized_length = 0.0;
  Label label = 0;

  /// [normalized_length, one-hot(label)] of size num_classes + 1.
  Tensor to_input(std::size_t num_classes) const;
};

struct RnnTarget {
  double remaining = 0.0;    // l_r
  double next_length = 0.0;  // l_n
  Label next_label = 0;      // c
};

struct RnnExample {
  std::vector<RnnToken> tokens;
  RnnTarget target;
};

struct RnnPrediction {
  double remaining = 0.0;
  double next_length = 0.0;
  std::vector<double> probabilities;

  /// Most probable next label, lowest index on ties.
  Label next_label() const;
};

struct RnnConfig {
  std::size_t hidden = 256;
  /// Width of the input projection; 0 means "same as hidden".
  std::size_t input_width = 0;
  double learning_rate = 0.001;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  /// Length scale factor; 0 means "average number of segments per training video".
  double scale = 0.0;
};

std::vector<RnnToken> encode_tokens(const SegmentSequence& observed, std::size_t video_length, double scale);

/// The example for cut points chosen by the caller: `observed_frames` of segment
/// `index` are seen and `next_frames` of segment index+1 form the length target.
RnnExample make_rnn_example(const SegmentSequence& gt, std::size_t index, std::size_t observed_frames,
                            std::size_t next_frames, std::size_t video_length, double scale);

/// n-1 examples with random cut points strictly inside each segment (whole
/// segment for one-frame segments).
std::vector<RnnExample> make_rnn_examples(const SegmentSequence& gt, std::size_t video_length, double scale,
                                          Rng& rng);

/// -log p_c (p_c clamped to 1e-12) + squared errors of both lengths.
double rnn_loss(const RnnPrediction& prediction, const RnnTarget& target);

class RnnModel {
 public:
  /// Glorot-initialized model. average_segments sets the recursion cap.
  RnnModel(std::size_t num_classes, const RnnConfig& config, double scale, double average_segments,
           std::uint64_t vocab_hash = 0);

  std::size_t num_classes() const { return num_classes_; }
  const RnnConfig& config() const { return config_; }
  double scale() const { return scale_; }
  double average_segments() const { return average_segments_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }

  RnnPrediction forward(std::span<const RnnToken> tokens) const;

  /// Loss of one example; adds its gradient to every Parameter::grad.
  double accumulate_gradients(std::span<const RnnToken> tokens, const RnnTarget& target);

  ParameterList parameters();
  std::size_t parameter_count() const;

  Checkpoint to_checkpoint() const;
  static RnnModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  struct Trace;
  RnnPrediction run(std::span<const RnnToken> tokens, Trace* trace) const;

  std::size_t num_classes_;
  RnnConfig config_;
  double scale_;
  double average_segments_;
  std::uint64_t vocab_hash_;

  Parameter in_w_, in_b_;
  GruLayerParams gru1_, gru2_;
  Parameter remaining_w_, remaining_b_;
  Parameter next_w_, next_b_;
  Parameter label_w_, label_b_;
};

inline RnnPrediction rnn_forward(const RnnModel& model, std::span<const RnnToken> tokens) {
  return model.forward(tokens);
}

struct RnnTrainResult {
  RnnModel model;
  /// Mean example loss per epoch.
  std::vector<double> loss_curve;
};

/// Draws fresh cut points every epoch, shuffles, and applies one Adam step per example.
RnnTrainResult train_rnn(const std::vector<SegmentSequence>& training, std::size_t num_classes,
                         const RnnConfig& config, std::uint64_t vocab_hash = 0);

/// Same loop over a fixed example set.
RnnTrainResult train_rnn_on_examples(const std::vector<RnnExample>& examples, std::size_t num_classes,
                                     const RnnConfig& config, double scale, double average_segments,
                                     std::uint64_t vocab_hash = 0);

/// Thrown when the recursion does not cover the horizon within the iteration cap.
class RecursionLimitError : public std::runtime_error {
 public:
  RecursionLimitError(const std::string& what, std::vector<Segment> partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const std::vector<Segment>& partial() const { return partial_; }

 private:
  std::vector<Segment> partial_;
};

/// Future segments covering exactly horizon_frames frames after the observation.
/// The first segment continues the last observed label when the model predicts a
/// positive remaining length.
SegmentSequence rnn_predict_future(const RnnModel& model, const SegmentSequence& observed,
                                   std::size_t video_length, std::size_t horizon_frames);

/// normalized * video_length / scale rounded to the nearest frame, at least min_frames.
std::size_t denormalize_length(double normalized, std::size_t video_length, double scale, std::size_t min_frames);

}  // namespace anticipate
