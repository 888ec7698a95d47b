// SPDX-License-Identifier: Apache-2.0
//
// One-shot matrix predictor. The observed labels become an S x C one-hot
// segment matrix whose row blocks are proportional to segment durations; two
// conv/ReLU/pool stages and two dense layers map it to an S x C output that is
// row-normalized, smoothed along time and decoded by a row-wise argmax.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anticipate/checkpoint.hpp"
#include "anticipate/layers.hpp"
#include "anticipate/timeline.hpp"

namespace anticipate {

inline constexpr const char* kCnnArchitecture = "cnn-v1";

enum class CnnLoss {
  /// Row-wise l2 normalization with the mean squared error.
  Squared,
  /// Row-wise softmax with the mean cross-entropy.
  CrossEntropy,
};

std::string to_string(CnnLoss loss);
CnnLoss cnn_loss_from_string(const std::string& name);

struct CnnConfig {
  std::size_t rows = 128;  // S
  std::size_t num_classes = 0;
  std::size_t conv1_filters = 8;
  std::size_t conv2_filters = 16;
  /// Dense hidden width; 0 selects default_hidden_width(rows, num_classes).
  std::size_t hidden = 0;
  double sigma = 3.0;
  CnnLoss loss = CnnLoss::Squared;
  double learning_rate = 0.001;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

/// 900 at S=128, C=48, scaled with S*C.
std::size_t default_hidden_width(std::size_t rows, std::size_t num_classes);

/// Rows owned by each segment: floor(l/t * S), then leftover rows to the largest
/// fractional remainders (earlier segment on ties); every segment keeps >= 1 row.
std::vector<std::size_t> matrix_row_allocation(const std::vector<std::size_t>& lengths, std::size_t rows);

/// S x C one-hot matrix in temporal order. Throws std::invalid_argument if the
/// sequence has more segments than rows.
Tensor encode_matrix(const SegmentSequence& observed, std::size_t rows, std::size_t num_classes);

/// Row-wise argmax (lowest index on ties); each row spans floor(horizon/S) frames and
/// the remaining frames repeat the last row's label.
FrameTimeline decode_matrix(const Tensor& Y, std::size_t horizon_frames);

/// Mean squared error over S*C entries, or mean over rows of -log Y[s, label of row s].
double cnn_loss(const Tensor& prediction, const Tensor& target, CnnLoss mode);

struct CnnExample {
  Tensor input;
  Tensor target;
};

/// Observation fractions used to build training pairs.
inline constexpr double kCnnTrainingFractions[] = {0.1, 0.2, 0.3, 0.5};

/// One pair per training fraction a: frames [0, aT) as input and the following
/// floor(T/2) frames as target.
std::vector<CnnExample> make_cnn_examples(const FrameTimeline& timeline, std::size_t rows, std::size_t num_classes);

Tensor smooth_output(const Tensor& Y, double sigma);

class CnnModel {
 public:
  explicit CnnModel(const CnnConfig& config, std::uint64_t vocab_hash = 0);

  const CnnConfig& config() const { return config_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }

  /// Normalized S x C output (before smoothing).
  Tensor forward(const Tensor& X) const;

  /// Loss of one pair; adds scale * its gradient to every Parameter::grad.
  double accumulate_gradients(const Tensor& X, const Tensor& Y, double scale = 1.0);

  ParameterList parameters();
  std::size_t parameter_count() const;

  Checkpoint to_checkpoint() const;
  static CnnModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  struct Trace;
  Tensor run(const Tensor& X, Trace* trace) const;

  CnnConfig config_;
  std::uint64_t vocab_hash_;
  std::size_t flat_size_ = 0;
  Conv1dParams conv1_, conv2_;
  Parameter fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

inline Tensor cnn_forward(const CnnModel& model, const Tensor& X) { return model.forward(X); }

struct CnnTrainResult {
  CnnModel model;
  std::vector<double> loss_curve;
};

/// Mini-batch Adam over the four pairs of every training timeline.
CnnTrainResult train_cnn(const std::vector<FrameTimeline>& training, const CnnConfig& config,
                         std::uint64_t vocab_hash = 0);

struct CnnPredictOptions {
  bool smooth = true;
};

/// Predicts the full_span_frames following the observation in one shot and returns
/// the first requested_frames of it.
FrameTimeline cnn_predict_future(const CnnModel& model, const SegmentSequence& observed,
                                 std::size_t requested_frames, std::size_t full_span_frames,
                                 const CnnPredictOptions& options = {});

}  // namespace anticipate
