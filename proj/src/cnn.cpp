// SPDX-License-Identifier: Apache-2.0
#include "anticipate/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anticipate/errors.hpp"
#include "anticipate/optim.hpp"
#include "anticipate/random.hpp"

namespace anticipate {

std::string to_string(CnnLoss loss) { return loss == CnnLoss::Squared ? "squared" : "xent"; }

CnnLoss cnn_loss_from_string(const std::string& name) {
  if (name == "squared") return CnnLoss::Squared;
  if (name == "xent" || name == "cross-entropy") return CnnLoss::CrossEntropy;
  throw InputError("unknown CNN loss '" + name + "' (expected squared or xent)");
}

std::size_t default_hidden_width(std::size_t rows, std::size_t num_classes) {
  const double w = std::round(900.0 * static_cast<double>(rows * num_classes) / (128.0 * 48.0));
  return std::max<std::size_t>(16, static_cast<std::size_t>(w));
}

std::vector<std::size_t> matrix_row_allocation(const std::vector<std::size_t>& lengths, std::size_t rows) {
  const std::size_t n = lengths.size();
  if (n == 0) throw std::invalid_argument("matrix_row_allocation: no segments");
  if (n > rows)
    throw std::invalid_argument("observation has " + std::to_string(n) + " segments but the matrix has only " +
                                std::to_string(rows) + " rows");
  const std::size_t t = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
  // Exact proportions are q_k = scaled[k] / t.
  std::vector<std::size_t> scaled(n), alloc(n);
  std::size_t total = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (lengths[k] == 0) throw std::invalid_argument("matrix_row_allocation: zero-length segment");
    scaled[k] = lengths[k] * rows;
    alloc[k] = std::max<std::size_t>(1, scaled[k] / t);
    total += alloc[k];
  }
  if (total < rows) {
    // Segments still below their exact share, by largest remainder then position.
    std::vector<std::size_t> eligible;
    for (std::size_t k = 0; k < n; ++k)
      if (alloc[k] * t < scaled[k]) eligible.push_back(k);
    std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
      return scaled[a] - alloc[a] * t > scaled[b] - alloc[b] * t;
    });
    for (std::size_t i = 0; total < rows; ++i, ++total) ++alloc[eligible[i % eligible.size()]];
  }
  while (total > rows) {
    // Take a row from the most over-allocated segment that can spare one (later on ties).
    std::size_t pick = n;
    std::int64_t worst = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (alloc[k] < 2) continue;
      const auto over = static_cast<std::int64_t>(alloc[k] * t) - static_cast<std::int64_t>(scaled[k]);
      if (pick == n || over >= worst) {
        pick = k;
        worst = over;
      }
    }
    --alloc[pick];
    --total;
  }
  return alloc;
}

Tensor encode_matrix(const SegmentSequence& observed, std::size_t rows, std::size_t num_classes) {
  std::vector<std::size_t> lengths;
  for (const auto& s : observed.segments()) {
    if (s.label >= num_classes) throw std::invalid_argument("encode_matrix: label outside class range");
    lengths.push_back(s.length);
  }
  const auto alloc = matrix_row_allocation(lengths, rows);
  Tensor X({rows, num_classes});
  std::size_t r = 0;
  for (std::size_t k = 0; k < alloc.size(); ++k)
    for (std::size_t i = 0; i < alloc[k]; ++i, ++r) X.at(r, observed[k].label) = 1.0;
  return X;
}

namespace {

Label row_argmax(std::span<const double> row) {
  return static_cast<Label>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<Label> row_labels(const Tensor& Y) {
  std::vector<Label> labels(Y.rows());
  for (std::size_t s = 0; s < Y.rows(); ++s) labels[s] = row_argmax(Y.row(s));
  return labels;
}

Tensor one_hot_rows(const std::vector<Label>& labels, std::size_t num_classes) {
  Tensor X({labels.size(), num_classes});
  for (std::size_t s = 0; s < labels.size(); ++s) X.at(s, labels[s]) = 1.0;
  return X;
}

}  // namespace

FrameTimeline decode_matrix(const Tensor& Y, std::size_t horizon_frames) {
  if (horizon_frames == 0) throw std::invalid_argument("decode_matrix: horizon must be at least one frame");
  if (Y.rank() != 2 || Y.rows() == 0 || Y.cols() == 0) throw std::invalid_argument("decode_matrix: empty matrix");
  const std::size_t S = Y.rows();
  const std::size_t per_row = horizon_frames / S;
  std::vector<Label> frames;
  frames.reserve(horizon_frames);
  for (std::size_t s = 0; s < S; ++s) frames.insert(frames.end(), per_row, row_argmax(Y.row(s)));
  frames.insert(frames.end(), horizon_frames - frames.size(), row_argmax(Y.row(S - 1)));
  return FrameTimeline(std::move(frames));
}

double cnn_loss(const Tensor& prediction, const Tensor& target, CnnLoss mode) {
  if (prediction.shape() != target.shape() || prediction.rank() != 2)
    throw std::invalid_argument("cnn_loss: shape mismatch");
  if (mode == CnnLoss::Squared) {
    double sum = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
      const double d = target[i] - prediction[i];
      sum += d * d;
    }
    return sum / static_cast<double>(prediction.size());
  }
  double sum = 0.0;
  for (std::size_t s = 0; s < target.rows(); ++s)
    sum -= std::log(std::max(prediction.at(s, row_argmax(target.row(s))), 1e-12));
  return sum / static_cast<double>(target.rows());
}

std::vector<CnnExample> make_cnn_examples(const FrameTimeline& timeline, std::size_t rows, std::size_t num_classes) {
  const std::size_t T = timeline.size();
  const std::size_t span = fraction_of(0.5, T);
  std::vector<CnnExample> out;
  for (double a : kCnnTrainingFractions) {
    const std::size_t t = fraction_of(a, T);
    if (t == 0 || span == 0 || t + span > T)
      throw InputError("a " + std::to_string(T) + "-frame video is too short for CNN training pairs");
    out.push_back({encode_matrix(segments_from_frames(timeline.slice(0, t)), rows, num_classes),
                   encode_matrix(segments_from_frames(timeline.slice(t, t + span)), rows, num_classes)});
  }
  return out;
}

Tensor smooth_output(const Tensor& Y, double sigma) { return gaussian_filter_columns(Y, sigma); }

// ---- model -----------------------------------------------------------------

struct CnnModel::Trace {
  Tensor x, r1, p1, r2, flat, hidden, logits, out;
  std::vector<std::size_t> pool1, pool2;
};

CnnModel::CnnModel(const CnnConfig& config, std::uint64_t vocab_hash) : config_(config), vocab_hash_(vocab_hash) {
  if (config_.rows == 0 || config_.num_classes == 0) throw std::invalid_argument("CnnModel: empty dimensions");
  if (!(config_.sigma > 0.0)) throw InputError("CNN smoothing sigma must be positive");
  if (config_.hidden == 0) config_.hidden = default_hidden_width(config_.rows, config_.num_classes);
  if (config_.batch_size == 0) config_.batch_size = 1;
  const std::size_t S = config_.rows, C = config_.num_classes;
  const std::size_t pooled = ((S + 1) / 2 + 1) / 2;
  flat_size_ = pooled * config_.conv2_filters;
  conv1_ = Conv1dParams(C, config_.conv1_filters, "conv1");
  conv2_ = Conv1dParams(config_.conv1_filters, config_.conv2_filters, "conv2");
  fc1_w_ = Parameter("fc1.w", {config_.hidden, flat_size_});
  fc1_b_ = Parameter("fc1.b", {config_.hidden});
  fc2_w_ = Parameter("fc2.w", {S * C, config_.hidden});
  fc2_b_ = Parameter("fc2.b", {S * C});

  Rng rng(derive_seed(config_.seed, 0x434e4e));
  conv1_.init(rng);
  conv2_.init(rng);
  glorot_uniform(fc1_w_.value, flat_size_, config_.hidden, rng);
  glorot_uniform(fc2_w_.value, config_.hidden, S * C, rng);
}

ParameterList CnnModel::parameters() {
  ParameterList out;
  for (auto* p : conv1_.parameters()) out.push_back(p);
  for (auto* p : conv2_.parameters()) out.push_back(p);
  for (auto* p : {&fc1_w_, &fc1_b_, &fc2_w_, &fc2_b_}) out.push_back(p);
  return out;
}

std::size_t CnnModel::parameter_count() const {
  return anticipate::parameter_count(const_cast<CnnModel*>(this)->parameters());
}

Tensor CnnModel::run(const Tensor& X, Trace* trace) const {
  require_shape(X, {config_.rows, config_.num_classes}, "cnn_forward input");
  std::vector<std::size_t> pool1, pool2;
  Tensor r1 = relu(conv1d_forward(X, conv1_));
  Tensor p1 = maxpool_rows(r1, &pool1);
  Tensor r2 = relu(conv1d_forward(p1, conv2_));
  Tensor p2 = maxpool_rows(r2, &pool2);
  Tensor flat = p2.reshaped({flat_size_});
  Tensor hidden = relu(dense_forward(flat, fc1_w_.value, fc1_b_.value));
  Tensor logits = dense_forward(hidden, fc2_w_.value, fc2_b_.value).reshaped({config_.rows, config_.num_classes});
  Tensor out = config_.loss == CnnLoss::Squared ? l2_normalize_rows(logits) : softmax_rows(logits);
  if (trace) {
    *trace = {X, std::move(r1), std::move(p1), std::move(r2), std::move(flat), std::move(hidden), std::move(logits),
              out, std::move(pool1), std::move(pool2)};
  }
  return out;
}

Tensor CnnModel::forward(const Tensor& X) const { return run(X, nullptr); }

double CnnModel::accumulate_gradients(const Tensor& X, const Tensor& Y, double scale) {
  Trace tr;
  const Tensor out = run(X, &tr);
  require_shape(Y, out.shape(), "cnn target");
  const double loss = cnn_loss(out, Y, config_.loss);

  const std::size_t S = config_.rows, C = config_.num_classes;
  Tensor d_logits({S, C});
  if (config_.loss == CnnLoss::Squared) {
    Tensor d_out({S, C});
    const double k = -2.0 * scale / static_cast<double>(S * C);
    for (std::size_t i = 0; i < out.size(); ++i) d_out[i] = k * (Y[i] - out[i]);
    d_logits = l2_normalize_rows_backward(tr.logits, out, d_out);
  } else {
    const double k = scale / static_cast<double>(S);
    for (std::size_t s = 0; s < S; ++s) {
      const Label c = row_argmax(Y.row(s));
      for (std::size_t j = 0; j < C; ++j) d_logits.at(s, j) = k * (out.at(s, j) - (j == c ? 1.0 : 0.0));
    }
  }
  Tensor d_hidden = dense_backward(tr.hidden, fc2_w_.value, d_logits.reshaped({S * C}), fc2_w_.grad, fc2_b_.grad);
  d_hidden = relu_backward(tr.hidden, d_hidden);
  Tensor d_flat = dense_backward(tr.flat, fc1_w_.value, d_hidden, fc1_w_.grad, fc1_b_.grad);
  Tensor d_p2 = d_flat.reshaped({flat_size_ / config_.conv2_filters, config_.conv2_filters});
  Tensor d_r2 = maxpool_rows_backward(d_p2, tr.pool2, tr.r2.rows());
  Tensor d_p1 = conv1d_backward(tr.p1, relu_backward(tr.r2, d_r2), conv2_);
  Tensor d_r1 = maxpool_rows_backward(d_p1, tr.pool1, tr.r1.rows());
  conv1d_backward(tr.x, relu_backward(tr.r1, d_r1), conv1_);
  return loss;
}

Checkpoint CnnModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.architecture = kCnnArchitecture;
  ckpt.vocab_hash = vocab_hash_;
  ckpt.config = {{"rows", std::to_string(config_.rows)},
                 {"num_classes", std::to_string(config_.num_classes)},
                 {"conv1_filters", std::to_string(config_.conv1_filters)},
                 {"conv2_filters", std::to_string(config_.conv2_filters)},
                 {"hidden", std::to_string(config_.hidden)},
                 {"sigma", format_double(config_.sigma)},
                 {"loss", to_string(config_.loss)},
                 {"learning_rate", format_double(config_.learning_rate)},
                 {"epochs", std::to_string(config_.epochs)},
                 {"batch_size", std::to_string(config_.batch_size)},
                 {"seed", std::to_string(config_.seed)}};
  for (auto* p : const_cast<CnnModel*>(this)->parameters()) ckpt.blocks.emplace_back(p->name, p->value);
  return ckpt;
}

CnnModel CnnModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.architecture != kCnnArchitecture)
    throw InputError("checkpoint architecture is '" + ckpt.architecture + "', expected " + kCnnArchitecture);
  CnnConfig c;
  c.rows = ckpt.config_uint("rows");
  c.num_classes = ckpt.config_uint("num_classes");
  c.conv1_filters = ckpt.config_uint("conv1_filters");
  c.conv2_filters = ckpt.config_uint("conv2_filters");
  c.hidden = ckpt.config_uint("hidden");
  c.sigma = ckpt.config_double("sigma");
  c.loss = cnn_loss_from_string(ckpt.config_value("loss"));
  c.learning_rate = ckpt.config_double("learning_rate");
  c.epochs = ckpt.config_uint("epochs");
  c.batch_size = ckpt.config_uint("batch_size");
  c.seed = ckpt.config_uint("seed");
  CnnModel model(c, ckpt.vocab_hash);
  for (auto* p : model.parameters()) {
    const Tensor& t = ckpt.block(p->name);
    if (t.shape() != p->value.shape())
      throw InputError("checkpoint block " + p->name + " has shape " + t.shape_string() + ", expected " +
                       p->value.shape_string());
    p->value = t;
  }
  return model;
}

// ---- training / inference --------------------------------------------------

CnnTrainResult train_cnn(const std::vector<FrameTimeline>& training, const CnnConfig& config,
                         std::uint64_t vocab_hash) {
  if (training.empty()) throw InputError("train_cnn: empty training set");
  // Row labels only; the one-hot matrices are rebuilt per step.
  std::vector<std::pair<std::vector<Label>, std::vector<Label>>> pairs;
  for (const auto& tl : training) {
    for (auto& ex : make_cnn_examples(tl, config.rows, config.num_classes))
      pairs.emplace_back(row_labels(ex.input), row_labels(ex.target));
  }

  CnnTrainResult result{CnnModel(config, vocab_hash), {}};
  const std::size_t batch = result.model.config().batch_size;
  auto params = result.model.parameters();
  AdamState adam(AdamConfig{config.learning_rate});
  Rng rng(derive_seed(config.seed, 0x5348));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double weight = 1.0 / static_cast<double>(end - start);
      zero_grads(params);
      for (std::size_t i = start; i < end; ++i) {
        const auto& [in, out] = pairs[order[i]];
        const double loss = result.model.accumulate_gradients(one_hot_rows(in, config.num_classes),
                                                              one_hot_rows(out, config.num_classes), weight);
        if (!std::isfinite(loss)) throw NumericalError("non-finite CNN training loss");
        total += loss;
      }
      adam_step(params, adam);
    }
    result.loss_curve.push_back(total / static_cast<double>(pairs.size()));
  }
  return result;
}

FrameTimeline cnn_predict_future(const CnnModel& model, const SegmentSequence& observed, std::size_t requested_frames,
                                 std::size_t full_span_frames, const CnnPredictOptions& options) {
  if (requested_frames == 0) throw InputError("cnn_predict_future: nothing requested");
  if (requested_frames > full_span_frames)
    throw InputError("CNN predicts " + std::to_string(full_span_frames) + " frames but " +
                     std::to_string(requested_frames) + " were requested");
  const auto& c = model.config();
  Tensor Y = model.forward(encode_matrix(observed, c.rows, c.num_classes));
  if (options.smooth) Y = smooth_output(Y, c.sigma);
  return decode_matrix(Y, full_span_frames).slice(0, requested_frames);
}

}  // namespace anticipate
