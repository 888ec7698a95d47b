// SPDX-License-Identifier: Apache-2.0
#include "anticipate/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anticipate/errors.hpp"

namespace anticipate {

Tensor RnnToken::to_input(std::size_t num_classes) const {
  Tensor x({num_classes + 1});
  x[0] = normalized_length;
  x[1 + label] = 1.0;
  return x;
}

Label RnnPrediction::next_label() const {
  return static_cast<Label>(std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin());
}

std::vector<RnnToken> encode_tokens(const SegmentSequence& observed, std::size_t video_length, double scale) {
  if (video_length == 0) throw std::invalid_argument("encode_tokens: video length must be positive");
  if (!(scale > 0.0)) throw std::invalid_argument("encode_tokens: scale must be positive");
  std::vector<RnnToken> tokens;
  tokens.reserve(observed.size());
  const double T = static_cast<double>(video_length);
  for (const auto& s : observed.segments()) tokens.push_back({scale * static_cast<double>(s.length) / T, s.label});
  return tokens;
}

RnnExample make_rnn_example(const SegmentSequence& gt, std::size_t index, std::size_t observed_frames,
                            std::size_t next_frames, std::size_t video_length, double scale) {
  if (index + 1 >= gt.size()) throw std::invalid_argument("make_rnn_example: segment has no successor");
  const Segment& cur = gt[index];
  const Segment& next = gt[index + 1];
  if (observed_frames < 1 || observed_frames > cur.length)
    throw std::invalid_argument("make_rnn_example: cut outside the current segment");
  if (next_frames < 1 || next_frames > next.length)
    throw std::invalid_argument("make_rnn_example: cut outside the next segment");
  std::vector<Segment> prefix(gt.segments().begin(), gt.segments().begin() + static_cast<std::ptrdiff_t>(index) + 1);
  prefix.back().length = observed_frames;
  const double T = static_cast<double>(video_length);
  RnnExample ex;
  ex.tokens = encode_tokens(SegmentSequence(std::move(prefix)), video_length, scale);
  ex.target = {scale * static_cast<double>(cur.length - observed_frames) / T,
               scale * static_cast<double>(next_frames) / T, next.label};
  return ex;
}

namespace {

std::size_t random_inner_cut(std::size_t length, Rng& rng) {
  if (length < 2) return length;
  return static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(length) - 1));
}

}  // namespace

std::vector<RnnExample> make_rnn_examples(const SegmentSequence& gt, std::size_t video_length, double scale,
                                          Rng& rng) {
  std::vector<RnnExample> out;
  for (std::size_t i = 0; i + 1 < gt.size(); ++i) {
    const std::size_t cut = random_inner_cut(gt[i].length, rng);
    const std::size_t next = random_inner_cut(gt[i + 1].length, rng);
    out.push_back(make_rnn_example(gt, i, cut, next, video_length, scale));
  }
  return out;
}

double rnn_loss(const RnnPrediction& p, const RnnTarget& t) {
  const double pc = std::max(p.probabilities.at(t.next_label), 1e-12);
  const double dr = t.remaining - p.remaining;
  const double dn = t.next_length - p.next_length;
  return -std::log(pc) + dr * dr + dn * dn;
}

// ---- model -----------------------------------------------------------------

struct RnnModel::Trace {
  std::vector<Tensor> inputs, projected;
  std::vector<GruStepCache> layer1, layer2;
  Tensor final_hidden;
  double remaining_pre = 0.0, next_pre = 0.0;
};

RnnModel::RnnModel(std::size_t num_classes, const RnnConfig& config, double scale, double average_segments,
                   std::uint64_t vocab_hash)
    : num_classes_(num_classes),
      config_(config),
      scale_(scale),
      average_segments_(average_segments),
      vocab_hash_(vocab_hash) {
  if (num_classes == 0 || config.hidden == 0) throw std::invalid_argument("RnnModel: empty dimensions");
  if (!(scale > 0.0)) throw std::invalid_argument("RnnModel: scale must be positive");
  if (config_.input_width == 0) config_.input_width = config_.hidden;
  const std::size_t D = num_classes + 1, P = config_.input_width, H = config_.hidden;
  in_w_ = Parameter("input.w", {P, D});
  in_b_ = Parameter("input.b", {P});
  gru1_ = GruLayerParams(P, H, "gru1");
  gru2_ = GruLayerParams(H, H, "gru2");
  remaining_w_ = Parameter("remaining.w", {1, H});
  remaining_b_ = Parameter("remaining.b", {1});
  next_w_ = Parameter("next_length.w", {1, H});
  next_b_ = Parameter("next_length.b", {1});
  label_w_ = Parameter("label.w", {num_classes, H});
  label_b_ = Parameter("label.b", {num_classes});

  Rng rng(derive_seed(config_.seed, 0x524e4e));
  glorot_uniform(in_w_.value, D, P, rng);
  gru1_.init(rng);
  gru2_.init(rng);
  glorot_uniform(remaining_w_.value, H, 1, rng);
  glorot_uniform(next_w_.value, H, 1, rng);
  glorot_uniform(label_w_.value, H, num_classes, rng);
}

ParameterList RnnModel::parameters() {
  ParameterList out{&in_w_, &in_b_};
  for (auto* p : gru1_.parameters()) out.push_back(p);
  for (auto* p : gru2_.parameters()) out.push_back(p);
  for (auto* p : {&remaining_w_, &remaining_b_, &next_w_, &next_b_, &label_w_, &label_b_}) out.push_back(p);
  return out;
}

std::size_t RnnModel::parameter_count() const {
  return anticipate::parameter_count(const_cast<RnnModel*>(this)->parameters());
}

RnnPrediction RnnModel::run(std::span<const RnnToken> tokens, Trace* trace) const {
  if (tokens.empty()) throw std::invalid_argument("rnn_forward: empty token sequence");
  const std::size_t H = config_.hidden;
  Tensor h1({H}), h2({H});
  for (const auto& tok : tokens) {
    if (tok.label >= num_classes_)
      throw std::invalid_argument("rnn_forward: token label " + std::to_string(tok.label) + " outside " +
                                  std::to_string(num_classes_) + " classes");
    Tensor x = tok.to_input(num_classes_);
    Tensor proj = dense_forward(x, in_w_.value, in_b_.value);
    if (trace) {
      trace->layer1.emplace_back();
      trace->layer2.emplace_back();
    }
    h1 = gru_cell_step(proj, h1, gru1_, trace ? &trace->layer1.back() : nullptr);
    h2 = gru_cell_step(h1, h2, gru2_, trace ? &trace->layer2.back() : nullptr);
    if (trace) {
      trace->inputs.push_back(std::move(x));
      trace->projected.push_back(std::move(proj));
    }
  }
  const double rem_pre = dense_forward(h2, remaining_w_.value, remaining_b_.value)[0];
  const double next_pre = dense_forward(h2, next_w_.value, next_b_.value)[0];
  Tensor probs = softmax(dense_forward(h2, label_w_.value, label_b_.value));
  if (trace) {
    trace->final_hidden = h2;
    trace->remaining_pre = rem_pre;
    trace->next_pre = next_pre;
  }
  return {std::max(rem_pre, 0.0), std::max(next_pre, 0.0),
          std::vector<double>(probs.data().begin(), probs.data().end())};
}

RnnPrediction RnnModel::forward(std::span<const RnnToken> tokens) const { return run(tokens, nullptr); }

double RnnModel::accumulate_gradients(std::span<const RnnToken> tokens, const RnnTarget& target) {
  Trace trace;
  const RnnPrediction pred = run(tokens, &trace);
  const double loss = rnn_loss(pred, target);

  // Heads.
  Tensor d_rem({1}), d_next({1});
  d_rem[0] = trace.remaining_pre > 0.0 ? -2.0 * (target.remaining - pred.remaining) : 0.0;
  d_next[0] = trace.next_pre > 0.0 ? -2.0 * (target.next_length - pred.next_length) : 0.0;
  Tensor d_logits = Tensor::vector(pred.probabilities);
  if (pred.probabilities[target.next_label] >= 1e-12)
    d_logits[target.next_label] -= 1.0;
  else
    d_logits.fill(0.0);  // clamped region of the log term is flat

  const Tensor& h = trace.final_hidden;
  Tensor dh2 = dense_backward(h, remaining_w_.value, d_rem, remaining_w_.grad, remaining_b_.grad);
  Tensor dh_next = dense_backward(h, next_w_.value, d_next, next_w_.grad, next_b_.grad);
  Tensor dh_label = dense_backward(h, label_w_.value, d_logits, label_w_.grad, label_b_.grad);
  for (std::size_t j = 0; j < dh2.size(); ++j) dh2[j] += dh_next[j] + dh_label[j];

  // Backpropagation through time.
  const std::size_t H = config_.hidden;
  Tensor carry1({H});
  for (std::size_t t = tokens.size(); t-- > 0;) {
    Tensor dh2_prev, dh1_prev;
    Tensor dh1 = gru_cell_backward(trace.layer2[t], dh2, gru2_, dh2_prev);
    for (std::size_t j = 0; j < H; ++j) dh1[j] += carry1[j];
    Tensor dproj = gru_cell_backward(trace.layer1[t], dh1, gru1_, dh1_prev);
    dense_backward(trace.inputs[t], in_w_.value, dproj, in_w_.grad, in_b_.grad);
    dh2 = std::move(dh2_prev);
    carry1 = std::move(dh1_prev);
  }
  return loss;
}

Checkpoint RnnModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.architecture = kRnnArchitecture;
  ckpt.vocab_hash = vocab_hash_;
  ckpt.config = {{"num_classes", std::to_string(num_classes_)},
                 {"hidden", std::to_string(config_.hidden)},
                 {"input_width", std::to_string(config_.input_width)},
                 {"learning_rate", format_double(config_.learning_rate)},
                 {"epochs", std::to_string(config_.epochs)},
                 {"seed", std::to_string(config_.seed)},
                 {"scale", format_double(scale_)},
                 {"average_segments", format_double(average_segments_)}};
  for (auto* p : const_cast<RnnModel*>(this)->parameters()) ckpt.blocks.emplace_back(p->name, p->value);
  return ckpt;
}

RnnModel RnnModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.architecture != kRnnArchitecture)
    throw InputError("checkpoint architecture is '" + ckpt.architecture + "', expected " + kRnnArchitecture);
  RnnConfig config;
  config.hidden = ckpt.config_uint("hidden");
  config.input_width = ckpt.config_uint("input_width");
  config.learning_rate = ckpt.config_double("learning_rate");
  config.epochs = ckpt.config_uint("epochs");
  config.seed = ckpt.config_uint("seed");
  config.scale = ckpt.config_double("scale");
  RnnModel model(ckpt.config_uint("num_classes"), config, config.scale, ckpt.config_double("average_segments"),
                 ckpt.vocab_hash);
  for (auto* p : model.parameters()) {
    const Tensor& t = ckpt.block(p->name);
    if (t.shape() != p->value.shape())
      throw InputError("checkpoint block " + p->name + " has shape " + t.shape_string() + ", expected " +
                       p->value.shape_string());
    p->value = t;
  }
  return model;
}

// ---- training --------------------------------------------------------------

namespace {

double train_step(RnnModel& model, const ParameterList& params, AdamState& adam, const RnnExample& ex) {
  zero_grads(params);
  const double loss = model.accumulate_gradients(ex.tokens, ex.target);
  if (!std::isfinite(loss)) throw NumericalError("non-finite RNN training loss");
  adam_step(params, adam);
  return loss;
}

}  // namespace

RnnTrainResult train_rnn_on_examples(const std::vector<RnnExample>& examples, std::size_t num_classes,
                                     const RnnConfig& config, double scale, double average_segments,
                                     std::uint64_t vocab_hash) {
  if (examples.empty()) throw InputError("train_rnn: no training examples");
  RnnTrainResult result{RnnModel(num_classes, config, scale, average_segments, vocab_hash), {}};
  auto params = result.model.parameters();
  AdamState adam(AdamConfig{config.learning_rate});
  Rng rng(derive_seed(config.seed, 0x5348));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t i : order) total += train_step(result.model, params, adam, examples[i]);
    result.loss_curve.push_back(total / static_cast<double>(examples.size()));
  }
  return result;
}

RnnTrainResult train_rnn(const std::vector<SegmentSequence>& training, std::size_t num_classes,
                         const RnnConfig& config, std::uint64_t vocab_hash) {
  if (training.empty()) throw InputError("train_rnn: empty training set");
  double segments = 0.0;
  for (const auto& s : training) segments += static_cast<double>(s.size());
  const double average = segments / static_cast<double>(training.size());
  const double scale = config.scale > 0.0 ? config.scale : average;

  RnnTrainResult result{RnnModel(num_classes, config, scale, average, vocab_hash), {}};
  auto params = result.model.parameters();
  AdamState adam(AdamConfig{config.learning_rate});
  Rng rng(derive_seed(config.seed, 0x5348));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<RnnExample> examples;
    for (const auto& seq : training) {
      auto ex = make_rnn_examples(seq, seq.video_length(), scale, rng);
      examples.insert(examples.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
    }
    if (examples.empty()) throw InputError("train_rnn: every training video has a single segment");
    rng.shuffle(examples);
    double total = 0.0;
    for (const auto& ex : examples) total += train_step(result.model, params, adam, ex);
    result.loss_curve.push_back(total / static_cast<double>(examples.size()));
  }
  return result;
}

// ---- inference -------------------------------------------------------------

std::size_t denormalize_length(double normalized, std::size_t video_length, double scale, std::size_t min_frames) {
  const double frames = std::round(normalized * static_cast<double>(video_length) / scale);
  if (!(frames >= static_cast<double>(min_frames))) return min_frames;
  return static_cast<std::size_t>(frames);
}

SegmentSequence rnn_predict_future(const RnnModel& model, const SegmentSequence& observed, std::size_t video_length,
                                   std::size_t horizon_frames) {
  if (horizon_frames == 0) throw InputError("rnn_predict_future: horizon must be at least one frame");
  std::vector<Segment> context = observed.segments();
  std::vector<Segment> future;
  std::size_t covered = 0;
  auto append = [&future](Label label, std::size_t length) {
    if (length == 0) return;
    if (!future.empty() && future.back().label == label)
      future.back().length += length;
    else
      future.push_back({label, length});
  };

  const auto cap = static_cast<std::size_t>(std::max(1.0, std::ceil(4.0 * model.average_segments())));
  for (std::size_t iteration = 0;; ++iteration) {
    if (iteration == cap)
      throw RecursionLimitError("RNN recursion did not reach the " + std::to_string(horizon_frames) +
                                    "-frame horizon within " + std::to_string(cap) + " steps",
                                future);
    const auto tokens = encode_tokens(SegmentSequence(context), video_length, model.scale());
    const RnnPrediction pred = model.forward(tokens);

    const std::size_t extension = denormalize_length(pred.remaining, video_length, model.scale(), 0);
    context.back().length += extension;
    append(context.back().label, extension);
    covered += extension;
    if (covered >= horizon_frames) break;

    const Label label = pred.next_label();
    const std::size_t length = denormalize_length(pred.next_length, video_length, model.scale(), 1);
    if (context.back().label == label)
      context.back().length += length;
    else
      context.push_back({label, length});
    append(label, length);
    covered += length;
    if (covered >= horizon_frames) break;
  }

  // Trim the overshoot from the end.
  std::size_t excess = covered - horizon_frames;
  while (excess > 0) {
    auto& last = future.back();
    if (last.length > excess) {
      last.length -= excess;
      excess = 0;
    } else {
      excess -= last.length;
      future.pop_back();
    }
  }
  return SegmentSequence(std::move(future));
}

}  // namespace anticipate
