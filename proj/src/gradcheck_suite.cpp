// SPDX-License-Identifier: Apache-2.0
#include "anticipate/gradcheck_suite.hpp"

#include "anticipate/random.hpp"
#include "anticipate/rnn.hpp"

namespace anticipate {
namespace {

void randomize(const ParameterList& params, Rng& rng, double scale) {
  for (auto* p : params)
    for (auto& v : p->value.data()) v = rng.uniform_real(-scale, scale);
}

std::function<void()> with_fault(std::function<void()> compute, const ParameterList& params, bool inject) {
  if (!inject) return compute;
  return [compute = std::move(compute), params] {
    compute();
    params.front()->grad[0] += 0.05;
  };
}

}  // namespace

GradCheckReport rnn_toy_gradcheck(const ToyGradCheckOptions& options) {
  constexpr std::size_t C = 4;
  Rng rng(derive_seed(options.seed, 0x524e4e));
  RnnConfig config;
  config.hidden = 8;
  config.seed = options.seed;
  RnnModel model(C, config, 1.0, 3.0);
  auto params = model.parameters();
  randomize(params, rng, 0.5);
  // Keep both length heads on the linear side of their ReLU.
  for (auto* p : params)
    if (p->name == "remaining.b" || p->name == "next_length.b") p->value[0] = 1.0;

  std::vector<RnnToken> tokens;
  for (int i = 0; i < 3; ++i)
    tokens.push_back({rng.uniform_real(0.05, 1.5), static_cast<Label>(rng.uniform_index(C))});
  const RnnTarget target{rng.uniform_real(0.1, 1.0), rng.uniform_real(0.1, 1.0), static_cast<Label>(rng.uniform_index(C))};

  auto loss = [&] { return rnn_loss(model.forward(tokens), target); };
  auto grads = [&] {
    zero_grads(params);
    model.accumulate_gradients(tokens, target);
  };
  return grad_check(params, loss, with_fault(grads, params, options.inject_fault), options.check);
}

GradCheckReport cnn_toy_gradcheck(CnnLoss loss_mode, const ToyGradCheckOptions& options) {
  CnnConfig config;
  config.rows = 16;
  config.num_classes = 4;
  config.hidden = 12;
  config.loss = loss_mode;
  config.seed = options.seed;
  CnnModel model(config);
  Rng rng(derive_seed(options.seed, 0x434e4e, static_cast<std::uint64_t>(loss_mode)));
  auto params = model.parameters();
  randomize(params, rng, 0.5);

  Tensor X({config.rows, config.num_classes}), Y({config.rows, config.num_classes});
  for (std::size_t s = 0; s < config.rows; ++s) {
    X.at(s, rng.uniform_index(config.num_classes)) = 1.0;
    Y.at(s, rng.uniform_index(config.num_classes)) = 1.0;
  }
  auto loss = [&] { return cnn_loss(model.forward(X), Y, loss_mode); };
  auto grads = [&] {
    zero_grads(params);
    model.accumulate_gradients(X, Y);
  };
  return grad_check(params, loss, with_fault(grads, params, options.inject_fault), options.check);
}

}  // namespace anticipate
