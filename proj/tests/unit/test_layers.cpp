// SPDX-License-Identifier: Apache-2.0
#include "anticipate/layers.hpp"

#include <cmath>

#include "anticipate/optim.hpp"
#include "anticipate/random.hpp"
#include "doctest.h"
#include "reference_kernels.hpp"

using namespace anticipate;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform_real(-scale, scale);
  return t;
}

void randomize(const ParameterList& params, Rng& rng, double scale = 0.5) {
  for (auto* p : params)
    for (auto& v : p->value.data()) v = rng.uniform_real(-scale, scale);
}

// Direct nested-loop correlation with implicit zero padding.
Tensor conv_oracle(const Tensor& x, const Conv1dParams& p) {
  const std::size_t S = x.rows(), Cin = x.cols(), K = p.filters;
  Tensor y({S, K});
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t k = 0; k < K; ++k) {
      double acc = p.bias.value[k];
      for (int tap = 0; tap < 5; ++tap) {
        const long src = static_cast<long>(s) + tap - 2;
        if (src < 0 || src >= static_cast<long>(S)) continue;
        for (std::size_t c = 0; c < Cin; ++c)
          acc += p.kernels.value[(k * 5 + static_cast<std::size_t>(tap)) * Cin + c] * x.at(static_cast<std::size_t>(src), c);
      }
      y.at(s, k) = acc;
    }
  return y;
}

}  // namespace

TEST_CASE("dense_forward") {
  Tensor x = Tensor::vector({1, 2});
  CHECK(dense_forward(x, Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::vector({0, 0})) == x);
  CHECK(dense_forward(x, Tensor::matrix(2, 2, {0, 0, 0, 0}), Tensor::vector({5, -1})) == Tensor::vector({5, -1}));
  CHECK(dense_forward(x, Tensor::matrix(2, 2, {1, 1, 0, 1}), Tensor::vector({0, 1})) == Tensor::vector({3, 3}));
  CHECK_THROWS_AS(dense_forward(Tensor::vector({1, 2, 3}), Tensor::matrix(2, 2, {1, 1, 0, 1}), Tensor::vector({0, 1})),
                  std::invalid_argument);
}

TEST_CASE("gru_cell_step") {
  GruLayerParams p(3, 4, "g");
  Tensor h = Tensor::vector({0.5, -1.0, 2.0, 0.25});
  Tensor x = Tensor::vector({1.0, -2.0, 0.3});

  SUBCASE("zero weights halve the state") {
    Tensor out = gru_cell_step(x, h, p);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(0.5 * h[i]).epsilon(1e-15));
    Tensor zero({4});
    CHECK(gru_cell_step(x, zero, p) == zero);
  }

  SUBCASE("random weights match the scalar oracle") {
    Rng rng(3);
    randomize(p.parameters(), rng, 0.8);
    Tensor out = gru_cell_step(x, h, p);
    auto expected = reference::gru({x[0], x[1], x[2]}, {h[0], h[1], h[2], h[3]}, p);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-13));
  }

  CHECK_THROWS_AS(gru_cell_step(Tensor::vector({1.0}), h, p), std::invalid_argument);
}

TEST_CASE("conv1d_forward") {
  SUBCASE("zero filter with unit bias") {
    Conv1dParams p(2, 1, "c");
    p.bias.value[0] = 1.0;
    Rng rng(1);
    Tensor y = conv1d_forward(random_tensor({6, 2}, rng), p);
    for (double v : y.data()) CHECK(v == 1.0);
  }
  SUBCASE("centre tap identity") {
    Conv1dParams p(1, 1, "c");
    p.kernels.value[2] = 1.0;
    Rng rng(2);
    Tensor x = random_tensor({9, 1}, rng);
    CHECK(conv1d_forward(x, p) == x);
  }
  SUBCASE("random input matches nested loops") {
    Rng rng(7);
    for (std::size_t cin : {1u, 3u}) {
      Conv1dParams p(cin, 2, "c");
      randomize(p.parameters(), rng);
      Tensor x = random_tensor({7, cin}, rng);
      Tensor y = conv1d_forward(x, p), oracle = conv_oracle(x, p);
      for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(oracle[i]).epsilon(1e-14));
    }
    Conv1dParams p(1, 1, "c");
    randomize(p.parameters(), rng);
    Tensor x = random_tensor({1, 1}, rng);
    CHECK(conv1d_forward(x, p)[0] == doctest::Approx(conv_oracle(x, p)[0]));
  }
}

TEST_CASE("maxpool_rows") {
  CHECK(maxpool_rows(Tensor::matrix(4, 1, {1, 3, 2, 0})) == Tensor::matrix(2, 1, {3, 2}));
  CHECK(maxpool_rows(Tensor::matrix(5, 1, {4, 4, 4, 4, 4})) == Tensor::matrix(3, 1, {4, 4, 4}));
  CHECK(maxpool_rows(Tensor::matrix(1, 2, {7, -1})) == Tensor::matrix(1, 2, {7, -1}));
  CHECK(maxpool_rows(Tensor::matrix(3, 1, {1, 2, 9})) == Tensor::matrix(2, 1, {2, 9}));

  std::vector<std::size_t> arg;
  maxpool_rows(Tensor::matrix(2, 1, {5, 5}), &arg);
  CHECK(arg[0] == 0);
  Tensor dx = maxpool_rows_backward(Tensor::matrix(1, 1, {1.5}), arg, 2);
  CHECK(dx == Tensor::matrix(2, 1, {1.5, 0}));
}

TEST_CASE("pointwise ops") {
  CHECK(relu(Tensor::vector({-1, 2})) == Tensor::vector({0, 2}));
  auto s = softmax(Tensor::vector({0, 0}));
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.5);
  auto big = softmax(Tensor::vector({1000, 0}));
  CHECK(big.all_finite());
  CHECK(big[0] == doctest::Approx(1.0));
  auto n = l2_normalize_rows(Tensor::matrix(1, 2, {3, 4}));
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(l2_normalize_rows(Tensor::matrix(2, 2, {0, 0, 1, 0})) == Tensor::matrix(2, 2, {0, 0, 1, 0}));
}

TEST_CASE("softmax and l2 row properties") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng.uniform_index(6), cols = 1 + rng.uniform_index(8);
    Tensor x = random_tensor({rows, cols}, rng, 30.0);
    Tensor s = softmax_rows(x), n = l2_normalize_rows(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        CHECK(s.at(r, c) >= 0.0);
        sum += s.at(r, c);
        sq += n.at(r, c) * n.at(r, c);
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("gaussian_filter_columns") {
  CHECK(gaussian_kernel(1.0).size() == 7);
  CHECK(gaussian_kernel(0.4).size() == 5);  // ceil(1.2) = 2

  Tensor constant({12, 2}, 0.37);
  Tensor out = gaussian_filter_columns(constant, 2.5);
  for (double v : out.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));

  Rng rng(4);
  Tensor x = random_tensor({10, 3}, rng);
  Tensor sharp = gaussian_filter_columns(x, 0.01);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(sharp[i] - x[i]) < 1e-9);

  // Explicit kernel: exp(-d^2 / 2) over d in [-3, 3], normalized.
  std::vector<double> w(7);
  double total = 0.0;
  for (int d = -3; d <= 3; ++d) total += w[static_cast<std::size_t>(d + 3)] = std::exp(-0.5 * d * d);
  for (auto& v : w) v /= total;
  Tensor impulse({15, 1});
  impulse[7] = 1.0;
  Tensor smoothed = gaussian_filter_columns(impulse, 1.0);
  for (std::size_t i = 0; i < 15; ++i) {
    const long d = static_cast<long>(i) - 7;
    const double expected = std::abs(d) <= 3 ? w[static_cast<std::size_t>(d + 3)] : 0.0;
    CHECK(smoothed[i] == doctest::Approx(expected).epsilon(1e-14));
  }
  CHECK(w[3] == doctest::Approx(0.39905028).epsilon(1e-7));

  // Replicate edges: an impulse at row 0 keeps the mass of the clipped taps on row 0.
  Tensor edge({8, 1});
  edge[0] = 1.0;
  Tensor e = gaussian_filter_columns(edge, 1.0);
  CHECK(e[0] == doctest::Approx(w[3] + w[2] + w[1] + w[0]).epsilon(1e-14));
}

TEST_CASE("forward passes are bit-reproducible") {
  Rng rng(8);
  GruLayerParams g(3, 5, "g");
  g.init(rng);
  Tensor x = random_tensor({3}, rng), h = random_tensor({5}, rng);
  CHECK(gru_cell_step(x, h, g) == gru_cell_step(x, h, g));
  Conv1dParams c(2, 4, "c");
  c.init(rng);
  Tensor m = random_tensor({11, 2}, rng);
  CHECK(conv1d_forward(m, c) == conv1d_forward(m, c));
}

TEST_CASE("initialization bounds") {
  Rng rng(0);
  GruLayerParams g(6, 10, "g");
  g.init(rng);
  const double a_in = std::sqrt(6.0 / 16.0), a_rec = std::sqrt(6.0 / 20.0);
  for (double v : g.w_z.value.data()) CHECK(std::abs(v) <= a_in);
  for (double v : g.u_h.value.data()) CHECK(std::abs(v) <= a_rec);
  for (double v : g.b_r.value.data()) CHECK(v == 0.0);
}

TEST_CASE("dense gradient check") {
  Rng rng(5);
  Parameter W("W", {3, 4}), b("b", {3});
  randomize({&W, &b}, rng);
  Tensor x = random_tensor({4}, rng), target = random_tensor({3}, rng);
  auto loss = [&] {
    Tensor y = dense_forward(x, W.value, b.value);
    double l = 0.0;
    for (std::size_t i = 0; i < 3; ++i) l += (y[i] - target[i]) * (y[i] - target[i]);
    return l;
  };
  auto grads = [&] {
    zero_grads({&W, &b});
    Tensor y = dense_forward(x, W.value, b.value);
    Tensor dy({3});
    for (std::size_t i = 0; i < 3; ++i) dy[i] = 2.0 * (y[i] - target[i]);
    dense_backward(x, W.value, dy, W.grad, b.grad);
  };
  auto report = grad_check({&W, &b}, loss, grads);
  CHECK(report.passed(1e-6));
}

TEST_CASE("GRU three-step gradient check including the input gradient") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    GruLayerParams p(2, 3, "g");
    randomize(p.parameters(), rng, 0.7);
    Parameter xs("x", {3, 2}), h0("h0", {3});
    randomize({&xs, &h0}, rng, 1.0);
    Tensor probe = random_tensor({3}, rng);
    ParameterList all = p.parameters();
    all.push_back(&xs);
    all.push_back(&h0);

    auto run = [&](std::vector<GruStepCache>* caches) {
      Tensor h = h0.value;
      for (std::size_t t = 0; t < 3; ++t) {
        Tensor x = Tensor::vector({xs.value.at(t, 0), xs.value.at(t, 1)});
        GruStepCache c;
        h = gru_cell_step(x, h, p, caches ? &c : nullptr);
        if (caches) caches->push_back(std::move(c));
      }
      return h;
    };
    auto loss = [&] {
      Tensor h = run(nullptr);
      double l = 0.0;
      for (std::size_t i = 0; i < 3; ++i) l += probe[i] * h[i] + h[i] * h[i];
      return l;
    };
    auto grads = [&] {
      zero_grads(all);
      std::vector<GruStepCache> caches;
      Tensor h = run(&caches);
      Tensor dh({3});
      for (std::size_t i = 0; i < 3; ++i) dh[i] = probe[i] + 2.0 * h[i];
      for (std::size_t t = 3; t-- > 0;) {
        Tensor dprev;
        Tensor dx = gru_cell_backward(caches[t], dh, p, dprev);
        xs.grad.at(t, 0) += dx[0];
        xs.grad.at(t, 1) += dx[1];
        dh = dprev;
      }
      for (std::size_t i = 0; i < 3; ++i) h0.grad[i] += dh[i];
    };
    auto report = grad_check(all, loss, grads);
    CHECK_MESSAGE(report.passed(1e-6), "seed ", seed, " max rel error ", report.max_rel_error());
  }
}

TEST_CASE("conv, relu, pool and l2 gradient check") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    Conv1dParams c(2, 3, "c");
    randomize(c.parameters(), rng, 0.6);
    Parameter x("x", {7, 2});
    randomize({&x}, rng, 1.0);
    Tensor probe = random_tensor({4, 3}, rng);
    ParameterList all = c.parameters();
    all.push_back(&x);

    auto loss = [&] {
      Tensor y = l2_normalize_rows(maxpool_rows(relu(conv1d_forward(x.value, c))));
      double l = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) l += probe[i] * y[i];
      return l;
    };
    auto grads = [&] {
      zero_grads(all);
      Tensor a = conv1d_forward(x.value, c);
      Tensor r = relu(a);
      std::vector<std::size_t> arg;
      Tensor pooled = maxpool_rows(r, &arg);
      Tensor y = l2_normalize_rows(pooled);
      Tensor dpooled = l2_normalize_rows_backward(pooled, y, probe);
      Tensor dr = maxpool_rows_backward(dpooled, arg, r.rows());
      Tensor da = relu_backward(r, dr);
      Tensor dx = conv1d_backward(x.value, da, c);
      for (std::size_t i = 0; i < dx.size(); ++i) x.grad[i] += dx[i];
    };
    auto report = grad_check(all, loss, grads);
    CHECK_MESSAGE(report.passed(1e-4), "seed ", seed, " max rel error ", report.max_rel_error());
  }
}

TEST_CASE("softmax and l2 backward agree with finite differences") {
  Rng rng(9);
  Parameter x("x", {3, 4});
  randomize({&x}, rng, 2.0);
  Tensor probe = random_tensor({3, 4}, rng);
  auto loss = [&] {
    Tensor y = l2_normalize_rows(x.value);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += probe[i] * y[i];
    return l;
  };
  auto grads = [&] {
    zero_grads({&x});
    Tensor y = l2_normalize_rows(x.value);
    x.grad = l2_normalize_rows_backward(x.value, y, probe);
  };
  CHECK(grad_check({&x}, loss, grads).passed(1e-6));
}
