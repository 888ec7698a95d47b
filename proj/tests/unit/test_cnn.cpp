// SPDX-License-Identifier: Apache-2.0
#include "anticipate/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anticipate/errors.hpp"
#include "anticipate/evaluation.hpp"
#include "anticipate/optim.hpp"
#include "doctest.h"

using namespace anticipate;

namespace {

constexpr Label A = 0, B = 1, C = 2;

std::vector<Label> row_labels(const Tensor& X) {
  std::vector<Label> out;
  for (std::size_t s = 0; s < X.rows(); ++s) {
    Label best = 0;
    for (std::size_t c = 1; c < X.cols(); ++c)
      if (X.at(s, c) > X.at(s, best)) best = static_cast<Label>(c);
    out.push_back(best);
  }
  return out;
}

Tensor one_hot_rows(const std::vector<Label>& labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t s = 0; s < labels.size(); ++s) t.at(s, labels[s]) = 1.0;
  return t;
}

CnnConfig tiny_config(std::size_t rows, std::size_t classes, CnnLoss loss = CnnLoss::Squared) {
  CnnConfig c;
  c.rows = rows;
  c.num_classes = classes;
  c.conv1_filters = 2;
  c.conv2_filters = 3;
  c.hidden = 5;
  c.loss = loss;
  return c;
}

// Largest-remainder apportionment in exact integer arithmetic; valid when every
// segment's floor quota is already >= 1.
std::vector<std::size_t> hamilton(const std::vector<std::size_t>& lengths, std::size_t rows) {
  const std::size_t t = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
  std::vector<std::size_t> alloc(lengths.size());
  std::vector<std::size_t> rem(lengths.size());
  std::size_t used = 0;
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    alloc[k] = lengths[k] * rows / t;
    rem[k] = lengths[k] * rows % t;
    used += alloc[k];
  }
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; used < rows; ++i, ++used) ++alloc[order[i]];
  return alloc;
}

}  // namespace

TEST_CASE("encode_matrix examples") {
  CHECK(row_labels(encode_matrix(SegmentSequence({{A, 4}, {B, 6}}), 5, 3)) == std::vector<Label>{A, A, B, B, B});
  CHECK(row_labels(encode_matrix(SegmentSequence({{A, 3}, {B, 3}, {C, 4}}), 5, 3)) ==
        std::vector<Label>{A, A, B, C, C});
  CHECK(row_labels(encode_matrix(SegmentSequence({{B, 17}}), 6, 3)) == std::vector<Label>(6, B));
  CHECK_THROWS_AS(encode_matrix(SegmentSequence({{A, 1}, {B, 1}, {A, 1}}), 2, 3), std::invalid_argument);
}

TEST_CASE("encode_matrix properties") {
  Rng rng(31);
  std::size_t feasible = 0, infeasible = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t S = 1 + rng.uniform_index(40);
    const std::size_t n = 1 + rng.uniform_index(std::min<std::size_t>(S, 12));
    std::vector<Segment> segs;
    for (std::size_t k = 0; k < n; ++k)
      segs.push_back({static_cast<Label>(k % 2 == 0 ? A : B), 1 + rng.uniform_index(rng.uniform_index(2) ? 5 : 300)});
    SegmentSequence seq(segs);
    const auto lengths = [&] {
      std::vector<std::size_t> l;
      for (const auto& s : seq.segments()) l.push_back(s.length);
      return l;
    }();
    const std::size_t t = seq.video_length();
    const auto alloc = matrix_row_allocation(lengths, S);
    CHECK(std::accumulate(alloc.begin(), alloc.end(), std::size_t{0}) == S);
    for (auto a : alloc) CHECK(a >= 1);

    // Exactly one 1 per row, labels in temporal order with the allocated block sizes.
    Tensor X = encode_matrix(seq, S, 2);
    std::size_t row = 0;
    for (std::size_t k = 0; k < seq.size(); ++k)
      for (std::size_t i = 0; i < alloc[k]; ++i, ++row) {
        CHECK(X.at(row, seq[k].label) == 1.0);
        CHECK(X.at(row, 0) + X.at(row, 1) == 1.0);
      }

    std::size_t floor_sum = 0;
    bool all_quota_at_least_one = true;
    for (auto l : lengths) {
      floor_sum += std::max<std::size_t>(1, l * S / t);
      all_quota_at_least_one &= l * S / t >= 1;
    }
    if (floor_sum <= S) {
      ++feasible;
      for (std::size_t k = 0; k < lengths.size(); ++k) {
        const double quota = static_cast<double>(lengths[k]) * S / t;
        CHECK(std::abs(static_cast<double>(alloc[k]) - quota) < 1.0 + 1e-9);
      }
      if (all_quota_at_least_one) CHECK(alloc == hamilton(lengths, S));
    } else {
      ++infeasible;
    }
  }
  CHECK(feasible > 500);
  CHECK(infeasible > 0);
}

TEST_CASE("decode_matrix") {
  Tensor Y = one_hot_rows({A, A, B, B}, 3);
  CHECK(decode_matrix(Y, 8).vector() == std::vector<Label>{A, A, A, A, B, B, B, B});
  CHECK(decode_matrix(Y, 9).vector() == std::vector<Label>{A, A, A, A, B, B, B, B, B});
  CHECK(decode_matrix(one_hot_rows({C, C, C}, 3), 10).vector() == std::vector<Label>(10, C));
  // Fewer frames than rows: every row spans zero frames and the last row fills the horizon.
  CHECK(decode_matrix(Y, 3).vector() == std::vector<Label>{B, B, B});
  Tensor tie({1, 3}, 0.5);
  CHECK(decode_matrix(tie, 2).vector() == std::vector<Label>{A, A});

  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t S = 1 + rng.uniform_index(20), H = 1 + rng.uniform_index(500);
    Tensor R({S, 3});
    for (auto& v : R.data()) v = rng.uniform_real();
    CHECK(decode_matrix(R, H).size() == H);
  }
}

TEST_CASE("cnn_loss") {
  Tensor y = one_hot_rows({A, B}, 2);
  CHECK(cnn_loss(y, y, CnnLoss::Squared) == 0.0);
  CHECK(cnn_loss(Tensor::matrix(1, 2, {0, 1}), Tensor::matrix(1, 2, {1, 0}), CnnLoss::Squared) == doctest::Approx(1.0));
  Tensor uniform({4, 5}, 0.2);
  CHECK(cnn_loss(uniform, one_hot_rows({0, 1, 2, 3}, 5), CnnLoss::CrossEntropy) == doctest::Approx(std::log(5.0)));
}

TEST_CASE("make_cnn_examples") {
  std::vector<Label> f;
  for (std::size_t i = 0; i < 100; ++i) f.push_back(i < 30 ? A : i < 70 ? B : C);
  auto ex = make_cnn_examples(FrameTimeline(f), 10, 3);
  REQUIRE(ex.size() == 4);
  // alpha = 0.1: 10 frames of A observed, frames [10, 60) are 20 A then 30 B.
  CHECK(row_labels(ex[0].input) == std::vector<Label>(10, A));
  CHECK(row_labels(ex[0].target) == std::vector<Label>{A, A, A, A, B, B, B, B, B, B});
  // alpha = 0.5: [0, 50) is 30 A + 20 B, [50, 100) is 20 B + 30 C.
  CHECK(row_labels(ex[3].input) == std::vector<Label>{A, A, A, A, A, A, B, B, B, B});
  CHECK(row_labels(ex[3].target) == std::vector<Label>{B, B, B, B, C, C, C, C, C, C});

  auto constant = make_cnn_examples(FrameTimeline(std::vector<Label>(40, C)), 8, 3);
  for (const auto& e : constant) CHECK(e.input == e.target);

  CHECK_THROWS_AS(make_cnn_examples(FrameTimeline(std::vector<Label>(5, A)), 4, 3), InputError);
}

TEST_CASE("smooth_output") {
  Tensor constant({16, 3}, 0.25);
  Tensor sc = smooth_output(constant, 3.0);
  for (std::size_t i = 0; i < sc.size(); ++i) CHECK(sc[i] == doctest::Approx(0.25).epsilon(1e-14));

  // One flipped row inside a run of 25 A rows.
  std::vector<Label> labels(25, A);
  labels[12] = B;
  Tensor Y = one_hot_rows(labels, 2);
  Tensor smoothed = smooth_output(Y, 3.0);
  double w0 = 0.0, total = 0.0;
  for (int d = -9; d <= 9; ++d) {
    const double w = std::exp(-0.5 * d * d / 9.0);
    total += w;
    if (d == 0) w0 = w;
  }
  w0 /= total;
  CHECK(smoothed.at(12, B) == doctest::Approx(w0).epsilon(1e-12));
  CHECK(smoothed.at(12, A) == doctest::Approx(1.0 - w0).epsilon(1e-12));
  CHECK(row_labels(smoothed) == std::vector<Label>(25, A));

  // Column sums are preserved when the edge rows covered by the kernel radius are constant.
  Rng rng(6);
  Tensor Z({40, 2});
  for (std::size_t s = 0; s < 40; ++s)
    for (std::size_t c = 0; c < 2; ++c) Z.at(s, c) = s < 10 ? 0.3 : s >= 30 ? -0.7 : rng.uniform_real(-1, 1);
  Tensor Zs = smooth_output(Z, 3.0);
  for (std::size_t c = 0; c < 2; ++c) {
    double a = 0.0, b = 0.0;
    for (std::size_t s = 0; s < 40; ++s) {
      a += Z.at(s, c);
      b += Zs.at(s, c);
    }
    CHECK(std::abs(a - b) / 40.0 < 1e-9);
  }
}

TEST_CASE("cnn_forward") {
  CnnModel m(tiny_config(8, 3));
  Rng rng(1);
  Tensor X = one_hot_rows({A, A, B, B, B, C, C, C}, 3);

  SUBCASE("zero parameters") {
    for (auto* p : m.parameters()) p->value.fill(0.0);
    CHECK(cnn_forward(m, X) == Tensor({8, 3}));
    CnnModel x(tiny_config(8, 3, CnnLoss::CrossEntropy));
    for (auto* p : x.parameters()) p->value.fill(0.0);
    const Tensor Yx = cnn_forward(x, X);
    for (double v : Yx.data()) CHECK(v == doctest::Approx(1.0 / 3.0));
  }

  SUBCASE("rows are unit norm and output is reproducible") {
    Tensor Y = cnn_forward(m, X);
    CHECK(Y == cnn_forward(m, X));
    CHECK(Y == cnn_forward(CnnModel(tiny_config(8, 3)), X));
    for (std::size_t s = 0; s < 8; ++s) {
      double sq = 0.0;
      for (std::size_t c = 0; c < 3; ++c) sq += Y.at(s, c) * Y.at(s, c);
      if (sq > 0.0) CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-12);
    }
  }

  CHECK_THROWS_AS(cnn_forward(m, Tensor({7, 3})), std::invalid_argument);
}

TEST_CASE("default configuration has about six million parameters") {
  CHECK(default_hidden_width(128, 48) == 900);
  CnnConfig cfg;
  cfg.num_classes = 48;
  CnnModel m(cfg);
  const double count = static_cast<double>(m.parameter_count());
  CHECK(count > 5.7e6);
  CHECK(count < 6.3e6);
}

TEST_CASE("full-network gradient matches finite differences") {
  for (CnnLoss loss : {CnnLoss::Squared, CnnLoss::CrossEntropy}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      CnnConfig cfg = tiny_config(9, 3, loss);
      cfg.seed = seed;
      CnnModel m(cfg);
      Rng rng(50 + seed);
      for (auto* p : m.parameters())
        for (auto& v : p->value.data()) v = rng.uniform_real(-0.6, 0.6);
      std::vector<Label> in(9), out(9);
      for (auto& l : in) l = static_cast<Label>(rng.uniform_index(3));
      for (auto& l : out) l = static_cast<Label>(rng.uniform_index(3));
      Tensor X = one_hot_rows(in, 3), Y = one_hot_rows(out, 3);
      auto params = m.parameters();
      auto report = grad_check(
          params, [&] { return cnn_loss(m.forward(X), Y, loss); },
          [&] {
            zero_grads(params);
            m.accumulate_gradients(X, Y);
          });
      CHECK_MESSAGE(report.passed(1e-4), to_string(loss), " seed ", seed, " worst ", report.worst_block()->name, " ",
                    report.max_rel_error());
    }
  }
}

TEST_CASE("cnn_predict_future") {
  CnnModel m(tiny_config(8, 3));
  SegmentSequence obs({{A, 10}, {B, 5}});
  auto full = cnn_predict_future(m, obs, 50, 50);
  CHECK(full.size() == 50);
  auto prefix = cnn_predict_future(m, obs, 10, 50);
  CHECK(prefix == full.slice(0, 10));
  CHECK_THROWS_AS(cnn_predict_future(m, obs, 51, 50), InputError);
  std::vector<Segment> many;
  for (std::size_t i = 0; i < 9; ++i) many.push_back({static_cast<Label>(i % 2), 2});
  CHECK_THROWS_AS(cnn_predict_future(m, SegmentSequence(many), 10, 50), std::invalid_argument);
}

TEST_CASE("loss on a toy set is non-increasing up to small transients") {
  std::vector<Label> f;
  for (std::size_t i = 0; i < 128; ++i) f.push_back(i < 10 ? A : i < 30 ? B : i < 60 ? C : 3);
  CnnConfig cfg;
  cfg.rows = 16;
  cfg.num_classes = 4;
  cfg.hidden = 32;
  cfg.epochs = 50;
  cfg.batch_size = 4;
  cfg.seed = 3;
  const auto curve = train_cnn(std::vector<FrameTimeline>(3, FrameTimeline(f)), cfg).loss_curve;
  REQUIRE(curve.size() == 50);
  for (std::size_t e = 1; e < curve.size(); ++e) CHECK(curve[e] <= curve[e - 1] * 1.05);
  CHECK(curve.back() < 0.1 * curve.front());
}

TEST_CASE("training") {
  // Deterministic grammar A -> B -> C -> D with fixed lengths. Every training fraction
  // observes a different segment composition, since the matrix only encodes proportions.
  // The 64-frame future spans 4 frames per row.
  constexpr Label D = 3;
  std::vector<Label> f;
  for (std::size_t i = 0; i < 128; ++i) f.push_back(i < 10 ? A : i < 30 ? B : i < 60 ? C : D);
  std::vector<FrameTimeline> train(3, FrameTimeline(f));
  CnnConfig cfg;
  cfg.rows = 16;
  cfg.num_classes = 4;
  cfg.hidden = 32;
  cfg.sigma = 1.0;
  cfg.epochs = 150;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.005;
  cfg.seed = 3;
  auto result = train_cnn(train, cfg);
  REQUIRE(result.loss_curve.size() == 150);

  SUBCASE("future half is reproduced on training videos") {
    for (double alpha : kCnnTrainingFractions) {
      const std::size_t t = fraction_of(alpha, 128);
      auto pred = cnn_predict_future(result.model, segments_from_frames(FrameTimeline(f).slice(0, t)), 64, 64);
      auto moc = moc_accuracy(pred, FrameTimeline(f).slice(t, t + 64));
      CHECK_MESSAGE(moc.moc >= 0.9, "alpha ", alpha, " moc ", moc.moc);
    }
  }

  SUBCASE("same seed gives identical parameters") {
    auto again = train_cnn(train, cfg);
    auto p1 = result.model.parameters(), p2 = again.model.parameters();
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value == p2[i]->value);
  }

  SUBCASE("checkpoint round trip") {
    auto ckpt = result.model.to_checkpoint();
    CHECK(ckpt.architecture == "cnn-v1");
    auto restored = CnnModel::from_checkpoint(deserialize_checkpoint(serialize_checkpoint(ckpt)));
    Tensor X = encode_matrix(SegmentSequence({{A, 5}}), 16, 4);
    CHECK(restored.forward(X) == result.model.forward(X));
    CHECK(restored.config().sigma == 1.0);
    CHECK(restored.config().loss == CnnLoss::Squared);
  }
}
