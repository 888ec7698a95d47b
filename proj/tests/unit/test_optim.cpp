// SPDX-License-Identifier: Apache-2.0
#include "anticipate/optim.hpp"

#include <cmath>
#include <limits>

#include "doctest.h"

using namespace anticipate;

TEST_CASE("zero gradient leaves parameters unchanged") {
  Parameter p("p", {3});
  p.value = Tensor::vector({1.0, -2.0, 0.5});
  AdamState state;
  for (int i = 0; i < 3; ++i) adam_step({&p}, state);
  CHECK(p.value == Tensor::vector({1.0, -2.0, 0.5}));
  CHECK(state.step == 3);
}

TEST_CASE("first step moves by the learning rate against the gradient sign") {
  for (double g : {3.0, -0.02, 1e3}) {
    Parameter p("p", {1});
    p.value[0] = 0.25;
    p.grad[0] = g;
    AdamState state;
    adam_step({&p}, state);
    CHECK(p.value[0] == doctest::Approx(0.25 - 0.001 * (g > 0 ? 1.0 : -1.0)).epsilon(1e-8));
  }
}

TEST_CASE("two steps on w^2 match a manual trace") {
  // Oracle: literal bias-corrected Adam recursion on a scalar.
  double w = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    const double g = 2.0 * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
    w -= 0.001 * mh / (std::sqrt(vh) + 1e-8);
  }
  CHECK(w == doctest::Approx(0.9980000262138343).epsilon(1e-15));

  Parameter p("w", {1});
  p.value[0] = 1.0;
  AdamState state;
  for (int t = 0; t < 2; ++t) {
    p.grad[0] = 2.0 * p.value[0];
    adam_step({&p}, state);
  }
  CHECK(p.value[0] == doctest::Approx(0.9980000262138343).epsilon(1e-15));
  CHECK(state.first_moment[0].shape() == p.value.shape());
}

TEST_CASE("grad_check reports mismatches and non-finite values") {
  Parameter p("p", {2});
  p.value = Tensor::vector({0.3, -0.7});
  auto loss = [&] { return p.value[0] * p.value[0] + 3.0 * p.value[1]; };

  auto good = [&] {
    p.zero_grad();
    p.grad[0] = 2.0 * p.value[0];
    p.grad[1] = 3.0;
  };
  auto r = grad_check({&p}, loss, good);
  CHECK(r.passed(1e-8));
  REQUIRE(r.blocks.size() == 1);
  CHECK(r.blocks[0].name == "p");
  CHECK(r.blocks[0].checked == 2);

  auto bad = [&] {
    good();
    p.grad[1] = 3.3;
  };
  auto rb = grad_check({&p}, loss, bad);
  CHECK_FALSE(rb.passed(1e-4));
  CHECK(rb.max_rel_error() == doctest::Approx(0.3 / 3.3).epsilon(1e-6));
  CHECK(rb.worst_block()->worst_index == 1);

  auto nan_grad = [&] {
    good();
    p.grad[0] = std::numeric_limits<double>::quiet_NaN();
  };
  auto rn = grad_check({&p}, loss, nan_grad);
  CHECK_FALSE(rn.all_finite());
  CHECK_FALSE(rn.passed(1.0));
}

TEST_CASE("grad_check restores parameter values") {
  Parameter p("p", {4});
  p.value = Tensor::vector({1, 2, 3, 4});
  grad_check({&p}, [&] { return p.value[2] * p.value[3]; },
             [&] {
               p.zero_grad();
               p.grad[2] = p.value[3];
               p.grad[3] = p.value[2];
             });
  CHECK(p.value == Tensor::vector({1, 2, 3, 4}));
}
