#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "sparsegrad/error.hpp"
#include "sparsegrad/gradcheck.hpp"
#include "sparsegrad/rng.hpp"
#include "sparsegrad/sparse_param.hpp"

using namespace sparsegrad;

namespace {

double logit(double s) { return std::log(s / (1.0 - s)); }

GateGroup group(std::vector<double> alpha, double sigma_beta, GateMode mode, GradMode grad = GradMode::exact) {
  GateGroup g;
  g.alpha = Tensor::vector(std::move(alpha));
  g.beta = logit(sigma_beta);
  g.mode = mode;
  g.grad_mode = grad;
  return g;
}

}  // namespace

TEST_CASE("softmax gates: equal strengths stay equal") {
  const GateOutput o = evaluate_gates(group({std::log(2.0), std::log(2.0)}, 0.25, GateMode::nonneg_softmax));
  CHECK(o.a[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(o.a[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_FALSE(o.degenerate);
}

TEST_CASE("softmax gates: a weak component is cut to exact zero") {
  const GateOutput o = evaluate_gates(group({0.0, -10.0}, 0.5, GateMode::nonneg_softmax));
  CHECK(o.a[0] == 1.0);
  CHECK(std::bit_cast<std::uint64_t>(o.a[1]) == 0);
  CHECK(o.active == std::vector<bool>{true, false});
  CHECK(o.zero_count() == 1);

  // the raw variant keeps the thresholded strength: 1 - 0.5 * (1 + e^-10)
  const GateOutput raw = evaluate_gates(group({0.0, -10.0}, 0.5, GateMode::nonneg_raw));
  CHECK(raw.a[0] == doctest::Approx(0.49997730000227).epsilon(1e-9));
  CHECK(raw.a[1] == 0.0);
}

TEST_CASE("softmax gates: a single member is the sole survivor") {
  for (double alpha : {-3.0, 0.0, 2.5}) {
    const GateOutput o = evaluate_gates(group({alpha}, 0.3, GateMode::nonneg_softmax));
    CHECK(o.a[0] == 1.0);
  }
}

TEST_CASE("softmax gates: a fully cut group is flagged degenerate and all zero") {
  const GateOutput o = evaluate_gates(group({0.0, 0.0}, 0.9, GateMode::nonneg_softmax));
  CHECK(o.degenerate);
  for (double v : o.a.data()) CHECK(v == 0.0);
}

TEST_CASE("signed gates: hand-evaluated example") {
  const GateOutput o = gates_signed(group({1.0, -1.0, 0.5}, 0.2, GateMode::signed_magnitude));
  CHECK(o.a[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(o.a[1] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(std::bit_cast<std::uint64_t>(o.a[2]) == 0);
}

TEST_CASE("signed gates: zero alpha gives zero gates, never -0.0") {
  const GateOutput o = gates_signed(group({0.0, -0.0, 0.0}, 0.2, GateMode::signed_magnitude));
  for (double v : o.a.data()) CHECK(std::bit_cast<std::uint64_t>(v) == 0);
  const GateOutput neg = gates_signed(group({-0.01, 2.0}, 0.2, GateMode::signed_magnitude));
  CHECK(std::bit_cast<std::uint64_t>(neg.a[0]) == 0);
}

TEST_CASE("init_half starts every gate at 0.5") {
  for (std::size_t n : {1, 2, 3, 4, 7, 16, 64}) {
    const GateGroup g = init_half(n);
    const double expect_alpha = 0.5 * static_cast<double>(n + 1) / static_cast<double>(n);
    CHECK(g.alpha[0] == doctest::Approx(expect_alpha).epsilon(1e-15));
    const GateOutput o = gates_signed(g);
    for (double v : o.a.data()) CHECK(std::abs(v - 0.5) <= 1e-12);
  }
  CHECK_THROWS_AS(init_half(0), ValidationError);
}

TEST_CASE("tape gates agree with the plain evaluation") {
  Rng rng(21);
  for (GateMode mode : {GateMode::nonneg_softmax, GateMode::nonneg_raw, GateMode::signed_magnitude}) {
    for (int k = 0; k < 10; ++k) {
      GateGroup g;
      g.alpha = rng.normal_tensor(Shape{5}, 1.0);
      g.beta = rng.uniform(-3.0, -0.5);
      g.mode = mode;
      const GateOutput plain = evaluate_gates(g);
      ad::Tape t;
      const ad::Var a = gate_values(t.constant(g.alpha), t.constant(Tensor::scalar(g.beta)), mode, GradMode::exact).a;
      CHECK(max_abs_diff(a.value(), plain.a) < 1e-14);
    }
  }
}

TEST_CASE("gate gradients agree with finite differences away from kinks") {
  Rng rng(8);
  std::size_t checked = 0;
  for (GateMode mode : {GateMode::nonneg_softmax, GateMode::nonneg_raw, GateMode::signed_magnitude}) {
    while (checked < 30) {
      const Tensor alpha = rng.normal_tensor(Shape{4}, 1.0);
      const double beta = rng.uniform(-3.0, -1.0);
      const Tensor c = rng.normal_tensor(Shape{4}, 1.0);
      const ad::LossBuilder f = [&](ad::Tape& t, std::span<const ad::Var> v) {
        return ad::sum(gate_values(v[0], v[1], mode, GradMode::exact).a * t.constant(c));
      };
      GateGroup g{alpha, beta, mode, GradMode::exact};
      GateGroup nudged = g;
      // skip points where a small nudge changes which members survive
      bool near_kink = false;
      for (double d : {-1e-3, 1e-3}) {
        nudged.beta = beta + d;
        near_kink = near_kink || evaluate_gates(nudged).active != evaluate_gates(g).active;
      }
      if (near_kink || evaluate_gates(g).degenerate) continue;
      CHECK(ad::max_gradient_error(f, {alpha, Tensor::scalar(beta)}) < 1e-6);
      ++checked;
    }
    checked = 0;
  }
}

TEST_CASE("dead gate probe: exact, rectified and coupled forms") {
  GateGroup g = group({1.2, -0.9, 0.02, 0.7}, 0.1, GateMode::signed_magnitude);
  const std::vector<double> c{0.5, -1.0, 2.0, 1.5};

  const DeadGateProbe ex = dead_gate_gradient_probe(g, 2, c, ThresholdForm::per_component);
  CHECK(ex.grad_alpha == 0.0);
  CHECK(ex.grad_through == 0.0);

  g.grad_mode = GradMode::rectified;
  const DeadGateProbe re = dead_gate_gradient_probe(g, 2, c, ThresholdForm::per_component);
  // d a_2 / d alpha_2 = 0.1 exp(|alpha_2| - sigma(beta)), times c_2
  CHECK(re.grad_alpha == doctest::Approx(2.0 * 0.1 * std::exp(0.02 - 0.1)).epsilon(1e-12));
  CHECK(re.grad_through == 0.0);

  g.grad_mode = GradMode::exact;
  const DeadGateProbe co = dead_gate_gradient_probe(g, 2, c, ThresholdForm::coupled);
  CHECK(co.grad_alpha != 0.0);
  CHECK(co.grad_through == 0.0);

  CHECK_THROWS_AS(dead_gate_gradient_probe(g, 0, c, ThresholdForm::per_component), ValidationError);
}
