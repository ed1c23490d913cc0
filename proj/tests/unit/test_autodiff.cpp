#include <cmath>
#include <vector>

#include "doctest.h"
#include "sparsegrad/autodiff.hpp"
#include "sparsegrad/gradcheck.hpp"
#include "sparsegrad/linalg.hpp"
#include "sparsegrad/rng.hpp"

using namespace sparsegrad;
using namespace sparsegrad::ad;

namespace {

Tensor vec(std::vector<double> v) { return Tensor::vector(std::move(v)); }

void check_near(const Tensor& got, const std::vector<double>& want, double tol = 1e-12) {
  REQUIRE(got.numel() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(tol));
}

}  // namespace

TEST_CASE("quadratic loss has gradient 2w") {
  Tape t;
  Var w = t.leaf(vec({1, 2, 3}));
  const Gradients g = t.backward(sum(w * w));
  check_near(g[w], {2, 4, 6});
}

TEST_CASE("constant loss gives zero gradients") {
  Tape t;
  Var w = t.leaf(vec({1, -2}));
  Var c = t.scalar(3.0);
  const Gradients g = t.backward(c);
  CHECK(g[w] == Tensor::zeros_like(w.value()));
}

TEST_CASE("backward rejects a non-scalar root") {
  Tape t;
  Var w = t.leaf(vec({1, 2}));
  CHECK_THROWS(t.backward(w * w));
}

TEST_CASE("relu forward and subgradient with relu'(0) = 0") {
  Tape t;
  Var w = t.leaf(vec({-1, 0, 2}));
  Var y = relu(w);
  check_near(y.value(), {0, 0, 2});
  const Gradients g = t.backward(sum(y));
  CHECK(g[w][0] == 0.0);
  CHECK(g[w][1] == 0.0);
  CHECK(g[w][2] == 1.0);
}

TEST_CASE("relu on an all-negative input is zero with zero gradient") {
  Tape t;
  Var w = t.leaf(vec({-3, -0.5, -1e-9}));
  Var y = relu(w);
  const Gradients g = t.backward(sum(y));
  for (double v : y.value().data()) CHECK(v == 0.0);
  for (double v : g[w].data()) CHECK(v == 0.0);
}

TEST_CASE("rgf_relu: relu values, elu derivative backward") {
  Tape t;
  Var x = t.leaf(vec({-1, 0.5}));
  Var y = rgf_relu(x);
  check_near(y.value(), {0, 0.5});
  const Gradients g = t.backward(sum(y));
  // 0.1 * exp(-1), checked against a central difference of elu itself
  const double fd = (0.1 * std::expm1(-1 + 1e-6) - 0.1 * std::expm1(-1 - 1e-6)) / 2e-6;
  CHECK(g[x][0] == doctest::Approx(0.036787944117144233).epsilon(1e-14));
  CHECK(g[x][0] == doctest::Approx(fd).epsilon(1e-8));
  CHECK(g[x][1] == 1.0);

  Tape t2;
  Var x2 = t2.leaf(vec({2}));
  const Gradients g2 = t2.backward(sum(scale(rgf_relu(x2), 3.0)));
  CHECK(g2[x2][0] == 3.0);
}

TEST_CASE("safe_l2_norm values and gradients") {
  Tape t;
  Var x = t.leaf(vec({3, 4}));
  Var n = safe_l2_norm(x);
  CHECK(n.value().item() == doctest::Approx(5.0));
  check_near(t.backward(n)[x], {0.6, 0.8}, 1e-9);

  Tape t0;
  Var z = t0.leaf(vec({0, 0}));
  Var nz = safe_l2_norm(z);
  CHECK(nz.value().item() == doctest::Approx(0.0).epsilon(1e-9));
  const Tensor gz = t0.backward(nz)[z];
  for (double v : gz.data()) {
    CHECK(std::isfinite(v));
    CHECK(v == 0.0);
  }

  Tape t1;
  Var m = t1.leaf(Tensor::matrix({{3, 4}, {0, 0}}));
  Var rn = safe_l2_norm(m, 1);
  CHECK(rn.value()[0] == doctest::Approx(5.0));
  CHECK(rn.value()[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(t1.backward(sum(rn))[m].all_finite());
}

TEST_CASE("sign has zero gradient, sigmoid(0) = 0.5") {
  Tape t;
  Var x = t.leaf(vec({-2, 0, 5}));
  Var s = sign(x);
  check_near(s.value(), {-1, 0, 1});
  const Gradients g = t.backward(sum(s));
  for (double v : g[x].data()) CHECK(v == 0.0);
  Tape t2;
  CHECK(sigmoid(t2.scalar(0.0)).value().item() == 0.5);
}

TEST_CASE("elementwise shape mismatch and division by zero throw") {
  Tape t;
  Var a = t.leaf(vec({1, 2}));
  Var b = t.leaf(vec({1, 2, 3}));
  CHECK_THROWS(add(a, b));
  CHECK_THROWS(div(a, t.constant(vec({1, 0}))));
}

TEST_CASE("matmul matches a hand product and its gradients") {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  const Tensor c = linalg::matmul(a, b);
  CHECK(c == Tensor::matrix({{19, 22}, {43, 50}}));
  CHECK(linalg::matmul(a, b, true, false) == Tensor::matrix({{26, 30}, {38, 44}}));
  CHECK(linalg::matmul(a, b, false, true) == Tensor::matrix({{17, 23}, {39, 53}}));

  Tape t;
  Var va = t.leaf(a), vb = t.leaf(b);
  const Gradients g = t.backward(sum(matmul(va, vb)));
  // d sum(AB)/dA = 1 B^T, d/dB = A^T 1
  CHECK(g[va] == Tensor::matrix({{11, 15}, {11, 15}}));
  CHECK(g[vb] == Tensor::matrix({{4, 4}, {6, 6}}));
}

TEST_CASE("gradients accumulate over shared subexpressions") {
  Tape t;
  Var x = t.leaf(vec({2}));
  Var y = x * x;
  const Gradients g = t.backward(sum(y * y + y));
  // d/dx (x^4 + x^2) = 4x^3 + 2x = 36
  CHECK(g[x][0] == doctest::Approx(36.0));
}

TEST_CASE("log_softmax_rows is normalized and matches finite differences") {
  Rng rng(5);
  const Tensor z = rng.normal_tensor(Shape{3, 4}, 2.0);
  Tape t;
  Var lz = log_softmax_rows(t.constant(z));
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += std::exp(lz.value().at(i, j));
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
  const Tensor c = rng.normal_tensor(Shape{3, 4}, 1.0);
  const LossBuilder f = [&](Tape& tp, std::span<const Var> v) { return sum(log_softmax_rows(v[0]) * tp.constant(c)); };
  CHECK(max_gradient_error(f, {z}) < 1e-6);
}

TEST_CASE("property: random compositions agree with finite differences") {
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    const Tensor a = rng.uniform_tensor(Shape{3, 3}, 0.5, 2.0);
    const Tensor b = rng.normal_tensor(Shape{3, 2}, 1.0);
    const LossBuilder f = [](Tape&, std::span<const Var> v) {
      Var h = matmul(log(v[0]) + sigmoid(v[0]), v[1]);
      return mean(pow(h * h + 1.0, 0.5)) + sum(safe_l2_norm(h, 0));
    };
    CHECK(max_gradient_error(f, {a, b}) < 1e-6);
  }
}

TEST_CASE("block_left_matmul applies the same matrix to every block") {
  Rng rng(3);
  const Tensor a = rng.normal_tensor(Shape{3, 3}, 1.0);
  const Tensor x = rng.normal_tensor(Shape{6, 2}, 1.0);
  Tape t;
  const Tensor y = block_left_matmul(t.constant(a), t.constant(x), 2).value();
  for (std::size_t blk = 0; blk < 2; ++blk) {
    Tensor xb(Shape{3, 2});
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) xb.at(i, j) = x.at(blk * 3 + i, j);
    const Tensor yb = linalg::matmul(a, xb);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(y.at(blk * 3 + i, j) == doctest::Approx(yb.at(i, j)).epsilon(1e-14));
  }
}
