#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "sparsegrad/error.hpp"
#include "sparsegrad/gradcheck.hpp"
#include "sparsegrad/linalg.hpp"
#include "sparsegrad/normalization.hpp"
#include "sparsegrad/rng.hpp"

using namespace sparsegrad;

namespace {

double logit(double s) { return std::log(s / (1.0 - s)); }

// Plain alternating row/column scaling for a fixed number of sweeps.
Tensor brute_sinkhorn(Tensor m, int sweeps) {
  const std::size_t n = m.rows();
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0;
      for (std::size_t j = 0; j < n; ++j) r += m.at(i, j);
      for (std::size_t j = 0; j < n; ++j) m.at(i, j) /= r;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += m.at(i, j);
      for (std::size_t i = 0; i < n; ++i) m.at(i, j) /= c;
    }
  }
  return m;
}

}  // namespace

TEST_CASE("sparse adjacency thresholds every entry by its row and column") {
  AdjacencyParam p;
  p.alpha = Tensor(Shape{2, 2}, 0.0);
  p.beta_row = Tensor(Shape{2}, logit(0.1));
  p.beta_col = Tensor(Shape{2}, logit(0.1));
  const StochMatrix a = sparse_adjacency(p);
  for (double v : a.values.data()) CHECK(v == doctest::Approx(0.6).epsilon(1e-12));

  p.beta_row = Tensor(Shape{2}, -800.0);
  p.beta_col = Tensor(Shape{2}, -800.0);
  const StochMatrix open = sparse_adjacency(p);
  for (double v : open.values.data()) CHECK(v == 1.0);
}

TEST_CASE("a dominant diagonal survives and off-diagonals are cut") {
  AdjacencyParam p;
  p.alpha = Tensor(Shape{3, 3}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) p.alpha.at(i, i) = 3.0;
  p.beta_row = Tensor(Shape{3}, logit(0.2));
  p.beta_col = Tensor(Shape{3}, logit(0.2));
  const Tensor a = sparse_adjacency(p).values;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) CHECK(a.at(i, j) > 0.0);
      else CHECK(a.at(i, j) == 0.0);
    }
}

TEST_CASE("sinkhorn fixed points and symmetric inputs") {
  CHECK(max_abs_diff(sinkhorn(Tensor::identity(4)).values, Tensor::identity(4)) < 1e-15);
  const Tensor half = sinkhorn(Tensor::matrix({{1, 1}, {1, 1}})).values;
  for (double v : half.data()) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("sinkhorn on [[2,1],[1,2]] agrees with a long brute-force run") {
  const Tensor m = Tensor::matrix({{2, 1}, {1, 2}});
  const StochMatrix s = sinkhorn(m);
  CHECK(doubly_stochastic_deviation(s.values) < 1e-8);
  CHECK(max_abs_diff(s.values, brute_sinkhorn(m, 10000)) < 1e-8);
  CHECK(s.values.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("sinkhorn needs total support and reports non-convergence") {
  CHECK_THROWS_WITH_AS(sinkhorn(Tensor::matrix({{1, 1}, {0, 0}})), doctest::Contains("total support"), ValidationError);
  Rng rng(1);
  const Tensor m = rng.uniform_tensor(Shape{6, 6}, 0.01, 10.0);
  CHECK_THROWS_AS(sinkhorn(m, 1e-14, 2), NumericError);
}

TEST_CASE("balanced normalization") {
  CHECK(max_abs_diff(balanced_normalize(Tensor::identity(3)).values, Tensor::identity(3)) < 1e-15);
  const StochMatrix ones = balanced_normalize(Tensor::matrix({{1, 1}, {1, 1}}));
  for (double v : ones.values.data()) CHECK(v == doctest::Approx(0.5));

  Rng rng(9);
  const Tensor m = rng.uniform_tensor(Shape{5, 5}, 0.1, 2.0);
  const StochMatrix b = balanced_normalize(m);
  const Tensor r = linalg::row_sums(b.values), c = linalg::col_sums(b.values);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(r[i] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(c[i] == doctest::Approx(1.0).epsilon(1e-6));
  }
  // Both normalizers find the unique D1 M D2 scaling for a positive matrix.
  MESSAGE("balanced vs sinkhorn max diff: " << max_abs_diff(b.values, sinkhorn(m).values));
}

TEST_CASE("partial normalization") {
  const auto [ar, ac] = partial_normalize(Tensor::matrix({{2, 2, 0}, {0, 0, 0}, {1, 0, 3}}));
  CHECK(ar.at(0, 0) == 0.5);
  CHECK(ar.at(0, 1) == 0.5);
  CHECK(ar.at(0, 2) == 0.0);
  for (std::size_t j = 0; j < 3; ++j) CHECK(ar.at(1, j) == 0.0);
  CHECK(ac.at(0, 0) == doctest::Approx(2.0 / 3.0));

  const Tensor ds = sinkhorn(Tensor::matrix({{2, 1}, {1, 2}})).values;
  const auto [dr, dc] = partial_normalize(ds);
  CHECK(max_abs_diff(dr, ds) < 1e-8);
  CHECK(max_abs_diff(dc, ds) < 1e-8);
}

TEST_CASE("gradient through five unrolled sinkhorn sweeps matches finite differences") {
  Rng rng(33);
  const Tensor m = rng.uniform_tensor(Shape{3, 3}, 0.2, 2.0);
  const Tensor c = rng.normal_tensor(Shape{3, 3}, 1.0);
  for (NormKind kind : {NormKind::sinkhorn, NormKind::balanced}) {
    const ad::LossBuilder f = [&](ad::Tape& t, std::span<const ad::Var> v) {
      return ad::sum(normalize_unrolled(v[0], kind, 5).a * t.constant(c));
    };
    const std::vector<Tensor> g = ad::autodiff_gradient(f, {m});
    const std::vector<Tensor> fd = ad::finite_difference_gradient(f, {m});
    double worst = 0.0;
    for (std::size_t i = 0; i < 9; ++i) worst = std::max(worst, std::abs(g[0][i] - fd[0][i]) / std::abs(fd[0][i]));
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("unrolled normalization leaves zero lines at zero") {
  ad::Tape t;
  const Tensor m = Tensor::matrix({{1, 2, 0}, {0, 0, 0}, {3, 1, 0}});
  const UnrolledNorm u = normalize_unrolled(t.constant(m), NormKind::sinkhorn);
  CHECK(u.zero_rows == 1);
  CHECK(u.zero_cols == 1);
  CHECK(u.a.value().all_finite());
  for (std::size_t j = 0; j < 3; ++j) CHECK(u.a.value().at(1, j) == 0.0);
}

TEST_CASE("property: sinkhorn is invariant to positive row and column scaling") {
  Rng rng(12);
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 2 + rng.index(7);
    const Tensor m = rng.uniform_tensor(Shape{n, n}, 0.05, 3.0);
    Tensor scaled = m;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = rng.uniform(0.1, 10.0);
      for (std::size_t j = 0; j < n; ++j) scaled.at(i, j) *= r;
    }
    const StochMatrix a = sinkhorn(m), b = sinkhorn(scaled);
    CHECK(doubly_stochastic_deviation(a.values) < 1e-8);
    CHECK(max_abs_diff(a.values, b.values) < 1e-7);
  }
}
