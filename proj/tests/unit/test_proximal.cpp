#include <cmath>
#include <vector>

#include "doctest.h"
#include "sparsegrad/error.hpp"
#include "sparsegrad/proximal.hpp"
#include "sparsegrad/rng.hpp"

using namespace sparsegrad;

namespace {

ProxSpec prox(ProxKind kind, double shrink, Grouping groups = {}) {
  ProxSpec s;
  s.kind = kind;
  s.lambda = shrink;
  s.eta = 1.0;
  s.groups = std::move(groups);
  return s;
}

}  // namespace

TEST_CASE("l1 soft threshold") {
  CHECK(prox_step(prox(ProxKind::l1, 0.2), Tensor::vector({0.7}))[0] == doctest::Approx(0.5));
  CHECK(prox_step(prox(ProxKind::l1, 0.2), Tensor::vector({0.1}))[0] == 0.0);
  CHECK(prox_step(prox(ProxKind::l1, 0.2), Tensor::vector({-0.9}))[0] == doctest::Approx(-0.7));
  CHECK(prox_grid_argmin(prox(ProxKind::l1, 0.2), Tensor::vector({0.7}))[0] == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("eta and lambda enter only through their product") {
  ProxSpec s = prox(ProxKind::l1, 0.0);
  s.eta = 0.5;
  s.lambda = 0.4;
  CHECK(prox_step(s, Tensor::vector({0.7}))[0] == doctest::Approx(0.5));
}

TEST_CASE("group-l21 scales whole groups") {
  const Tensor w = Tensor::vector({3, 4});
  const Tensor v = prox_step(prox(ProxKind::group_l21, 1.0), w);
  CHECK(v[0] == doctest::Approx(2.4));
  CHECK(v[1] == doctest::Approx(3.2));
  const Tensor z = prox_step(prox(ProxKind::group_l21, 6.0), w);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
  const Tensor g = prox_grid_argmin(prox(ProxKind::group_l21, 1.0), w);
  CHECK(g[0] == doctest::Approx(2.4).epsilon(2e-3));
  CHECK(g[1] == doctest::Approx(3.2).epsilon(2e-3));
}

TEST_CASE("exclusive rule: one-step form and exact minimizer") {
  const Tensor w = Tensor::vector({1.0, -0.2});
  const Tensor explicit_rule = prox_step(prox(ProxKind::exclusive_l12_explicit, 0.3), w);
  CHECK(explicit_rule[0] == doctest::Approx(0.64));
  CHECK(explicit_rule[1] == 0.0);

  // with support {0} the stationarity condition is v - 1 + 0.3 v = 0
  const Tensor exact = prox_step(prox(ProxKind::exclusive_l12, 0.3), w);
  CHECK(exact[0] == doctest::Approx(1.0 / 1.3).epsilon(1e-12));
  CHECK(exact[1] == 0.0);
  CHECK(prox_oracle_check(prox(ProxKind::exclusive_l12, 0.3), w) < 1e-3);
}

TEST_CASE("exclusive non-negative rule rejects negative input") {
  const Tensor v = prox_step(prox(ProxKind::exclusive_nonneg, 0.3), Tensor::vector({1.0, 0.2}));
  CHECK(v[0] == doctest::Approx(1.0 - 0.36));
  CHECK(v[1] == 0.0);
  CHECK_THROWS_AS(prox_step(prox(ProxKind::exclusive_nonneg, 0.3), Tensor::vector({1.0, -0.2})), ValidationError);
}

TEST_CASE("zero shrink is the identity for every kind") {
  const Tensor w = Tensor::vector({0.3, -1.2, 2.0, 0.01});
  for (ProxKind k : {ProxKind::l1, ProxKind::group_l21, ProxKind::exclusive_l12, ProxKind::exclusive_l12_explicit}) {
    CHECK(prox_step(prox(k, 0.0, {{0, 1}, {2, 3}}), w) == w);
  }
}

TEST_CASE("zeros produced by prox are +0.0") {
  const Tensor v = prox_step(prox(ProxKind::l1, 1.0), Tensor::vector({-0.5, 0.5}));
  for (double x : v.data()) CHECK(!std::signbit(x));
}

TEST_CASE("property: prox output never has a larger objective than the input or the grid") {
  Rng rng(17);
  for (ProxKind k : {ProxKind::l1, ProxKind::group_l21, ProxKind::exclusive_l12}) {
    for (int i = 0; i < 30; ++i) {
      const Tensor w = rng.normal_tensor(Shape{2}, 1.5);
      const ProxSpec s = prox(k, rng.uniform(0.05, 1.5));
      const Tensor v = prox_step(s, w);
      CHECK(prox_objective(s, v, w) <= prox_objective(s, w, w) + 1e-12);
      CHECK(prox_objective(s, v, w) <= prox_objective(s, prox_grid_argmin(s, w), w) + 1e-12);
      // shrinkage: never grows a coordinate, never flips a sign
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(std::abs(v[j]) <= std::abs(w[j]) + 1e-15);
        CHECK(v[j] * w[j] >= 0.0);
      }
    }
  }
}

TEST_CASE("groups are handled independently") {
  const Grouping g{{0, 1}, {2, 3}};
  const Tensor w = Tensor::vector({3, 4, 0.3, 0.4});
  const Tensor v = prox_step(prox(ProxKind::group_l21, 1.0, g), w);
  CHECK(v[0] == doctest::Approx(2.4));
  CHECK(v[2] == 0.0);
  CHECK(v[3] == 0.0);
}
