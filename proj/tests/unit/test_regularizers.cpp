#include <cmath>
#include <vector>

#include "doctest.h"
#include "sparsegrad/error.hpp"
#include "sparsegrad/regularizers.hpp"
#include "sparsegrad/rng.hpp"

using namespace sparsegrad;

namespace {

RegularizerSpec spec(RegKind kind, Grouping groups = {}, double p = 1.0) {
  RegularizerSpec s;
  s.kind = kind;
  s.lambda = 1.0;
  s.groups = std::move(groups);
  s.p = p;
  return s;
}

Tensor grad_of(const RegularizerSpec& s, const Tensor& a) {
  ad::Tape t;
  ad::Var v = t.leaf(a);
  return t.backward(penalty(s, v))[v];
}

}  // namespace

TEST_CASE("penalty values on hand examples") {
  CHECK(penalty_value(spec(RegKind::l1), Tensor::vector({0.5, -0.5, 0.0})) == doctest::Approx(1.0));
  CHECK(penalty_value(spec(RegKind::group_l21, {{0, 1}, {2, 3}}), Tensor::vector({3, 4, 0, 0})) ==
        doctest::Approx(5.0).epsilon(1e-12));
  CHECK(penalty_value(spec(RegKind::exclusive_l12), Tensor::vector({1, 2})) == doctest::Approx(4.5));
  CHECK(penalty_value(spec(RegKind::lp, {}, 0.5), Tensor::vector({0.25, 0.25})) == doctest::Approx(1.0));
}

TEST_CASE("group-l21 has a finite gradient on an all-zero group") {
  const Tensor g = grad_of(spec(RegKind::group_l21, {{0, 1}, {2, 3}}), Tensor::vector({3, 4, 0, 0}));
  CHECK(g.all_finite());
  CHECK(g[0] == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(g[1] == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("penalty gradients on hand examples") {
  const Tensor l1 = grad_of(spec(RegKind::l1), Tensor::vector({0.5, -0.7}));
  CHECK(l1[0] == 1.0);
  CHECK(l1[1] == -1.0);
  const Tensor ex = grad_of(spec(RegKind::exclusive_l12), Tensor::vector({1, 2}));
  CHECK(ex[0] == doctest::Approx(3.0));
  CHECK(ex[1] == doctest::Approx(3.0));
  // d/da_i (sum sqrt(a))^2 = (sum sqrt(a)) / sqrt(a_i) = 1 / 0.5
  const Tensor lp = grad_of(spec(RegKind::lp, {}, 0.5), Tensor::vector({0.25, 0.25}));
  CHECK(lp[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(penalty_gradient_check(spec(RegKind::lp, {}, 0.5), Tensor::vector({0.25, 0.25})) < 1e-6);
  CHECK(penalty_gradient_check(spec(RegKind::l1), Tensor::vector({0.5, -0.7})) < 1e-6);
}

TEST_CASE("lp ignores exact zeros and rejects negative gates") {
  const RegularizerSpec s = spec(RegKind::lp, {{0, 1, 2}}, 0.5);
  CHECK(penalty_value(s, Tensor::vector({0.25, 0.0, 0.25})) == doctest::Approx(1.0));
  CHECK(grad_of(s, Tensor::vector({0.25, 0.0, 0.25})).all_finite());
  CHECK_THROWS_AS(penalty_value(s, Tensor::vector({0.25, -0.1, 0.25})), ValidationError);
}

TEST_CASE("gradient check refuses points at a kink") {
  CHECK_THROWS_AS(penalty_gradient_check(spec(RegKind::l1), Tensor::vector({0.5, 0.0})), ValidationError);
}

TEST_CASE("bad groupings and lambda are rejected") {
  CHECK_THROWS_AS(penalty_value(spec(RegKind::group_l21, {{0}, {}}), Tensor::vector({1, 2})), ValidationError);
  CHECK_THROWS_AS(penalty_value(spec(RegKind::group_l21, {{0, 1}, {1}}), Tensor::vector({1, 2})), ValidationError);
  RegularizerSpec s = spec(RegKind::l1);
  s.lambda = -1.0;
  CHECK_THROWS_AS(s.validate(2), ValidationError);
  CHECK_THROWS_AS(spec(RegKind::lp, {}, 1.5).validate(2), ValidationError);
}

TEST_CASE("row and column groupings partition a matrix") {
  const Grouping r = row_groups(2, 3), c = col_groups(2, 3);
  CHECK(r == Grouping{{0, 1, 2}, {3, 4, 5}});
  CHECK(c == Grouping{{0, 3}, {1, 4}, {2, 5}});
}

TEST_CASE("weighted penalty scales by lambda") {
  RegularizerSpec s = spec(RegKind::exclusive_l12);
  s.lambda = 0.3;
  ad::Tape t;
  CHECK(weighted_penalty(s, t.constant(Tensor::vector({1, 2}))).value().item() == doctest::Approx(1.35));
}

TEST_CASE("property: norms are absolutely homogeneous") {
  Rng rng(4);
  for (int k = 0; k < 25; ++k) {
    const Tensor a = rng.uniform_tensor(Shape{6}, 0.05, 2.0);
    const double s = rng.uniform(0.1, 5.0);
    Tensor sa = a;
    for (double& v : sa.data()) v *= s;
    const Grouping g{{0, 1, 2}, {3, 4, 5}};
    CHECK(penalty_value(spec(RegKind::l1), sa) == doctest::Approx(s * penalty_value(spec(RegKind::l1), a)));
    CHECK(penalty_value(spec(RegKind::group_l21, g), sa) ==
          doctest::Approx(s * penalty_value(spec(RegKind::group_l21, g), a)));
    CHECK(penalty_value(spec(RegKind::exclusive_l12, g), sa) ==
          doctest::Approx(s * s * penalty_value(spec(RegKind::exclusive_l12, g), a)));
    CHECK(penalty_value(spec(RegKind::lp, g, 0.5), sa) ==
          doctest::Approx(s * penalty_value(spec(RegKind::lp, g, 0.5), a)));
    CHECK(penalty_gradient_check(spec(RegKind::lp, g, 0.5), a) < 1e-5);
    CHECK(penalty_gradient_check(spec(RegKind::exclusive_l12, g), a) < 1e-5);
  }
}
