#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sparsegrad/autodiff.hpp"

namespace sparsegrad {

enum class RegKind { l1, group_l21, exclusive_l12, lp };

std::string to_string(RegKind kind);
RegKind reg_kind_from_string(const std::string& s);

using Grouping = std::vector<std::vector<std::size_t>>;

/// Groups must be non-empty, disjoint, and cover every index. An empty
/// grouping means one group holding everything.
struct RegularizerSpec {
  RegKind kind = RegKind::l1;
  double p = 1.0;  // lp only, in (0, 1]
  double lambda = 0.0;
  Grouping groups;

  void validate(std::size_t n) const;
};

Grouping single_group(std::size_t n);
/// Rows (or columns) of an r x c matrix stored row-major.
Grouping row_groups(std::size_t r, std::size_t c);
Grouping col_groups(std::size_t r, std::size_t c);

/// R(a):
///   l1            sum |a_i|
///   group_l21     sum_g ||a_g||_2          (safe_l2_norm per group)
///   exclusive_l12 1/2 sum_g (sum_i |a_gi|)^2
///   lp            sum_g (sum_i a_gi^p)^(1/p), exact zeros excluded
ad::Var penalty(const RegularizerSpec& spec, ad::Var a);

/// lambda * R(a).
ad::Var weighted_penalty(const RegularizerSpec& spec, ad::Var a);

double penalty_value(const RegularizerSpec& spec, const Tensor& a);

/// Max relative error of the penalty gradient against central differences.
/// Inputs must sit at least 1e-3 away from every kink.
double penalty_gradient_check(const RegularizerSpec& spec, const Tensor& a);

}  // namespace sparsegrad
