#pragma once

#include <vector>

#include "sparsegrad/autodiff.hpp"
#include "sparsegrad/tensor.hpp"

namespace sparsegrad {

/// mean |pred - target| / target. Every target must be > 0.
double mre(const Tensor& pred, const Tensor& target);
ad::Var mre_loss(ad::Var pred, const Tensor& target);
inline double mape(const Tensor& pred, const Tensor& target) { return 100.0 * mre(pred, target); }

/// (1 / 2N) sum_ij [(A^r + A^c) o M^k]_ij with M^k from hop distances.
/// Computed line by line as the share of each row's (column's) mass that
/// falls inside the mask, so a matrix supported inside M^k scores exactly 1.
double relationship_score(const Tensor& a, int k, const std::vector<std::vector<int>>& geodesic);

/// Fraction of entries that are exactly 0.0.
double zero_fraction(const Tensor& t);
std::size_t nonzero_count(const Tensor& t);

}  // namespace sparsegrad
