#pragma once

#include <string>

#include "sparsegrad/regularizers.hpp"
#include "sparsegrad/tensor.hpp"

namespace sparsegrad {

enum class ProxKind {
  l1,                      // sign(w)(|w| - t)_+
  group_l21,               // ((||w_g|| - t) / ||w_g||)_+ w_g
  exclusive_l12,           // exact minimizer for 1/2 sum_g ||v_g||_1^2
  exclusive_l12_explicit,  // sign(w)(|w| - t ||w_g||_1)_+, the one-step rule used by baselines
  exclusive_nonneg,        // (w - t ||w_g||_1)_+ on non-negative free variables
};

std::string to_string(ProxKind kind);
ProxKind prox_kind_from_string(const std::string& s);

struct ProxSpec {
  ProxKind kind = ProxKind::l1;
  double lambda = 0.0;
  double eta = 1.0;
  Grouping groups;  // empty: one group

  double shrink() const noexcept { return eta * lambda; }
  void validate(std::size_t n) const;
};

/// One proximal update with threshold t = eta * lambda.
Tensor prox_step(const ProxSpec& spec, const Tensor& w);

/// 1/2 ||v - w||^2 + t R(v) for the penalty matching `spec.kind`
/// (+inf outside the feasible set of exclusive_nonneg).
double prox_objective(const ProxSpec& spec, const Tensor& v, const Tensor& w);

/// Brute-force argmin of prox_objective by dense grid search with local
/// refinement. Supports 1- and 2-element inputs.
Tensor prox_grid_argmin(const ProxSpec& spec, const Tensor& w);

/// Max deviation between prox_step and the grid argmin.
double prox_oracle_check(const ProxSpec& spec, const Tensor& w);

}  // namespace sparsegrad
