#pragma once

#include <cstddef>
#include <utility>

#include "sparsegrad/autodiff.hpp"
#include "sparsegrad/sparse_param.hpp"
#include "sparsegrad/tensor.hpp"

namespace sparsegrad {

// exponential: gamma = exp(alpha). linear: gamma = alpha, with l1 norms taken
// over |alpha|; used where free variables must stay proximal-friendly.
enum class AdjacencyForm { exponential, linear };

struct AdjacencyParam {
  Tensor alpha;     // N x N
  Tensor beta_row;  // N
  Tensor beta_col;  // N
  GradMode grad_mode = GradMode::exact;
  AdjacencyForm form = AdjacencyForm::exponential;

  std::size_t size() const { return alpha.rows(); }
  void validate() const;
};

struct StochMatrix {
  Tensor values;
  bool row_normalized = false;
  bool col_normalized = false;
  int iterations = 0;
};

inline constexpr double kSinkhornTol = 1e-8;
inline constexpr int kSinkhornMaxIters = 1000;
inline constexpr int kTrainingUnroll = 15;

/// A~_ij = (gamma_ij - s(br_i) ||gamma_i,:||_1 - s(bc_j) ||gamma_:,j||_1)_+
ad::Var sparse_adjacency(ad::Var alpha, ad::Var beta_row, ad::Var beta_col, GradMode grad_mode,
                         AdjacencyForm form);
StochMatrix sparse_adjacency(const AdjacencyParam& param);

/// Largest |line sum - 1| over all rows and columns.
double doubly_stochastic_deviation(const Tensor& m);

/// Alternating row and column normalization until every line sums to 1
/// within tol. Throws ValidationError on a zero line and ConvergenceError when
/// max_iters runs out.
StochMatrix sinkhorn(const Tensor& m, double tol = kSinkhornTol, int max_iters = kSinkhornMaxIters);

/// Repeated A <- D_r^{-1/2} A D_c^{-1/2}, same stopping rule and errors.
StochMatrix balanced_normalize(const Tensor& m, double tol = kSinkhornTol, int max_iters = kSinkhornMaxIters);

/// (D_r^{-1} A, A D_c^{-1}); all-zero lines stay zero.
std::pair<Tensor, Tensor> partial_normalize(const Tensor& m);

enum class NormKind { sinkhorn, balanced };

struct UnrolledNorm {
  ad::Var a;
  std::size_t zero_rows = 0;
  std::size_t zero_cols = 0;
};

/// Fixed number of differentiable normalization sweeps. All-zero rows and
/// columns are left at zero and counted.
UnrolledNorm normalize_unrolled(ad::Var m, NormKind kind, int iterations = kTrainingUnroll);

}  // namespace sparsegrad
