#pragma once

#include "sparsegrad/tensor.hpp"

// Plain tensor kernels shared by the tape ops and the tape-free inference paths.
namespace sparsegrad::linalg {

/// op(a) @ op(b) where op transposes when the flag is set. Rank-2 only.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);
Tensor transpose(const Tensor& a);
/// Per-row sums of a matrix.
Tensor row_sums(const Tensor& m);
/// Per-column sums of a matrix.
Tensor col_sums(const Tensor& m);

}  // namespace sparsegrad::linalg
