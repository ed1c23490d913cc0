#include "sparsegrad/linalg.hpp"

#include "sparsegrad/error.hpp"

namespace sparsegrad::linalg {

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  const std::size_t ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
  const std::size_t m = transpose_a ? ac : ar;
  const std::size_t k = transpose_a ? ar : ac;
  const std::size_t kb = transpose_b ? bc : br;
  const std::size_t n = transpose_b ? br : bc;
  if (k != kb) {
    throw ValidationError("matmul shape mismatch " + shape_str(a.shape()) + (transpose_a ? "^T" : "") + " @ " +
                          shape_str(b.shape()) + (transpose_b ? "^T" : ""));
  }
  if (transpose_a) return matmul(transpose(a), b, false, transpose_b);
  if (transpose_b) return matmul(a, transpose(b), false, false);
  Tensor out(Shape{m, n}, 0.0);
  double* __restrict o = out.data().data();
  const double* __restrict pa = a.data().data();
  const double* __restrict pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict orow = o + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* __restrict brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(Shape{c, r}, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor row_sums(const Tensor& m) {
  Tensor out(Shape{m.rows()}, 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i] += m.at(i, j);
  return out;
}

Tensor col_sums(const Tensor& m) {
  Tensor out(Shape{m.cols()}, 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += m.at(i, j);
  return out;
}

}  // namespace sparsegrad::linalg
