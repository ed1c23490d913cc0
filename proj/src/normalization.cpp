#include "sparsegrad/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparsegrad/error.hpp"
#include "sparsegrad/linalg.hpp"

namespace sparsegrad {

using namespace ad;

void AdjacencyParam::validate() const {
  if (alpha.rank() != 2 || alpha.rows() != alpha.cols()) {
    throw ValidationError("adjacency alpha must be square, got " + shape_str(alpha.shape()));
  }
  const std::size_t n = alpha.rows();
  if (beta_row.numel() != n || beta_col.numel() != n) {
    throw ValidationError("adjacency beta vectors must have " + std::to_string(n) + " entries");
  }
}

Var sparse_adjacency(Var alpha, Var beta_row, Var beta_col, GradMode grad_mode, AdjacencyForm form) {
  const std::size_t n = alpha.value().rows();
  Var gamma = form == AdjacencyForm::exponential ? exp(alpha) : alpha;
  Var strength = form == AdjacencyForm::exponential ? gamma : abs(alpha);
  Var row_thr = sigmoid(beta_row) * sum(strength, 1);
  Var col_thr = sigmoid(beta_col) * sum(strength, 0);
  Var shifted = gamma - broadcast_cols(row_thr, n) - broadcast_rows(col_thr, n);
  return threshold_relu(shifted, grad_mode);
}

StochMatrix sparse_adjacency(const AdjacencyParam& param) {
  param.validate();
  Tape tape;
  Var a = sparse_adjacency(tape.constant(param.alpha), tape.constant(param.beta_row),
                           tape.constant(param.beta_col), param.grad_mode, param.form);
  return StochMatrix{a.value(), false, false, 0};
}

double doubly_stochastic_deviation(const Tensor& m) {
  double dev = 0.0;
  const Tensor r = linalg::row_sums(m), c = linalg::col_sums(m);
  for (double s : r.data()) dev = std::max(dev, std::abs(s - 1.0));
  for (double s : c.data()) dev = std::max(dev, std::abs(s - 1.0));
  return dev;
}

namespace {

void check_supported(const Tensor& m, const char* who) {
  if (m.rank() != 2 || m.rows() != m.cols()) {
    throw ValidationError(std::string(who) + " expects a square matrix, got " + shape_str(m.shape()));
  }
  if (!m.all_finite()) throw ValidationError(std::string(who) + " input must be finite");
  for (double v : m.data()) {
    if (v < 0.0) throw ValidationError(std::string(who) + " input must be non-negative");
  }
  const Tensor r = linalg::row_sums(m), c = linalg::col_sums(m);
  for (double s : r.data()) {
    if (!(s > 0.0)) throw ValidationError("sinkhorn requires total support");
  }
  for (double s : c.data()) {
    if (!(s > 0.0)) throw ValidationError("sinkhorn requires total support");
  }
}

template <typename Sweep>
StochMatrix iterate(const Tensor& m, double tol, int max_iters, const char* who, Sweep sweep) {
  check_supported(m, who);
  if (!(tol > 0.0) || max_iters < 1) throw ValidationError(std::string(who) + ": tol must be > 0 and max-iters >= 1");
  Tensor a = m;
  double dev = doubly_stochastic_deviation(a);
  for (int it = 1; it <= max_iters; ++it) {
    sweep(a);
    dev = doubly_stochastic_deviation(a);
    if (!std::isfinite(dev)) throw NumericError(std::string(who) + " produced a non-finite value");
    if (dev < tol) return StochMatrix{std::move(a), true, true, it};
  }
  throw ConvergenceError(std::string(who) + " did not converge in " + std::to_string(max_iters) + " iterations",
                         dev);
}

}  // namespace

StochMatrix sinkhorn(const Tensor& m, double tol, int max_iters) {
  return iterate(m, tol, max_iters, "sinkhorn", [](Tensor& a) {
    const std::size_t n = a.rows();
    const Tensor r = linalg::row_sums(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a.at(i, j) /= r[i];
    const Tensor c = linalg::col_sums(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a.at(i, j) /= c[j];
  });
}

StochMatrix balanced_normalize(const Tensor& m, double tol, int max_iters) {
  return iterate(m, tol, max_iters, "balanced normalization", [](Tensor& a) {
    const std::size_t n = a.rows();
    const Tensor r = linalg::row_sums(a);
    const Tensor c = linalg::col_sums(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a.at(i, j) /= std::sqrt(r[i] * c[j]);
  });
}

std::pair<Tensor, Tensor> partial_normalize(const Tensor& m) {
  if (m.rank() != 2) throw ValidationError("partial_normalize expects a matrix");
  Tensor ar = m, ac = m;
  const Tensor r = linalg::row_sums(m);
  const Tensor c = linalg::col_sums(m);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      ar.at(i, j) = r[i] != 0.0 ? m.at(i, j) / r[i] : 0.0;
      ac.at(i, j) = c[j] != 0.0 ? m.at(i, j) / c[j] : 0.0;
    }
  }
  return {ar, ac};
}

UnrolledNorm normalize_unrolled(Var m, NormKind kind, int iterations) {
  const Tensor& v = m.value();
  if (v.rank() != 2 || v.rows() != v.cols()) throw ValidationError("normalize_unrolled expects a square matrix");
  for (double x : v.data()) {
    if (!(x >= 0.0)) throw ValidationError("normalize_unrolled input must be non-negative");
  }
  const std::size_t n = v.rows();
  Tape& tape = *m.tape();

  // Positive rescaling never changes which lines are zero, so the masks are
  // fixed for the whole unroll. Adding 1 to a zero sum leaves that line at 0/1.
  UnrolledNorm out;
  Tensor row_pad(Shape{n}, 0.0), col_pad(Shape{n}, 0.0);
  const Tensor r0 = linalg::row_sums(v), c0 = linalg::col_sums(v);
  for (std::size_t i = 0; i < n; ++i) {
    if (r0[i] == 0.0) row_pad[i] = 1.0, ++out.zero_rows;
    if (c0[i] == 0.0) col_pad[i] = 1.0, ++out.zero_cols;
  }
  Var rpad = tape.constant(row_pad), cpad = tape.constant(col_pad);

  Var a = m;
  for (int it = 0; it < iterations; ++it) {
    if (kind == NormKind::sinkhorn) {
      a = a / broadcast_cols(sum(a, 1) + rpad, n);
      a = a / broadcast_rows(sum(a, 0) + cpad, n);
    } else {
      Var rs = pow(sum(a, 1) + rpad, -0.5);
      Var cs = pow(sum(a, 0) + cpad, -0.5);
      a = a * broadcast_cols(rs, n) * broadcast_rows(cs, n);
    }
  }
  out.a = a;
  return out;
}

}  // namespace sparsegrad
