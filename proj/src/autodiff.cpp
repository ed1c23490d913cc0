#include "sparsegrad/autodiff.hpp"

#include <cmath>
#include <string>

#include "sparsegrad/error.hpp"
#include "sparsegrad/linalg.hpp"

namespace sparsegrad::ad {

namespace {

using Grads = std::vector<std::optional<Tensor>>;

Tape& tape_of(Var a) {
  if (!a.valid()) throw ValidationError("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (&tape_of(b) != &t) throw ValidationError("operands recorded on different tapes");
  return t;
}

enum class Bcast { none, left_scalar, right_scalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() == b.shape()) return Bcast::none;
  if (a.numel() == 1) return Bcast::left_scalar;
  if (b.numel() == 1) return Bcast::right_scalar;
  throw ValidationError("shape mismatch in " + std::string(op) + ": " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
}

// f(x, y) elementwise with scalar broadcast; dx/dy give the partials given (x, y, out).
template <class F, class Dx, class Dy>
Var binary(std::string_view op, Var a, Var b, F f, Dx dx, Dy dy) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Bcast bc = broadcast_kind(x, y, op);
  const Shape out_shape = bc == Bcast::left_scalar ? y.shape() : x.shape();
  const std::size_t n = shape_numel(out_shape);
  Tensor out(out_shape, 0.0);
  const std::size_t sx = bc == Bcast::left_scalar ? 0 : 1;
  const std::size_t sy = bc == Bcast::right_scalar ? 0 : 1;
  for (std::size_t i = 0; i < n; ++i) out[i] = f(x[i * sx], y[i * sy]);
  return t.record(op, std::move(out), {a, b}, [&x, &y, sx, sy, n, dx, dy](const Tensor& g, const Tensor& o) {
    Tensor gx = Tensor::zeros_like(x);
    Tensor gy = Tensor::zeros_like(y);
    for (std::size_t i = 0; i < n; ++i) {
      gx[i * sx] += g[i] * dx(x[i * sx], y[i * sy], o[i]);
      gy[i * sy] += g[i] * dy(x[i * sx], y[i * sy], o[i]);
    }
    return Grads{std::move(gx), std::move(gy)};
  });
}

template <class F, class D>
Var unary(std::string_view op, Var a, F f, D d) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape(), 0.0);
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
  return t.record(op, std::move(out), {a}, [&x, d](const Tensor& g, const Tensor& o) {
    Tensor gx(x.shape(), 0.0);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] = g[i] * d(x[i], o[i]);
    return Grads{std::move(gx)};
  });
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

// Reduce a rank <= 2 tensor along `axis`; result drops that axis.
Shape reduced_shape(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ValidationError("reduction axis out of range for shape " + shape_str(s));
  Shape r;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) r.push_back(s[i]);
  return r;
}

void require_rank_le2(const Tensor& x, std::string_view op) {
  if (x.rank() > 2) throw ValidationError(std::string(op) + " supports rank <= 2, got " + shape_str(x.shape()));
}

// Index of x's element (flat i) within the reduction output along axis.
std::size_t reduced_index(const Shape& s, std::size_t i, std::size_t axis) {
  if (s.size() == 1) return 0;
  const std::size_t c = s[1];
  return axis == 0 ? i % c : i / c;
}

}  // namespace

// --- Var / Tape -------------------------------------------------------------

const Tensor& Var::value() const {
  if (!tape_) throw ValidationError("value() on an unbound Var");
  return tape_->node(id_).value;
}

Var Tape::leaf(Tensor value) {
  if (!value.all_finite()) throw ValidationError("leaf tensor contains non-finite values");
  TapeNode n;
  n.op = "leaf";
  n.value = std::move(value);
  n.is_leaf = true;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  TapeNode n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward,
                 GradRule rule) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward),
                rule);
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn backward,
                 GradRule rule) {
  TapeNode n;
  n.op = op;
  n.value = std::move(value);
  n.rule = rule;
  n.backward = std::move(backward);
  for (Var v : inputs) {
    if (v.tape() != this) throw ValidationError("input recorded on a different tape");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var root) const {
  if (root.tape() != this) throw ValidationError("backward root belongs to another tape");
  const TapeNode& r = nodes_.at(root.id());
  if (r.value.numel() != 1) throw ValidationError("backward requires scalar root");

  Gradients out;
  out.grads_.resize(nodes_.size());
  auto& g = out.grads_;
  g[root.id()] = Tensor::ones_like(r.value);

  for (std::size_t i = root.id() + 1; i-- > 0;) {
    if (!g[i]) continue;
    const TapeNode& node = nodes_[i];
    if (node.is_leaf) continue;
    if (!node.requires_grad || !node.backward) {
      g[i].reset();
      continue;
    }
    Grads in = node.backward(*g[i], node.value);
    for (std::size_t k = 0; k < node.inputs.size() && k < in.size(); ++k) {
      if (!in[k]) continue;
      const std::size_t src = node.inputs[k];
      if (!nodes_[src].requires_grad) continue;
      if (g[src]) {
        g[src] = elementwise_add(*g[src], *in[k]);
      } else {
        g[src] = std::move(in[k]);
      }
    }
    g[i].reset();
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf && !g[i]) g[i] = Tensor::zeros_like(nodes_[i].value);
    if (!nodes_[i].is_leaf) g[i].reset();
  }
  return out;
}

const Tensor& Gradients::of(Var leaf) const {
  if (leaf.id() >= grads_.size() || !grads_[leaf.id()]) {
    throw ValidationError("gradient requested for a node that is not a leaf of this tape");
  }
  return *grads_[leaf.id()];
}

// --- elementwise ------------------------------------------------------------

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Var div(Var a, Var b) {
  for (double d : b.value().data()) {
    if (d == 0.0) throw NumericError("division by zero");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Var neg(Var a) {
  return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var add_scalar(Var a, double c) {
  return unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var scale(Var a, double c) {
  return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var exp(Var x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double o) { return o; });
}

Var log(Var x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) throw NumericError("log of non-positive value");
  }
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var abs(Var x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var sign(Var x) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  Tensor out(v.shape(), 0.0);
  for (std::size_t i = 0; i < v.numel(); ++i) out[i] = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
  return t.record("sign", std::move(out), {x}, [](const Tensor&, const Tensor&) { return Grads{std::nullopt}; });
}

Var sigmoid(Var x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double o) { return o * (1.0 - o); });
}

Var sqrt(Var x) {
  for (double v : x.value().data()) {
    if (v < 0.0) throw NumericError("sqrt of negative value");
  }
  return unary("sqrt", x, [](double v) { return std::sqrt(v); }, [](double, double o) { return 0.5 / o; });
}

Var pow(Var x, double p) {
  for (double v : x.value().data()) {
    if (!(v > 0.0 || (p >= 1.0 && v >= 0.0))) {
      throw ValidationError("pow requires positive base for exponent " + std::to_string(p));
    }
  }
  return unary(
      "pow", x, [p](double v) { return std::pow(v, p); }, [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

Var relu(Var x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var custom_unary(std::string_view op, Var x, Tensor value,
                 std::function<Tensor(const Tensor& x, const Tensor& upstream)> grad) {
  Tape& t = tape_of(x);
  const Tensor& in = x.value();
  return t.record(
      op, std::move(value), {x},
      [&in, grad = std::move(grad)](const Tensor& g, const Tensor&) { return Grads{grad(in, g)}; },
      GradRule::custom);
}

Var rgf_relu(Var x) {
  const Tensor& v = x.value();
  Tensor out(v.shape(), 0.0);
  for (std::size_t i = 0; i < v.numel(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return custom_unary("rgf_relu", x, std::move(out), [](const Tensor& in, const Tensor& g) {
    Tensor gx(in.shape(), 0.0);
    for (std::size_t i = 0; i < in.numel(); ++i) {
      gx[i] = g[i] * (in[i] >= 0.0 ? 1.0 : kEluAlpha * std::exp(in[i]));
    }
    return gx;
  });
}

Var safe_l2_norm(Var x, std::optional<std::size_t> axis) {
  const Tensor& v = x.value();
  require_rank_le2(v, "safe_l2_norm");
  if (!axis) {
    double s = 0.0;
    for (double e : v.data()) s += e * e;
    return custom_unary("safe_l2_norm", x, Tensor::scalar(std::sqrt(s)), [](const Tensor& in, const Tensor& g) {
      double s2 = 0.0;
      for (double e : in.data()) s2 += e * e;
      const double denom = std::sqrt(s2) + kSafeNormEps;
      Tensor gx(in.shape(), 0.0);
      for (std::size_t i = 0; i < in.numel(); ++i) gx[i] = g[0] * in[i] / denom;
      return gx;
    });
  }
  const std::size_t ax = *axis;
  Shape rs = reduced_shape(v.shape(), ax);
  Tensor sq(rs, 0.0);
  for (std::size_t i = 0; i < v.numel(); ++i) sq[reduced_index(v.shape(), i, ax)] += v[i] * v[i];
  for (std::size_t i = 0; i < sq.numel(); ++i) sq[i] = std::sqrt(sq[i]);
  return custom_unary("safe_l2_norm", x, sq, [ax, norms = sq](const Tensor& in, const Tensor& g) {
    Tensor gx(in.shape(), 0.0);
    for (std::size_t i = 0; i < in.numel(); ++i) {
      const std::size_t r = reduced_index(in.shape(), i, ax);
      gx[i] = g[r] * in[i] / (norms[r] + kSafeNormEps);
    }
    return gx;
  });
}

// --- structural -------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out = linalg::matmul(x, y);
  return t.record("matmul", std::move(out), {a, b}, [&x, &y](const Tensor& g, const Tensor&) {
    return Grads{linalg::matmul(g, y, false, true), linalg::matmul(x, g, true, false)};
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.record("transpose", linalg::transpose(a.value()), {a},
                  [](const Tensor& g, const Tensor&) { return Grads{linalg::transpose(g)}; });
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a);
  const Shape orig = a.value().shape();
  return t.record("reshape", a.value().reshaped(std::move(shape)), {a},
                  [orig](const Tensor& g, const Tensor&) { return Grads{g.reshaped(orig)}; });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ValidationError("concat of zero tensors");
  Tape& t = tape_of(parts.front());
  const std::size_t rank = parts.front().value().rank();
  if (rank == 0 || rank > 2 || axis >= rank) throw ValidationError("concat supports vectors and matrices");
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    if (&tape_of(p) != &t) throw ValidationError("concat operands on different tapes");
    if (v.rank() != rank) throw ValidationError("concat rank mismatch");
    if (rank == 2 && v.dim(1 - axis) != parts.front().value().dim(1 - axis)) {
      throw ValidationError("concat shape mismatch " + shape_str(v.shape()));
    }
    extents.push_back(v.dim(axis));
    total += v.dim(axis);
  }
  Tensor out;
  if (rank == 1) {
    std::vector<double> d;
    d.reserve(total);
    for (Var p : parts) d.insert(d.end(), p.value().data().begin(), p.value().data().end());
    out = Tensor::vector(std::move(d));
  } else if (axis == 0) {
    const std::size_t c = parts.front().value().cols();
    std::vector<double> d;
    d.reserve(total * c);
    for (Var p : parts) d.insert(d.end(), p.value().data().begin(), p.value().data().end());
    out = Tensor::matrix(total, c, std::move(d));
  } else {
    const std::size_t r = parts.front().value().rows();
    out = Tensor(Shape{r, total}, 0.0);
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor& v = p.value();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < v.cols(); ++j) out.at(i, off + j) = v.at(i, j);
      off += v.cols();
    }
  }
  std::vector<Shape> shapes;
  for (Var p : parts) shapes.push_back(p.value().shape());
  return t.record("concat", std::move(out), parts, [shapes, rank, axis](const Tensor& g, const Tensor&) {
    Grads res;
    std::size_t off = 0;
    for (const Shape& s : shapes) {
      Tensor gi(s, 0.0);
      if (rank == 1 || axis == 0) {
        for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] = g[off + i];
        off += gi.numel();
      } else {
        const std::size_t total = g.cols();
        for (std::size_t i = 0; i < s[0]; ++i)
          for (std::size_t j = 0; j < s[1]; ++j) gi.at(i, j) = g[i * total + off + j];
        off += s[1];
      }
      res.emplace_back(std::move(gi));
    }
    return res;
  });
}

Var gather(Var x, std::vector<std::size_t> indices) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  std::vector<double> d;
  d.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= v.numel()) throw ValidationError("gather index " + std::to_string(i) + " out of range");
    d.push_back(v[i]);
  }
  return t.record("gather", Tensor::vector(std::move(d)), {x},
                  [shape = v.shape(), idx = std::move(indices)](const Tensor& g, const Tensor&) {
                    Tensor gx(shape, 0.0);
                    for (std::size_t k = 0; k < idx.size(); ++k) gx[idx[k]] += g[k];
                    return Grads{std::move(gx)};
                  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  if (begin > end || end > v.cols()) throw ValidationError("slice_cols range out of bounds");
  const std::size_t r = v.rows(), w = end - begin;
  Tensor out(Shape{r, w}, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = v.at(i, begin + j);
  return t.record("slice_cols", std::move(out), {x}, [shape = v.shape(), begin, w](const Tensor& g, const Tensor&) {
    Tensor gx(shape, 0.0);
    for (std::size_t i = 0; i < shape[0]; ++i)
      for (std::size_t j = 0; j < w; ++j) gx.at(i, begin + j) = g.at(i, j);
    return Grads{std::move(gx)};
  });
}

Var broadcast_rows(Var v, std::size_t n) {
  Tape& t = tape_of(v);
  const Tensor& x = v.value();
  if (x.rank() != 1) throw ValidationError("broadcast_rows expects a vector");
  const std::size_t c = x.numel();
  Tensor out(Shape{n, c}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = x[j];
  return t.record("broadcast_rows", std::move(out), {v},
                  [](const Tensor& g, const Tensor&) { return Grads{linalg::col_sums(g)}; });
}

Var broadcast_cols(Var v, std::size_t m) {
  Tape& t = tape_of(v);
  const Tensor& x = v.value();
  if (x.rank() != 1) throw ValidationError("broadcast_cols expects a vector");
  const std::size_t r = x.numel();
  Tensor out(Shape{r, m}, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) = x[i];
  return t.record("broadcast_cols", std::move(out), {v},
                  [](const Tensor& g, const Tensor&) { return Grads{linalg::row_sums(g)}; });
}

Var block_left_matmul(Var a, Var x, std::size_t blocks) {
  Tape& t = tape_of(a, x);
  const Tensor& A = a.value();
  const Tensor& X = x.value();
  const std::size_t n = A.rows();
  if (A.cols() != n) throw ValidationError("block_left_matmul expects a square left operand");
  if (blocks == 0 || X.rows() != blocks * n) {
    throw ValidationError("block_left_matmul: " + shape_str(X.shape()) + " is not " + std::to_string(blocks) +
                          " blocks of " + std::to_string(n) + " rows");
  }
  const std::size_t f = X.cols();
  Tensor out(X.shape(), 0.0);
  {
    const double* __restrict pa = A.data().data();
    const double* __restrict px = X.data().data();
    double* __restrict po = out.data().data();
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t i = 0; i < n; ++i) {
        double* __restrict orow = po + (b * n + i) * f;
        for (std::size_t p = 0; p < n; ++p) {
          const double av = pa[i * n + p];
          const double* __restrict xrow = px + (b * n + p) * f;
          for (std::size_t j = 0; j < f; ++j) orow[j] += av * xrow[j];
        }
      }
  }
  return t.record("block_left_matmul", std::move(out), {a, x}, [&A, &X, blocks, n, f](const Tensor& g, const Tensor&) {
    Tensor gA(A.shape(), 0.0), gX(X.shape(), 0.0);
    const double* __restrict pa = A.data().data();
    const double* __restrict px = X.data().data();
    const double* __restrict pg = g.data().data();
    double* __restrict pga = gA.data().data();
    double* __restrict pgx = gX.data().data();
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t i = 0; i < n; ++i) {
        const double* __restrict grow = pg + (b * n + i) * f;
        for (std::size_t p = 0; p < n; ++p) {
          const double* __restrict xrow = px + (b * n + p) * f;
          double* __restrict gxrow = pgx + (b * n + p) * f;
          const double av = pa[i * n + p];
          double acc = 0.0;
          for (std::size_t j = 0; j < f; ++j) {
            acc += grow[j] * xrow[j];
            gxrow[j] += av * grow[j];
          }
          pga[i * n + p] += acc;
        }
      }
    return Grads{std::move(gA), std::move(gX)};
  });
}

// --- reductions -------------------------------------------------------------

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return t.record("sum", Tensor::scalar(s), {x}, [shape = x.value().shape()](const Tensor& g, const Tensor&) {
    return Grads{Tensor(shape, g[0])};
  });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw ValidationError("add_n of zero terms");
  Tape& t = tape_of(terms.front());
  Tensor out = terms.front().value();
  for (std::size_t k = 1; k < terms.size(); ++k) {
    const Tensor& v = terms[k].value();
    if (&tape_of(terms[k]) != &t) throw ValidationError("add_n operands on different tapes");
    if (v.shape() != out.shape()) throw ValidationError("add_n shape mismatch");
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += v[i];
  }
  const std::size_t n = terms.size();
  return t.record("add_n", std::move(out), terms, [n](const Tensor& g, const Tensor&) { return Grads(n, g); });
}

Var sum(Var x, std::size_t axis) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  require_rank_le2(v, "sum");
  Tensor out(reduced_shape(v.shape(), axis), 0.0);
  for (std::size_t i = 0; i < v.numel(); ++i) out[reduced_index(v.shape(), i, axis)] += v[i];
  return t.record("sum_axis", std::move(out), {x}, [shape = v.shape(), axis](const Tensor& g, const Tensor&) {
    Tensor gx(shape, 0.0);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = g[reduced_index(shape, i, axis)];
    return Grads{std::move(gx)};
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().numel())); }

Var mean(Var x, std::size_t axis) {
  const double n = static_cast<double>(x.value().dim(axis));
  return scale(sum(x, axis), 1.0 / n);
}

Var log_softmax_rows(Var logits) {
  Tape& t = tape_of(logits);
  const Tensor& z = logits.value();
  const std::size_t r = z.rows(), c = z.cols();
  Tensor out(z.shape(), 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double m = z.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, z.at(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(z.at(i, j) - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = z.at(i, j) - lse;
  }
  return t.record("log_softmax_rows", std::move(out), {logits}, [r, c](const Tensor& g, const Tensor& o) {
    Tensor gz(o.shape(), 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += g.at(i, j);
      for (std::size_t j = 0; j < c; ++j) gz.at(i, j) = g.at(i, j) - std::exp(o.at(i, j)) * gs;
    }
    return Grads{std::move(gz)};
  });
}

}  // namespace sparsegrad::ad
