#pragma once

// Define-by-run reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation of one forward pass. Nodes are appended in
// evaluation order, so walking the node list backwards is a valid reverse
// topological order and every node is visited exactly once. Ops that need a
// backward pass different from their true derivative (straight-through style
// estimators, numerically guarded norms) are recorded with GradRule::custom.

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sparsegrad/tensor.hpp"

namespace sparsegrad::ad {

/// elu alpha used by the backward pass of rgf_relu.
inline constexpr double kEluAlpha = 0.1;
/// Stabilizer added to the norm in the backward pass of safe_l2_norm.
inline constexpr double kSafeNormEps = 1e-19;

enum class GradRule { exact, custom };

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Receives the upstream gradient and the forward value of a node and returns
/// one gradient per input (an empty optional means "no contribution").
using BackwardFn =
    std::function<std::vector<std::optional<Tensor>>(const Tensor& upstream, const Tensor& output)>;

struct TapeNode {
  std::string_view op;
  std::vector<std::size_t> inputs;
  Tensor value;
  GradRule rule = GradRule::exact;
  BackwardFn backward;
  bool is_leaf = false;
  bool requires_grad = false;
};

/// Gradient of a scalar root with respect to every leaf of the tape.
class Gradients {
 public:
  /// Zero tensor when the leaf does not influence the root.
  const Tensor& of(Var leaf) const;
  const Tensor& operator[](Var leaf) const { return of(leaf); }

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
  std::vector<Tensor> zeros_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable input. Rejects non-finite values.
  Var leaf(Tensor value);
  /// Input that never receives a gradient.
  Var constant(Tensor value);
  Var scalar(double v) { return constant(Tensor::scalar(v)); }

  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward,
             GradRule rule = GradRule::exact);
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn backward,
             GradRule rule = GradRule::exact);

  /// Reverse sweep from a scalar root.
  Gradients backward(Var root) const;

  const TapeNode& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  // deque keeps node references stable while the tape grows.
  std::deque<TapeNode> nodes_;
};

// --- elementwise -----------------------------------------------------------
// Binary ops require equal shapes, or one side holding a single value.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Throws NumericError when any divisor is exactly zero.
Var div(Var a, Var b);
Var neg(Var a);
Var add_scalar(Var a, double c);
Var scale(Var a, double c);

Var exp(Var x);
Var log(Var x);
Var abs(Var x);
/// Zero backward everywhere.
Var sign(Var x);
Var sigmoid(Var x);
Var sqrt(Var x);
/// x^p for x > 0 elementwise.
Var pow(Var x, double p);
/// max(x, 0); subgradient 0 at the kink.
Var relu(Var x);
/// relu forward, elu(alpha = kEluAlpha) derivative backward.
Var rgf_relu(Var x);
/// Euclidean norm over all elements (axis empty) or along `axis` of a matrix.
/// Backward is upstream * x / (norm + kSafeNormEps), finite at x = 0.
Var safe_l2_norm(Var x, std::optional<std::size_t> axis = std::nullopt);

/// Generic custom-gradient hook: forward value is supplied, backward is
/// `grad(x, upstream)`.
Var custom_unary(std::string_view op, Var x, Tensor value,
                 std::function<Tensor(const Tensor& x, const Tensor& upstream)> grad);

// --- structural ------------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);
/// Concatenate vectors, or matrices along axis 0 or 1.
Var concat(std::span<const Var> parts, std::size_t axis = 0);
Var concat(std::initializer_list<Var> parts, std::size_t axis = 0);
/// Flat-index gather from any tensor into a vector.
Var gather(Var x, std::vector<std::size_t> indices);
/// Columns [begin, end) of a matrix.
Var slice_cols(Var x, std::size_t begin, std::size_t end);
/// Vector of length c repeated into an (n, c) matrix.
Var broadcast_rows(Var v, std::size_t n);
/// Vector of length r repeated into an (r, m) matrix.
Var broadcast_cols(Var v, std::size_t m);
/// For each block b of `x` (shape (blocks*N, F)): out_b = a @ x_b with a (N, N).
Var block_left_matmul(Var a, Var x, std::size_t blocks);

// --- reductions ------------------------------------------------------------

Var sum(Var x);
/// Elementwise sum of equally shaped terms as one node.
Var add_n(std::span<const Var> terms);
/// Matrix reduction; axis 0 sums over rows (result has cols entries).
Var sum(Var x, std::size_t axis);
Var mean(Var x);
Var mean(Var x, std::size_t axis);
/// Row-wise log-softmax of a matrix.
Var log_softmax_rows(Var logits);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }

}  // namespace sparsegrad::ad
