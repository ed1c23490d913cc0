#pragma once

// Architecture-parameter gates that reach exact zero under plain gradient
// descent. A group of n free parameters alpha and one free threshold
// parameter beta produce n gate values; components whose strength falls
// below sigmoid(beta) times the group's total strength are cut to 0.0.

#include <cstddef>
#include <span>
#include <vector>

#include "sparsegrad/autodiff.hpp"
#include "sparsegrad/tensor.hpp"

namespace sparsegrad {

enum class GateMode {
  nonneg_softmax,    // gamma = exp(alpha), thresholded, renormalized to sum 1
  nonneg_raw,        // gamma = exp(alpha), thresholded
  signed_magnitude,  // sign(alpha) * (|alpha| - thr)_+
};

enum class GradMode {
  exact,      // relu backward
  rectified,  // relu forward, elu backward
};

/// Shape of the threshold. `coupled` scales sigmoid(beta) by the group's l1
/// norm; `per_component` uses sigmoid(beta) alone and only exists for
/// gradient-flow analysis.
enum class ThresholdForm { coupled, per_component };

struct GateGroup {
  Tensor alpha;
  double beta = 0.0;
  GateMode mode = GateMode::signed_magnitude;
  GradMode grad_mode = GradMode::exact;

  std::size_t size() const noexcept { return alpha.numel(); }
};

struct GateOutput {
  Tensor a;
  std::vector<bool> active;  // a_i != 0.0, no tolerance
  bool degenerate = false;   // softmax group with every member thresholded away

  std::size_t zero_count() const;
};

/// Differentiable gate evaluation on a tape.
struct GateVars {
  ad::Var a;
  ad::Var magnitude;  // thresholded strengths before sign / renormalization
  bool degenerate = false;
};

GateVars gate_values(ad::Var alpha, ad::Var beta, GateMode mode, GradMode grad_mode,
                     ThresholdForm form = ThresholdForm::coupled);

/// relu or rgf_relu depending on the gradient mode.
ad::Var threshold_relu(ad::Var x, GradMode mode);

GateOutput gates_nonneg(const GateGroup& group);
GateOutput gates_signed(const GateGroup& group);
GateOutput evaluate_gates(const GateGroup& group, ThresholdForm form = ThresholdForm::coupled);

/// Signed group whose gates all start at exactly 0.5.
GateGroup init_half(std::size_t n);

/// Default start for non-negative groups: alpha = 0 (gamma = 1), beta = -4.
GateGroup init_nonneg(std::size_t n, GateMode mode = GateMode::nonneg_softmax);

struct DeadGateProbe {
  double grad_alpha = 0.0;    // dL/d alpha_i
  double grad_through = 0.0;  // dL/d w_i for the component gated by a_i
};

/// Gradient flow at a dead component i under L = sum_j a_j * (w_j * c_j),
/// evaluated at w = 1. Throws ValidationError if a_i != 0.
DeadGateProbe dead_gate_gradient_probe(const GateGroup& group, std::size_t i, std::span<const double> c,
                                       ThresholdForm form = ThresholdForm::coupled);

}  // namespace sparsegrad
