#include "sparsegrad/sparse_param.hpp"

#include <cmath>
#include <string>

#include "sparsegrad/error.hpp"

namespace sparsegrad {

using namespace ad;

std::size_t GateOutput::zero_count() const {
  std::size_t z = 0;
  for (bool on : active) z += on ? 0 : 1;
  return z;
}

Var threshold_relu(Var x, GradMode mode) { return mode == GradMode::rectified ? rgf_relu(x) : relu(x); }

GateVars gate_values(Var alpha, Var beta, GateMode mode, GradMode grad_mode, ThresholdForm form) {
  if (alpha.value().numel() == 0) throw ValidationError("gate group must have at least one member");
  if (beta.value().numel() != 1) throw ValidationError("gate threshold parameter must be a scalar");
  Var s = sigmoid(beta);
  GateVars out;
  if (mode == GateMode::signed_magnitude) {
    Var mag = abs(alpha);
    Var thr = form == ThresholdForm::coupled ? s * sum(mag) : s;
    out.magnitude = threshold_relu(mag - thr, grad_mode);
    // Adding +0.0 turns the -0.0 of dead negative members into +0.0.
    out.a = sign(alpha) * out.magnitude + 0.0;
    return out;
  }
  Var gamma = exp(alpha);
  // gamma is positive, so its l1 norm is its sum.
  Var thr = form == ThresholdForm::coupled ? s * sum(gamma) : s;
  out.magnitude = threshold_relu(gamma - thr, grad_mode);
  if (mode == GateMode::nonneg_raw) {
    out.a = out.magnitude;
    return out;
  }
  Var total = sum(out.magnitude);
  if (total.value().item() == 0.0) {
    // All members dropped: emit the (all-zero) thresholded strengths instead
    // of 0/0 so rectified gradients can still reach alpha.
    out.degenerate = true;
    out.a = out.magnitude;
    return out;
  }
  out.a = out.magnitude / total;
  return out;
}

namespace {

GateOutput evaluate_on_tape(const GateGroup& g, ThresholdForm form) {
  Tape tape;
  GateVars v = gate_values(tape.constant(g.alpha), tape.scalar(g.beta), g.mode, g.grad_mode, form);
  GateOutput out;
  out.a = v.a.value();
  out.degenerate = v.degenerate;
  out.active.resize(out.a.numel());
  for (std::size_t i = 0; i < out.a.numel(); ++i) out.active[i] = out.a[i] != 0.0;
  return out;
}

}  // namespace

GateOutput gates_nonneg(const GateGroup& group) {
  if (group.mode == GateMode::signed_magnitude) throw ValidationError("gates_nonneg called on a signed group");
  return evaluate_on_tape(group, ThresholdForm::coupled);
}

GateOutput gates_signed(const GateGroup& group) {
  if (group.mode != GateMode::signed_magnitude) throw ValidationError("gates_signed called on a non-negative group");
  return evaluate_on_tape(group, ThresholdForm::coupled);
}

GateOutput evaluate_gates(const GateGroup& group, ThresholdForm form) { return evaluate_on_tape(group, form); }

GateGroup init_half(std::size_t n) {
  if (n < 1) throw ValidationError("init_half requires n >= 1");
  const double nd = static_cast<double>(n);
  GateGroup g;
  g.alpha = Tensor(Shape{n}, 0.5 * (nd + 1.0) / nd);
  // sigmoid(beta) = 1 / (n^2 + n), so the threshold is 0.5 / n and every
  // gate equals 0.5 (n + 1) / n - 0.5 / n = 0.5.
  g.beta = -std::log(nd * nd + nd - 1.0);
  g.mode = GateMode::signed_magnitude;
  return g;
}

GateGroup init_nonneg(std::size_t n, GateMode mode) {
  if (n < 1) throw ValidationError("gate group must have at least one member");
  if (mode == GateMode::signed_magnitude) throw ValidationError("init_nonneg needs a non-negative mode");
  GateGroup g;
  g.alpha = Tensor(Shape{n}, 0.0);
  g.beta = -4.0;
  g.mode = mode;
  return g;
}

DeadGateProbe dead_gate_gradient_probe(const GateGroup& group, std::size_t i, std::span<const double> c,
                                       ThresholdForm form) {
  const std::size_t n = group.size();
  if (i >= n) throw ValidationError("probe index out of range");
  if (c.size() != n) throw ValidationError("probe needs one constant per component");
  Tape tape;
  Var alpha = tape.leaf(group.alpha);
  Var beta = tape.leaf(Tensor::scalar(group.beta));
  Var w = tape.leaf(Tensor(Shape{n}, 1.0));
  GateVars gv = gate_values(alpha, beta, group.mode, group.grad_mode, form);
  if (gv.a.value()[i] != 0.0) {
    throw ValidationError("component " + std::to_string(i) + " is alive (a_i = " +
                          std::to_string(gv.a.value()[i]) + ")");
  }
  Var f = w * tape.constant(Tensor::vector({c.begin(), c.end()}));
  Var loss = sum(gv.a * f);
  Gradients g = tape.backward(loss);
  return {g[alpha][i], g[w][i]};
}

}  // namespace sparsegrad
