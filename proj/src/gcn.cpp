#include "sparsegrad/gcn.hpp"

#include <cmath>

#include "sparsegrad/error.hpp"

namespace sparsegrad {

using namespace ad;

namespace {

DenseLayer he_layer(std::size_t in, std::size_t out, Rng& rng) {
  return DenseLayer{rng.normal_tensor(Shape{in, out}, std::sqrt(2.0 / static_cast<double>(in))),
                    Tensor(Shape{out}, 0.0)};
}

Var activate(Var x, Activation act) { return act == Activation::relu ? relu(x) : x; }

}  // namespace

GcnModel init_gcn(const GcnSizes& s, Rng& rng) {
  if (s.features < 1 || s.hidden < 1 || s.blocks < 1 || s.head_layers < 1) {
    throw ValidationError("gcn sizes must all be >= 1");
  }
  GcnModel m;
  for (std::size_t k = 0; k < s.head_layers; ++k) m.input_head.push_back(he_layer(k == 0 ? s.features : s.hidden, s.hidden, rng));
  for (std::size_t k = 0; k < s.blocks; ++k) {
    m.blocks.push_back(rng.normal_tensor(Shape{s.hidden, s.hidden}, std::sqrt(2.0 / static_cast<double>(s.hidden))));
  }
  const std::size_t concat_width = s.hidden * s.blocks;
  for (std::size_t k = 0; k < s.head_layers; ++k) {
    const std::size_t in = k == 0 ? concat_width : s.hidden;
    const std::size_t out = k + 1 == s.head_layers ? 1 : s.hidden;
    m.output_head.push_back(he_layer(in, out, rng));
  }
  // Start the final layer small so early predictions sit near the bias.
  DenseLayer& last = m.output_head.back();
  for (double& w : last.weight.data()) w *= 0.1;
  last.bias[0] = 1.0;
  return m;
}

GcnOutput gcn_forward(const GcnVars& v, Activation act, Var a, Var x, std::size_t batch) {
  if (v.input_w.size() != v.input_b.size() || v.output_w.size() != v.output_b.size() || v.output_w.empty()) {
    throw ValidationError("malformed gcn heads");
  }
  const std::size_t rows = x.value().rows();
  Var h = x;
  for (std::size_t k = 0; k < v.input_w.size(); ++k) {
    h = activate(matmul(h, v.input_w[k]) + broadcast_rows(v.input_b[k], rows), act);
  }
  GcnOutput out;
  for (Var w : v.blocks) {
    h = activate(matmul(block_left_matmul(a, h, batch), w), act);
    out.block_outputs.push_back(h);
  }
  h = concat(out.block_outputs, 1);
  for (std::size_t k = 0; k < v.output_w.size(); ++k) {
    h = matmul(h, v.output_w[k]) + broadcast_rows(v.output_b[k], rows);
    if (k + 1 < v.output_w.size()) h = activate(h, act);
  }
  out.prediction = h;
  return out;
}

GcnVars bind_constants(Tape& tape, const GcnModel& m) {
  GcnVars v;
  for (const auto& l : m.input_head) {
    v.input_w.push_back(tape.constant(l.weight));
    v.input_b.push_back(tape.constant(l.bias));
  }
  for (const auto& w : m.blocks) v.blocks.push_back(tape.constant(w));
  for (const auto& l : m.output_head) {
    v.output_w.push_back(tape.constant(l.weight));
    v.output_b.push_back(tape.constant(l.bias));
  }
  return v;
}

Tensor gcn_forward(const GcnModel& model, const Tensor& a, const Tensor& x, std::size_t batch) {
  Tape tape;
  const GcnVars v = bind_constants(tape, model);
  return gcn_forward(v, model.activation, tape.constant(a), tape.constant(x), batch).prediction.value();
}

}  // namespace sparsegrad
