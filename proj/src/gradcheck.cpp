#include "sparsegrad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace sparsegrad::ad {

namespace {

Var build(Tape& tape, const LossBuilder& f, const std::vector<Tensor>& inputs, std::vector<Var>& leaves) {
  leaves.clear();
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  return f(tape, leaves);
}

}  // namespace

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double evaluate(const LossBuilder& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  return build(tape, f, inputs, leaves).value().item();
}

std::vector<Tensor> autodiff_gradient(const LossBuilder& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  Var loss = build(tape, f, inputs, leaves);
  Gradients g = tape.backward(loss);
  std::vector<Tensor> out;
  for (Var l : leaves) out.push_back(g[l]);
  return out;
}

std::vector<Tensor> finite_difference_gradient(const LossBuilder& f, const std::vector<Tensor>& inputs, double h) {
  std::vector<Tensor> out;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor g = Tensor::zeros_like(inputs[k]);
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      const double x0 = inputs[k][i];
      probe[k][i] = x0 + h;
      const double up = evaluate(f, probe);
      probe[k][i] = x0 - h;
      const double down = evaluate(f, probe);
      probe[k][i] = x0;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double max_gradient_error(const LossBuilder& f, const std::vector<Tensor>& inputs, double h) {
  const auto ad = autodiff_gradient(f, inputs);
  const auto fd = finite_difference_gradient(f, inputs, h);
  double worst = 0.0;
  for (std::size_t k = 0; k < ad.size(); ++k)
    for (std::size_t i = 0; i < ad[k].numel(); ++i) worst = std::max(worst, relative_error(ad[k][i], fd[k][i]));
  return worst;
}

}  // namespace sparsegrad::ad
