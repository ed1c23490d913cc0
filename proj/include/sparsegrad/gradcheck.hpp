#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sparsegrad/autodiff.hpp"

namespace sparsegrad::ad {

/// Builds a scalar loss on `tape` from leaves bound to the given inputs.
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> leaves)>;

/// |a - b| / max(1, |a|, |b|): relative for large values, absolute near zero.
double relative_error(double a, double b);

/// Evaluates the loss at `inputs` without differentiating.
double evaluate(const LossBuilder& f, const std::vector<Tensor>& inputs);

/// Reverse-mode gradient of the loss with respect to every input.
std::vector<Tensor> autodiff_gradient(const LossBuilder& f, const std::vector<Tensor>& inputs);

/// Central differences with step h on every input element.
std::vector<Tensor> finite_difference_gradient(const LossBuilder& f, const std::vector<Tensor>& inputs,
                                               double h = 1e-5);

/// Max relative error between autodiff and central differences.
double max_gradient_error(const LossBuilder& f, const std::vector<Tensor>& inputs, double h = 1e-5);

}  // namespace sparsegrad::ad
