#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sparsegrad/autodiff.hpp"
#include "sparsegrad/tensor.hpp"

namespace sparsegrad {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor slot1;  // momentum / first moment
  Tensor slot2;  // second moment
};

/// Named trainable tensors in insertion order.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const;

  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }
  Tensor& value(const std::string& name) { return params_[index(name)].value; }
  const Tensor& value(const std::string& name) const { return params_[index(name)].value; }

  std::vector<Parameter>& all() noexcept { return params_; }
  const std::vector<Parameter>& all() const noexcept { return params_; }

  /// Registers every parameter as a leaf of `tape`, in order.
  std::vector<ad::Var> bind(ad::Tape& tape) const;

 private:
  std::vector<Parameter> params_;
};

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

/// Piecewise-constant rate: lr * factor^(number of milestones passed), with
/// milestones given as fractions of the total epoch count.
struct Schedule {
  OptimizerKind optimizer = OptimizerKind::sgd;
  double lr = 0.1;
  std::vector<double> milestones{0.5, 0.75};
  double factor = 0.1;
  double momentum = 0.9;

  double rate(std::size_t epoch, std::size_t total_epochs) const;
  void validate() const;
};

class Optimizer {
 public:
  explicit Optimizer(Schedule schedule) : schedule_(std::move(schedule)) {}

  /// One update of every parameter in `only` (all when empty) at rate `lr`.
  void step(ParameterSet& params, const std::vector<Tensor>& grads, double lr,
            const std::vector<bool>& only = {});

 private:
  Schedule schedule_;
  std::size_t t_ = 0;
};

}  // namespace sparsegrad
