#include "sparsegrad/optim.hpp"

#include <cmath>

#include "sparsegrad/error.hpp"

namespace sparsegrad {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw ValidationError("duplicate parameter '" + name + "'");
  Tensor z = Tensor::zeros_like(value);
  params_.push_back(Parameter{std::move(name), std::move(value), z, z});
  return params_.size() - 1;
}

std::size_t ParameterSet::index(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw ValidationError("unknown parameter '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

std::vector<ad::Var> ParameterSet::bind(ad::Tape& tape) const {
  std::vector<ad::Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) vars.push_back(tape.leaf(p.value));
  return vars;
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ValidationError("unknown optimizer '" + s + "'");
}

double Schedule::rate(std::size_t epoch, std::size_t total_epochs) const {
  double r = lr;
  for (double m : milestones) {
    if (static_cast<double>(epoch) >= m * static_cast<double>(total_epochs)) r *= factor;
  }
  return r;
}

void Schedule::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("learning rate must be > 0");
  if (!(factor > 0.0)) throw ValidationError("schedule factor must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
  for (double m : milestones) {
    if (!(m > 0.0 && m <= 1.0)) throw ValidationError("schedule milestones are fractions in (0, 1]");
  }
}

void Optimizer::step(ParameterSet& params, const std::vector<Tensor>& grads, double lr,
                     const std::vector<bool>& only) {
  if (grads.size() != params.size()) throw ValidationError("gradient count does not match parameters");
  ++t_;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-7;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!only.empty() && !only[k]) continue;
    Parameter& p = params[k];
    const Tensor& g = grads[k];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      if (schedule_.optimizer == OptimizerKind::sgd) {
        p.slot1[i] = schedule_.momentum * p.slot1[i] + g[i];
        p.value[i] -= lr * p.slot1[i];
      } else {
        p.slot1[i] = b1 * p.slot1[i] + (1.0 - b1) * g[i];
        p.slot2[i] = b2 * p.slot2[i] + (1.0 - b2) * g[i] * g[i];
        p.value[i] -= lr * (p.slot1[i] / c1) / (std::sqrt(p.slot2[i] / c2) + eps);
      }
    }
  }
}

}  // namespace sparsegrad
