#include "sparsegrad/regularizers.hpp"

#include <cmath>
#include <numeric>

#include "sparsegrad/error.hpp"
#include "sparsegrad/gradcheck.hpp"

namespace sparsegrad {

using namespace ad;

std::string to_string(RegKind kind) {
  switch (kind) {
    case RegKind::l1: return "l1";
    case RegKind::group_l21: return "group-l21";
    case RegKind::exclusive_l12: return "exclusive-l12";
    case RegKind::lp: return "lp";
  }
  return "?";
}

RegKind reg_kind_from_string(const std::string& s) {
  if (s == "l1") return RegKind::l1;
  if (s == "group-l21") return RegKind::group_l21;
  if (s == "exclusive-l12") return RegKind::exclusive_l12;
  if (s == "lp") return RegKind::lp;
  throw ValidationError("unknown regularizer kind '" + s + "'");
}

Grouping single_group(std::size_t n) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return {all};
}

Grouping row_groups(std::size_t r, std::size_t c) {
  Grouping g(r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) g[i].push_back(i * c + j);
  return g;
}

Grouping col_groups(std::size_t r, std::size_t c) {
  Grouping g(c);
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t i = 0; i < r; ++i) g[j].push_back(i * c + j);
  return g;
}

void RegularizerSpec::validate(std::size_t n) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be a finite value >= 0");
  if (kind == RegKind::lp && !(p > 0.0 && p <= 1.0)) throw ValidationError("lp regularizer needs p in (0, 1]");
  if (groups.empty()) return;
  std::vector<int> seen(n, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw ValidationError("empty regularizer group");
    for (std::size_t i : g) {
      if (i >= n) throw ValidationError("group index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw ValidationError("groups overlap at index " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) throw ValidationError("groups do not cover index " + std::to_string(i));
  }
}

Var penalty(const RegularizerSpec& spec, Var a) {
  const Tensor& v = a.value();
  const std::size_t n = v.numel();
  spec.validate(n);
  Tape& tape = *a.tape();
  const Grouping groups = spec.groups.empty() ? single_group(n) : spec.groups;

  switch (spec.kind) {
    case RegKind::l1:
      return sum(abs(a));
    case RegKind::group_l21: {
      std::vector<Var> norms;
      for (const auto& g : groups) norms.push_back(safe_l2_norm(gather(a, g)));
      return add_n(norms);
    }
    case RegKind::exclusive_l12: {
      std::vector<Var> terms;
      for (const auto& g : groups) {
        Var l1 = sum(abs(gather(a, g)));
        terms.push_back(l1 * l1);
      }
      return 0.5 * add_n(terms);
    }
    case RegKind::lp: {
      for (double x : v.data()) {
        if (x < 0.0) throw ValidationError("lp regularizer requires non-negative gates");
      }
      std::vector<Var> terms;
      for (const auto& g : groups) {
        std::vector<std::size_t> nz;
        for (std::size_t i : g)
          if (v[i] != 0.0) nz.push_back(i);
        // Exact zeros contribute nothing and receive no gradient.
        if (nz.empty()) continue;
        terms.push_back(pow(sum(pow(gather(a, nz), spec.p)), 1.0 / spec.p));
      }
      if (terms.empty()) return tape.scalar(0.0);
      return add_n(terms);
    }
  }
  throw ValidationError("unhandled regularizer kind");
}

Var weighted_penalty(const RegularizerSpec& spec, Var a) { return spec.lambda * penalty(spec, a); }

double penalty_value(const RegularizerSpec& spec, const Tensor& a) {
  Tape tape;
  return penalty(spec, tape.constant(a)).value().item();
}

double penalty_gradient_check(const RegularizerSpec& spec, const Tensor& a) {
  for (double x : a.data()) {
    if (std::abs(x) <= 1e-3) throw ValidationError("gradient check point lies within 1e-3 of a kink");
  }
  LossBuilder f = [&spec](Tape&, std::span<const Var> in) { return penalty(spec, in[0]); };
  return max_gradient_error(f, {a});
}

}  // namespace sparsegrad
