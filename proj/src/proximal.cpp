#include "sparsegrad/proximal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sparsegrad/error.hpp"

namespace sparsegrad {

std::string to_string(ProxKind kind) {
  switch (kind) {
    case ProxKind::l1: return "l1";
    case ProxKind::group_l21: return "group-l21";
    case ProxKind::exclusive_l12: return "exclusive-l12";
    case ProxKind::exclusive_l12_explicit: return "exclusive-l12-explicit";
    case ProxKind::exclusive_nonneg: return "exclusive-nonneg";
  }
  return "?";
}

ProxKind prox_kind_from_string(const std::string& s) {
  if (s == "l1") return ProxKind::l1;
  if (s == "group-l21") return ProxKind::group_l21;
  if (s == "exclusive-l12") return ProxKind::exclusive_l12;
  if (s == "exclusive-l12-explicit") return ProxKind::exclusive_l12_explicit;
  if (s == "exclusive-nonneg") return ProxKind::exclusive_nonneg;
  throw ValidationError("unknown proximal kind '" + s + "'");
}

void ProxSpec::validate(std::size_t n) const {
  if (!(eta > 0.0)) throw ValidationError("prox learning rate must be > 0");
  if (!(lambda >= 0.0)) throw ValidationError("prox lambda must be >= 0");
  RegularizerSpec groups_only;
  groups_only.groups = groups;
  groups_only.validate(n);
}

namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Exact prox of (t/2)(sum |v_i|)^2 on one group. With |w| sorted descending
// as u_1 >= u_2 >= ..., the active set is the longest prefix k with
// u_k > t S_k / (1 + k t), S_k = u_1 + ... + u_k; every survivor is shrunk by
// t ||v||_1 = t S_k / (1 + k t).
void exclusive_exact(std::span<const double> w, std::span<double> out, double t) {
  std::vector<double> u(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) u[i] = std::abs(w[i]);
  std::sort(u.begin(), u.end(), std::greater<>());
  double s = 0.0, shrink = 0.0;
  for (std::size_t k = 1; k <= u.size(); ++k) {
    const double sk = s + u[k - 1];
    const double cand = t * sk / (1.0 + static_cast<double>(k) * t);
    if (!(u[k - 1] > cand)) break;
    s = sk;
    shrink = cand;
  }
  if (s == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = sgn(w[i]) * std::max(std::abs(w[i]) - shrink, 0.0);
}

}  // namespace

Tensor prox_step(const ProxSpec& spec, const Tensor& w) {
  const std::size_t n = w.numel();
  spec.validate(n);
  if (!w.all_finite()) throw ValidationError("prox_step input must be finite");
  const double t = spec.shrink();
  const Grouping groups = spec.groups.empty() ? single_group(n) : spec.groups;
  Tensor out = w;

  switch (spec.kind) {
    case ProxKind::l1:
      for (std::size_t i = 0; i < n; ++i) out[i] = sgn(w[i]) * std::max(std::abs(w[i]) - t, 0.0);
      break;
    case ProxKind::group_l21:
      for (const auto& g : groups) {
        double sq = 0.0;
        for (std::size_t i : g) sq += w[i] * w[i];
        const double norm = std::sqrt(sq);
        // Zero group maps to zero (limit of the shrink factor).
        const double factor = norm > 0.0 ? std::max((norm - t) / norm, 0.0) : 0.0;
        for (std::size_t i : g) out[i] = factor * w[i];
      }
      break;
    case ProxKind::exclusive_l12:
      for (const auto& g : groups) {
        std::vector<double> wg, vg(g.size());
        for (std::size_t i : g) wg.push_back(w[i]);
        exclusive_exact(wg, vg, t);
        for (std::size_t k = 0; k < g.size(); ++k) out[g[k]] = vg[k];
      }
      break;
    case ProxKind::exclusive_l12_explicit:
      for (const auto& g : groups) {
        double l1 = 0.0;
        for (std::size_t i : g) l1 += std::abs(w[i]);
        for (std::size_t i : g) out[i] = sgn(w[i]) * std::max(std::abs(w[i]) - t * l1, 0.0);
      }
      break;
    case ProxKind::exclusive_nonneg:
      for (double x : w.data()) {
        if (x < 0.0) throw ValidationError("exclusive-nonneg prox requires non-negative input");
      }
      for (const auto& g : groups) {
        double l1 = 0.0;
        for (std::size_t i : g) l1 += w[i];
        for (std::size_t i : g) out[i] = std::max(w[i] - t * l1, 0.0);
      }
      break;
  }
  // sign(w) * 0 is -0.0 for negative w; removed entries are stored as +0.0.
  for (double& v : out.data())
    if (v == 0.0) v = 0.0;
  return out;
}

double prox_objective(const ProxSpec& spec, const Tensor& v, const Tensor& w) {
  const std::size_t n = w.numel();
  const Grouping groups = spec.groups.empty() ? single_group(n) : spec.groups;
  double fit = 0.0;
  for (std::size_t i = 0; i < n; ++i) fit += 0.5 * (v[i] - w[i]) * (v[i] - w[i]);
  double r = 0.0;
  switch (spec.kind) {
    case ProxKind::l1:
      for (double x : v.data()) r += std::abs(x);
      break;
    case ProxKind::group_l21:
      for (const auto& g : groups) {
        double sq = 0.0;
        for (std::size_t i : g) sq += v[i] * v[i];
        r += std::sqrt(sq);
      }
      break;
    case ProxKind::exclusive_nonneg:
      for (double x : v.data()) {
        if (x < 0.0) return std::numeric_limits<double>::infinity();
      }
      [[fallthrough]];
    case ProxKind::exclusive_l12:
    case ProxKind::exclusive_l12_explicit:
      for (const auto& g : groups) {
        double l1 = 0.0;
        for (std::size_t i : g) l1 += std::abs(v[i]);
        r += 0.5 * l1 * l1;
      }
      break;
  }
  return fit + spec.shrink() * r;
}

Tensor prox_grid_argmin(const ProxSpec& spec, const Tensor& w) {
  const std::size_t n = w.numel();
  if (n < 1 || n > 2) throw ValidationError("grid oracle supports 1- or 2-element inputs");
  // Every supported prox maps into the box |v_i| <= |w_i|.
  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = -std::abs(w[i]) - 0.1;
    hi[i] = std::abs(w[i]) + 0.1;
  }
  Tensor best = Tensor::zeros_like(w);
  double best_val = std::numeric_limits<double>::infinity();
  Tensor v = Tensor::zeros_like(w);
  std::size_t points = 401;
  for (int round = 0; round < 60; ++round) {
    std::vector<double> step(n);
    for (std::size_t i = 0; i < n; ++i) step[i] = (hi[i] - lo[i]) / static_cast<double>(points - 1);
    const std::size_t inner = n == 2 ? points : 1;
    for (std::size_t a = 0; a < points; ++a) {
      v[0] = lo[0] + step[0] * static_cast<double>(a);
      for (std::size_t b = 0; b < inner; ++b) {
        if (n == 2) v[1] = lo[1] + step[1] * static_cast<double>(b);
        const double val = prox_objective(spec, v, w);
        if (val < best_val) {
          best_val = val;
          best = v;
        }
      }
    }
    double widest = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = best[i] - 2.0 * step[i];
      hi[i] = best[i] + 2.0 * step[i];
      widest = std::max(widest, step[i]);
    }
    points = 21;
    if (widest < 1e-10) break;
  }
  // Snap values that the grid only approached to the exact zero a prox produces.
  for (std::size_t i = 0; i < n; ++i) {
    Tensor snapped = best;
    snapped[i] = 0.0;
    if (prox_objective(spec, snapped, w) <= best_val) best = snapped;
  }
  return best;
}

double prox_oracle_check(const ProxSpec& spec, const Tensor& w) {
  return max_abs_diff(prox_step(spec, w), prox_grid_argmin(spec, w));
}

}  // namespace sparsegrad
