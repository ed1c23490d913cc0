#include "sparsegrad/metrics.hpp"

#include <cmath>

#include "sparsegrad/data.hpp"
#include "sparsegrad/error.hpp"

namespace sparsegrad {

using namespace ad;

namespace {

void check_targets(const Tensor& pred_shape_source, const Tensor& target) {
  if (pred_shape_source.numel() != target.numel()) throw ValidationError("prediction and target sizes differ");
  if (target.numel() == 0) throw ValidationError("empty target");
  for (double t : target.data()) {
    if (!(t > 0.0)) throw ValidationError("relative error needs strictly positive targets");
  }
}

}  // namespace

double mre(const Tensor& pred, const Tensor& target) {
  check_targets(pred, target);
  double s = 0.0;
  for (std::size_t i = 0; i < target.numel(); ++i) s += std::abs(pred[i] - target[i]) / target[i];
  return s / static_cast<double>(target.numel());
}

Var mre_loss(Var pred, const Tensor& target) {
  check_targets(pred.value(), target);
  Tape& tape = *pred.tape();
  Tensor inv = target.reshaped(pred.value().shape());
  for (double& v : inv.data()) v = 1.0 / v;
  Var t = tape.constant(target.reshaped(pred.value().shape()));
  return mean(abs(pred - t) * tape.constant(inv));
}

double relationship_score(const Tensor& a, int k, const std::vector<std::vector<int>>& geodesic) {
  const std::size_t n = a.rows();
  if (a.cols() != n || geodesic.size() != n) throw ValidationError("relationship score needs matching square inputs");
  const Tensor mask = hop_mask(geodesic, k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double all = 0.0, in = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      all += a.at(i, j);
      in += a.at(i, j) * mask.at(i, j);
    }
    if (all != 0.0) total += in / all;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double all = 0.0, in = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      all += a.at(i, j);
      in += a.at(i, j) * mask.at(i, j);
    }
    if (all != 0.0) total += in / all;
  }
  return total / (2.0 * static_cast<double>(n));
}

double zero_fraction(const Tensor& t) {
  if (t.numel() == 0) return 0.0;
  return 1.0 - static_cast<double>(nonzero_count(t)) / static_cast<double>(t.numel());
}

std::size_t nonzero_count(const Tensor& t) {
  std::size_t c = 0;
  for (double v : t.data()) c += v != 0.0;
  return c;
}

}  // namespace sparsegrad
