#include "sparsegrad/channel.hpp"

#include <cmath>

#include "sparsegrad/error.hpp"
#include "sparsegrad/linalg.hpp"

namespace sparsegrad {

using namespace ad;

namespace {

void check_layer(const GatedChannelLayer& l, std::size_t in) {
  const std::size_t c = l.channels();
  if (l.weight.rows() != in) throw ValidationError("gated layer expects " + std::to_string(l.weight.rows()) + " inputs");
  for (const Tensor* t : {&l.bias, &l.mean, &l.var, &l.gate, &l.shift}) {
    if (t->numel() != c) throw ValidationError("gated layer vectors must have one entry per channel");
  }
}

}  // namespace

Tensor gated_forward(const GatedChannelLayer& layer, const Tensor& x, bool training) {
  check_layer(layer, x.cols());
  const std::size_t b = x.rows(), c = layer.channels();
  if (training && b < 2) throw ValidationError("training-mode standardization needs a batch of at least 2");
  Tensor z = linalg::matmul(x, layer.weight);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < c; ++j) z.at(i, j) += layer.bias[j];

  Tensor mean = layer.mean, var = layer.var;
  if (training) {
    mean = linalg::col_sums(z);
    for (double& m : mean.data()) m /= static_cast<double>(b);
    var = Tensor(Shape{c}, 0.0);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < c; ++j) var[j] += (z.at(i, j) - mean[j]) * (z.at(i, j) - mean[j]);
    for (double& v : var.data()) v /= static_cast<double>(b);
  }
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double xt = (z.at(i, j) - mean[j]) / std::sqrt(var[j] + kNormEps);
      z.at(i, j) = layer.gate[j] * (xt + layer.shift[j]);
    }
  }
  return z;
}

std::size_t ChannelNet::parameter_count() const {
  std::size_t n = out_weight.numel() + out_bias.numel();
  for (const auto& l : layers) n += l.weight.numel() + l.bias.numel() + l.gate.numel() + l.shift.numel();
  return n;
}

std::size_t ChannelNet::gate_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.gate.numel();
  return n;
}

std::size_t ChannelNet::zero_gate_count() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    for (double g : l.gate.data()) n += g == 0.0;
  return n;
}

Tensor channel_logits(const ChannelNet& net, const Tensor& x) {
  Tensor h = x;
  for (const auto& l : net.layers) {
    h = gated_forward(l, h, false);
    for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
  }
  Tensor out = linalg::matmul(h, net.out_weight);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out.at(i, j) += net.out_bias[j];
  return out;
}

namespace {

Tensor keep_rows(const Tensor& m, const std::vector<std::size_t>& rows) {
  std::vector<double> d;
  for (std::size_t r : rows)
    for (std::size_t j = 0; j < m.cols(); ++j) d.push_back(m.at(r, j));
  return Tensor::matrix(rows.size(), m.cols(), std::move(d));
}

Tensor keep_cols(const Tensor& m, const std::vector<std::size_t>& cols) {
  std::vector<double> d;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t c : cols) d.push_back(m.at(i, c));
  return Tensor::matrix(m.rows(), cols.size(), std::move(d));
}

Tensor keep(const Tensor& v, const std::vector<std::size_t>& idx) {
  std::vector<double> d;
  for (std::size_t i : idx) d.push_back(v[i]);
  return Tensor::vector(std::move(d));
}

}  // namespace

ChannelNet prune_dead_channels(const ChannelNet& net) {
  ChannelNet out = net;
  for (std::size_t k = 0; k < out.layers.size(); ++k) {
    GatedChannelLayer& l = out.layers[k];
    std::vector<std::size_t> alive;
    for (std::size_t j = 0; j < l.channels(); ++j)
      if (l.gate[j] != 0.0) alive.push_back(j);
    l.weight = keep_cols(l.weight, alive);
    l.bias = keep(l.bias, alive);
    l.mean = keep(l.mean, alive);
    l.var = keep(l.var, alive);
    l.gate = keep(l.gate, alive);
    l.shift = keep(l.shift, alive);
    Tensor& next = k + 1 < out.layers.size() ? out.layers[k + 1].weight : out.out_weight;
    next = keep_rows(next, alive);
  }
  return out;
}

GatedVars gated_forward(Var x, Var weight, Var bias, Var gate, Var shift) {
  const std::size_t b = x.value().rows();
  if (b < 2) throw ValidationError("training-mode standardization needs a batch of at least 2");
  Var z = matmul(x, weight) + broadcast_rows(bias, b);
  Var mu = mean(z, 0);
  Var centered = z - broadcast_rows(mu, b);
  Var var = mean(centered * centered, 0);
  Var xt = centered / broadcast_rows(sqrt(var + kNormEps), b);
  Var y = broadcast_rows(gate, b) * (xt + broadcast_rows(shift, b));
  return GatedVars{y, mu.value(), var.value()};
}

}  // namespace sparsegrad
