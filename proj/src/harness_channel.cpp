#include <cmath>
#include <string>

#include "harness_common.hpp"
#include "sparsegrad/error.hpp"
#include "sparsegrad/proximal.hpp"
#include "sparsegrad/sparse_param.hpp"

namespace sparsegrad {

using namespace ad;

namespace {

std::string key(std::size_t layer, const char* what) { return "l" + std::to_string(layer) + "." + what; }

// Gate tensor of layer k from a parameter set, without a tape.
Tensor frozen_gate(const ExperimentConfig& c, const ParameterSet& p, std::size_t k) {
  if (p.contains(key(k, "gate"))) return p.value(key(k, "gate"));
  GateGroup g{p.value(key(k, "alpha")), p.value(key(k, "beta"))[0], GateMode::signed_magnitude,
              c.method == Method::ds_rectified ? GradMode::rectified : GradMode::exact};
  return gates_signed(g).a;
}

ProxKind prox_kind_for(Method m) {
  switch (m) {
    case Method::prox_l1: return ProxKind::l1;
    case Method::prox_group: return ProxKind::group_l21;
    default: return ProxKind::exclusive_l12_explicit;
  }
}

class ChannelHarness final : public HarnessModel {
 public:
  explicit ChannelHarness(ExperimentConfig c) : HarnessModel(std::move(c)) {
    Rng rng = Rng(config_.data_seed()).fork(kDataStream);
    data_ = generate_classify(config_.data.samples, config_.data.features, rng);
    split_ = split_indices(config_.data.samples, true, rng);
  }

  void init(ParameterSet& p, Rng& rng) const override {
    const auto& m = config_.model;
    std::size_t in = config_.data.features;
    for (std::size_t k = 0; k < m.layers; ++k) {
      p.add(key(k, "weight"), rng.normal_tensor(Shape{in, m.width}, std::sqrt(2.0 / static_cast<double>(in))));
      p.add(key(k, "bias"), Tensor(Shape{m.width}, 0.0));
      p.add(key(k, "shift"), Tensor(Shape{m.width}, 0.0));
      if (learned_gates()) {
        GateGroup g = init_half(m.width);
        p.add(key(k, "alpha"), g.alpha);
        p.add(key(k, "beta"), Tensor::vector({g.beta}));
      } else {
        p.add(key(k, "gate"), Tensor(Shape{m.width}, 0.5));
      }
      p.add(key(k, "running_mean"), Tensor(Shape{m.width}, 0.0));
      p.add(key(k, "running_var"), Tensor(Shape{m.width}, 1.0));
      in = m.width;
    }
    p.add("out.weight", rng.normal_tensor(Shape{in, 2}, std::sqrt(1.0 / static_cast<double>(in))));
    p.add("out.bias", Tensor(Shape{2}, 0.0));
  }

  std::vector<bool> trainable(const ParameterSet& p) const override {
    std::vector<bool> t;
    for (const auto& q : p.all()) t.push_back(q.name.find("running_") == std::string::npos);
    return t;
  }

  std::size_t train_size() const override { return split_.train.size(); }

  StepLoss loss(Tape& tape, const ParameterSet& p, const std::vector<Var>& v,
                const std::vector<std::size_t>& batch) const override {
    std::vector<std::size_t> rows;
    for (std::size_t b : batch) rows.push_back(split_.train[b]);
    auto [x, labels] = gather_rows(rows);
    Var h = tape.constant(std::move(x));
    StepLoss out;
    std::vector<Var> gates, alphas;
    for (std::size_t k = 0; k < config_.model.layers; ++k) {
      Var gate;
      if (learned_gates()) {
        Var alpha = v[p.index(key(k, "alpha"))];
        gate = gate_values(alpha, reshape(v[p.index(key(k, "beta"))], Shape{}), GateMode::signed_magnitude,
                           grad_mode())
                   .a;
        alphas.push_back(alpha);
      } else {
        gate = v[p.index(key(k, "gate"))];
      }
      gates.push_back(gate);
      GatedVars g = gated_forward(h, v[p.index(key(k, "weight"))], v[p.index(key(k, "bias"))], gate,
                                  v[p.index(key(k, "shift"))]);
      out.batch_stats.push_back(g.batch_mean);
      out.batch_stats.push_back(g.batch_var);
      h = relu(g.out);
    }
    Var logits = matmul(h, v[p.index("out.weight")]) + broadcast_rows(v[p.index("out.bias")], rows.size());
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < labels.size(); ++i) picks.push_back(i * 2 + static_cast<std::size_t>(labels[i]));
    out.prediction = -mean(gather(log_softmax_rows(logits), picks));
    if (has_penalty()) {
      const auto& target = config_.reg_target == RegTarget::alpha ? alphas : gates;
      out.penalty = penalty(layer_spec(), concat(target));
    }
    return out;
  }

  void after_step(ParameterSet& p, const StepLoss& s) const override {
    for (std::size_t k = 0; k < config_.model.layers; ++k) {
      Tensor& rm = p.value(key(k, "running_mean"));
      Tensor& rv = p.value(key(k, "running_var"));
      for (std::size_t j = 0; j < rm.numel(); ++j) {
        rm[j] = 0.9 * rm[j] + 0.1 * s.batch_stats[2 * k][j];
        rv[j] = 0.9 * rv[j] + 0.1 * s.batch_stats[2 * k + 1][j];
      }
    }
  }

  void prox(ParameterSet& p, double eta) const override {
    if (!is_prox(config_.method)) return;
    ProxSpec spec{prox_kind_for(config_.method), config_.regularizer.lambda, eta, {}};
    for (std::size_t k = 0; k < config_.model.layers; ++k) {
      Tensor& g = p.value(key(k, "gate"));
      g = prox_step(spec, g);
    }
  }

  Evaluation evaluate(const ParameterSet& p, SplitPart part) const override {
    const auto& idx = part == SplitPart::train ? split_.train : part == SplitPart::valid ? split_.valid : split_.test;
    auto [x, labels] = gather_rows(idx);
    const Tensor logits = channel_logits(channel_net(config_, p), x);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int pred = logits.at(i, 1) > logits.at(i, 0) ? 1 : 0;
      wrong += pred != labels[i];
    }
    Evaluation e;
    e.error = static_cast<double>(wrong) / static_cast<double>(labels.size());
    return e;
  }

  SparsityReport sparsity(const ParameterSet& p) const override { return sparsity_report(channel_net(config_, p)); }

 private:
  RegularizerSpec layer_spec() const {
    RegularizerSpec s = config_.regularizer;
    const std::size_t w = config_.model.width, l = config_.model.layers;
    if (s.kind == RegKind::group_l21 || s.kind == RegKind::exclusive_l12) s.groups = row_groups(l, w);
    return s;
  }

  std::pair<Tensor, std::vector<int>> gather_rows(const std::vector<std::size_t>& rows) const {
    const std::size_t f = data_.x.cols();
    std::vector<double> d;
    std::vector<int> labels;
    d.reserve(rows.size() * f);
    for (std::size_t r : rows) {
      for (std::size_t j = 0; j < f; ++j) d.push_back(data_.x.at(r, j));
      labels.push_back(data_.labels[r]);
    }
    return {Tensor::matrix(rows.size(), f, std::move(d)), std::move(labels)};
  }

  ClassifyData data_;
  Split split_;
};

}  // namespace

ChannelNet channel_net(const ExperimentConfig& c, const ParameterSet& p) {
  ChannelNet net;
  for (std::size_t k = 0; k < c.model.layers; ++k) {
    GatedChannelLayer l;
    l.weight = p.value(key(k, "weight"));
    l.bias = p.value(key(k, "bias"));
    l.mean = p.value(key(k, "running_mean"));
    l.var = p.value(key(k, "running_var"));
    l.gate = frozen_gate(c, p, k);
    l.shift = p.value(key(k, "shift"));
    net.layers.push_back(std::move(l));
  }
  net.out_weight = p.value("out.weight");
  net.out_bias = p.value("out.bias");
  return net;
}

SparsityReport sparsity_report(const ChannelNet& net) {
  SparsityReport r;
  r.total = net.gate_count();
  r.nonzero_count = r.total - net.zero_gate_count();
  r.sparsity_rate = r.total ? static_cast<double>(r.total - r.nonzero_count) / static_cast<double>(r.total) : 0.0;
  r.remaining_parameters = prune_dead_channels(net).parameter_count();
  for (const auto& l : net.layers) {
    bool all_zero = true;
    for (double g : l.gate.data()) all_zero = all_zero && g == 0.0;
    r.degenerate_groups += all_zero;
  }
  return r;
}

SparsityReport sparsity_report(const Tensor& gates) {
  SparsityReport r;
  r.total = gates.numel();
  for (double g : gates.data()) r.nonzero_count += g != 0.0;
  r.sparsity_rate = r.total ? static_cast<double>(r.total - r.nonzero_count) / static_cast<double>(r.total) : 0.0;
  r.remaining_parameters = r.nonzero_count;
  return r;
}

std::unique_ptr<HarnessModel> make_channel_harness(const ExperimentConfig& c) {
  return std::make_unique<ChannelHarness>(c);
}

}  // namespace sparsegrad
