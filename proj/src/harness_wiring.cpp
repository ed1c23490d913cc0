#include <cmath>
#include <string>

#include "harness_common.hpp"
#include "sparsegrad/error.hpp"
#include "sparsegrad/proximal.hpp"
#include "sparsegrad/sparse_param.hpp"

namespace sparsegrad {

using namespace ad;

namespace {

std::string key(std::size_t node, const char* what) { return "node" + std::to_string(node) + "." + what; }

WiringGraph harness_graph(const ExperimentConfig& c) {
  return complete_dag(c.data.inputs, c.model.hidden_nodes, c.data.outputs);
}

std::vector<std::size_t> gated_nodes(const WiringGraph& g) {
  std::vector<std::size_t> out;
  const auto in = g.in_edges();
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!in[v].empty()) out.push_back(v);
  return out;
}

class WiringHarness final : public HarnessModel {
 public:
  explicit WiringHarness(ExperimentConfig c) : HarnessModel(std::move(c)), graph_(harness_graph(config_)) {
    Rng rng = Rng(config_.data_seed()).fork(kDataStream);
    data_ = generate_wiring(config_.data.samples, config_.data.inputs, config_.model.hidden_nodes,
                            config_.data.outputs, config_.data.noise, rng);
    split_ = split_indices(config_.data.samples, true, rng);
    double m = 0.0, s = 0.0;
    for (std::size_t r : split_.train)
      for (std::size_t o = 0; o < data_.y.cols(); ++o) m += data_.y.at(r, o);
    const double n = static_cast<double>(split_.train.size() * data_.y.cols());
    m /= n;
    for (std::size_t r : split_.train)
      for (std::size_t o = 0; o < data_.y.cols(); ++o) s += (data_.y.at(r, o) - m) * (data_.y.at(r, o) - m);
    target_var_ = std::max(s / n, 1e-12);
  }

  void init(ParameterSet& p, Rng& rng) const override {
    const auto in = graph_.in_edges();
    for (std::size_t v : gated_nodes(graph_)) {
      const double k = static_cast<double>(in[v].size());
      Tensor alpha = rng.normal_tensor(Shape{in[v].size()}, 1.0 / std::sqrt(k));
      if (learned_gates()) {
        p.add(key(v, "alpha"), alpha);
        p.add(key(v, "beta"), Tensor::vector({config_.model.init_beta}));
      } else {
        p.add(key(v, "weight"), alpha);
      }
    }
  }

  std::size_t train_size() const override { return split_.train.size(); }

  StepLoss loss(Tape& tape, const ParameterSet& p, const std::vector<Var>& v,
                const std::vector<std::size_t>& batch) const override {
    std::vector<std::size_t> rows;
    for (std::size_t b : batch) rows.push_back(split_.train[b]);
    std::vector<Var> weights, alphas;
    for (std::size_t n : gated_nodes(graph_)) {
      if (learned_gates()) {
        Var alpha = v[p.index(key(n, "alpha"))];
        weights.push_back(
            gate_values(alpha, v[p.index(key(n, "beta"))], GateMode::signed_magnitude, grad_mode()).a);
        alphas.push_back(alpha);
      } else {
        weights.push_back(v[p.index(key(n, "weight"))]);
      }
    }
    Var w = concat(weights);
    Var pred = wiring_forward(graph_, w, tape.constant(take(data_.x, rows)));
    Var diff = pred - tape.constant(take(data_.y, rows));
    StepLoss out;
    out.prediction = mean(diff * diff);
    if (has_penalty()) out.penalty = penalty(spec(), config_.reg_target == RegTarget::alpha ? concat(alphas) : w);
    return out;
  }

  void prox(ParameterSet& p, double eta) const override {
    if (!is_prox(config_.method)) return;
    const ProxKind kind = config_.method == Method::prox_l1      ? ProxKind::l1
                          : config_.method == Method::prox_group ? ProxKind::group_l21
                                                                 : ProxKind::exclusive_l12_explicit;
    ProxSpec s{kind, config_.regularizer.lambda, eta, {}};
    for (std::size_t n : gated_nodes(graph_)) {
      Tensor& w = p.value(key(n, "weight"));
      w = prox_step(s, w);
    }
  }

  Evaluation evaluate(const ParameterSet& p, SplitPart part) const override {
    const auto& idx = part == SplitPart::train ? split_.train : part == SplitPart::valid ? split_.valid : split_.test;
    const Tensor pred = wiring_forward(graph_, wiring_weights(config_, p), take(data_.x, idx));
    const Tensor y = take(data_.y, idx);
    double s = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
    Evaluation e;
    e.error = s / static_cast<double>(y.numel()) / target_var_;
    return e;
  }

  SparsityReport sparsity(const ParameterSet& p) const override {
    const Tensor w = wiring_weights(config_, p);
    SparsityReport r = sparsity_report(w);
    const auto in = graph_.in_edges();
    for (std::size_t v : gated_nodes(graph_)) {
      bool dead = true;
      for (std::size_t e : in[v]) dead = dead && w[e] == 0.0;
      r.degenerate_groups += dead;
    }
    return r;
  }

 private:
  RegularizerSpec spec() const {
    RegularizerSpec s = config_.regularizer;
    if (s.kind == RegKind::group_l21 || s.kind == RegKind::exclusive_l12) {
      std::size_t offset = 0;
      const auto in = graph_.in_edges();
      for (std::size_t v : gated_nodes(graph_)) {
        std::vector<std::size_t> g;
        for (std::size_t k = 0; k < in[v].size(); ++k) g.push_back(offset + k);
        offset += in[v].size();
        s.groups.push_back(std::move(g));
      }
    }
    return s;
  }

  static Tensor take(const Tensor& m, const std::vector<std::size_t>& rows) {
    std::vector<double> d;
    d.reserve(rows.size() * m.cols());
    for (std::size_t r : rows)
      for (std::size_t j = 0; j < m.cols(); ++j) d.push_back(m.at(r, j));
    return Tensor::matrix(rows.size(), m.cols(), std::move(d));
  }

  WiringGraph graph_;
  WiringData data_;
  Split split_;
  double target_var_ = 1.0;
};

}  // namespace

Tensor wiring_weights(const ExperimentConfig& c, const ParameterSet& p) {
  const WiringGraph g = harness_graph(c);
  std::vector<double> w;
  for (std::size_t v : gated_nodes(g)) {
    Tensor part;
    if (p.contains(key(v, "weight"))) {
      part = p.value(key(v, "weight"));
    } else {
      GateGroup grp{p.value(key(v, "alpha")), p.value(key(v, "beta"))[0], GateMode::signed_magnitude,
                    GradMode::exact};
      part = gates_signed(grp).a;
    }
    w.insert(w.end(), part.data().begin(), part.data().end());
  }
  return Tensor::vector(std::move(w));
}

std::unique_ptr<HarnessModel> make_wiring_harness(const ExperimentConfig& c) {
  return std::make_unique<WiringHarness>(c);
}

}  // namespace sparsegrad
