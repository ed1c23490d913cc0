#include <algorithm>
#include <cmath>
#include <string>

#include "harness_common.hpp"
#include "sparsegrad/error.hpp"
#include "sparsegrad/gcn.hpp"
#include "sparsegrad/metrics.hpp"
#include "sparsegrad/normalization.hpp"
#include "sparsegrad/proximal.hpp"

namespace sparsegrad {

using namespace ad;

namespace {

TrafficData make_traffic(const ExperimentConfig& c) {
  TrafficParams tp;
  tp.nodes = c.data.nodes;
  tp.steps = c.data.steps;
  tp.history = c.data.history;
  tp.noise = c.data.noise;
  tp.mixing = c.data.mixing;
  tp.persistence = c.data.persistence;
  Rng rng = Rng(c.data_seed()).fork(kDataStream);
  return generate_traffic(tp, rng);
}

Tensor row_normalized(const Tensor& adj) { return partial_normalize(adj).first; }

bool free_adjacency(Method m) { return is_prox(m); }

// Per-line threshold start: sigmoid(beta) = sigmoid(init_beta) / N, so the
// summed row and column thresholds stay a small fraction of a line's mass.
double adjacency_beta(const ExperimentConfig& c) {
  const double s = 1.0 / (1.0 + std::exp(-c.model.init_beta)) / static_cast<double>(c.data.nodes);
  return std::log(s / (1.0 - s));
}

struct AdjacencyVars {
  Var raw;   // before normalization
  Var norm;  // what the blocks use
  std::size_t zero_lines = 0;
};

class GcnHarness final : public HarnessModel {
 public:
  explicit GcnHarness(ExperimentConfig c) : HarnessModel(std::move(c)), data_(make_traffic(config_)) {
    const std::size_t samples = data_.sample_count(config_.data.history);
    Rng unused(0);
    split_ = split_indices(samples, false, unused);
    fixed_ = row_normalized(data_.graph.adjacency);
  }

  void init(ParameterSet& p, Rng& rng) const override {
    const std::size_t n = config_.data.nodes;
    GcnSizes sizes{config_.data.history, config_.model.gcn_hidden, config_.model.blocks, config_.model.head_layers};
    const GcnModel m = init_gcn(sizes, rng);
    for (std::size_t k = 0; k < m.input_head.size(); ++k) {
      p.add("in" + std::to_string(k) + ".weight", m.input_head[k].weight);
      p.add("in" + std::to_string(k) + ".bias", m.input_head[k].bias);
    }
    for (std::size_t k = 0; k < m.blocks.size(); ++k) p.add("block" + std::to_string(k), m.blocks[k]);
    for (std::size_t k = 0; k < m.output_head.size(); ++k) {
      p.add("out" + std::to_string(k) + ".weight", m.output_head[k].weight);
      p.add("out" + std::to_string(k) + ".bias", m.output_head[k].bias);
    }
    switch (config_.method) {
      case Method::fixed_adjacency_baseline: break;
      case Method::dense_baseline: p.add("adj.alpha", Tensor(Shape{n, n}, 0.0)); break;
      case Method::prox_l1:
      case Method::prox_group:
      case Method::prox_exclusive: p.add("adj.alpha", Tensor(Shape{n, n}, 1.0)); break;
      case Method::ds_exact:
      case Method::ds_rectified: {
        const bool linear = config_.adjacency_form == AdjacencyForm::linear;
        p.add("adj.alpha", Tensor(Shape{n, n}, linear ? 1.0 : 0.0));
        if (!config_.free_gates) {
          p.add("adj.beta_row", Tensor(Shape{n}, adjacency_beta(config_)));
          p.add("adj.beta_col", Tensor(Shape{n}, adjacency_beta(config_)));
        }
        break;
      }
    }
  }

  std::size_t train_size() const override { return split_.train.size(); }

  StepLoss loss(Tape& tape, const ParameterSet& p, const std::vector<Var>& v,
                const std::vector<std::size_t>& batch) const override {
    std::vector<std::size_t> samples;
    for (std::size_t b : batch) samples.push_back(split_.train[b]);
    const AdjacencyVars adj = adjacency(tape, p, v);
    auto [x, y] = stack(samples);
    Var pred = gcn_forward(model_vars(p, v), Activation::relu, adj.norm, tape.constant(std::move(x)), samples.size())
                   .prediction;
    StepLoss out;
    out.prediction = mre_loss(pred, y);
    if (has_penalty()) {
      const std::size_t n = config_.data.nodes;
      Var target = config_.reg_target == RegTarget::alpha ? v[p.index("adj.alpha")]
                   : config_.regularizer.kind == RegKind::lp ? adj.norm
                                                             : adj.raw;
      RegularizerSpec rows = config_.regularizer, cols = config_.regularizer;
      rows.groups = row_groups(n, n);
      cols.groups = col_groups(n, n);
      if (config_.regularizer.kind == RegKind::l1) {
        out.penalty = penalty(rows, target);
      } else {
        out.penalty = 0.5 * (penalty(rows, target) + penalty(cols, target));
      }
    }
    return out;
  }

  void prox(ParameterSet& p, double eta) const override {
    if (!is_prox(config_.method)) return;
    const std::size_t n = config_.data.nodes;
    Tensor& alpha = p.value("adj.alpha");
    // Entries stay non-negative: the adjacency is alpha itself.
    for (double& a : alpha.data()) a = std::max(a, 0.0);
    ProxSpec s{ProxKind::l1, config_.regularizer.lambda, eta, {}};
    if (config_.method == Method::prox_l1) {
      alpha = prox_step(s, alpha);
      return;
    }
    s.kind = config_.method == Method::prox_group ? ProxKind::group_l21 : ProxKind::exclusive_nonneg;
    s.groups = row_groups(n, n);
    alpha = prox_step(s, alpha);
    s.groups = col_groups(n, n);
    alpha = prox_step(s, alpha);
  }

  Evaluation evaluate(const ParameterSet& p, SplitPart part) const override {
    const auto& idx = part == SplitPart::train ? split_.train : part == SplitPart::valid ? split_.valid : split_.test;
    Tape tape;
    std::vector<Var> v;
    for (const auto& q : p.all()) v.push_back(tape.constant(q.value));
    const AdjacencyVars adj = adjacency(tape, p, v);
    const GcnVars mv = model_vars(p, v);
    double err = 0.0;
    const std::size_t chunk = 64;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
      std::vector<std::size_t> samples(idx.begin() + start, idx.begin() + std::min(idx.size(), start + chunk));
      Tape t2;
      auto [x, y] = stack(samples);
      GcnVars local;
      auto c = [&t2](Var q) { return t2.constant(q.value()); };
      for (Var q : mv.input_w) local.input_w.push_back(c(q));
      for (Var q : mv.input_b) local.input_b.push_back(c(q));
      for (Var q : mv.blocks) local.blocks.push_back(c(q));
      for (Var q : mv.output_w) local.output_w.push_back(c(q));
      for (Var q : mv.output_b) local.output_b.push_back(c(q));
      Var pred = gcn_forward(local, Activation::relu, c(adj.norm), t2.constant(std::move(x)), samples.size())
                     .prediction;
      err += mre(pred.value(), y) * static_cast<double>(samples.size());
    }
    Evaluation e;
    e.error = 100.0 * err / static_cast<double>(idx.size());
    e.lr_score_k1 = relationship_score(adj.norm.value(), 1, data_.geodesic);
    e.lr_score_k2 = relationship_score(adj.norm.value(), 2, data_.geodesic);
    return e;
  }

  SparsityReport sparsity(const ParameterSet& p) const override {
    Tape tape;
    std::vector<Var> v;
    for (const auto& q : p.all()) v.push_back(tape.constant(q.value));
    const AdjacencyVars adj = adjacency(tape, p, v);
    SparsityReport r = sparsity_report(adj.raw.value());
    std::size_t dense = 0;
    for (const auto& q : p.all())
      if (q.name.rfind("adj.", 0) != 0) dense += q.value.numel();
    r.remaining_parameters = r.nonzero_count + dense;
    r.degenerate_groups = adj.zero_lines;
    return r;
  }

  const TrafficData& data() const { return data_; }

  AdjacencyVars adjacency(Tape& tape, const ParameterSet& p, const std::vector<Var>& v) const {
    AdjacencyVars out;
    if (config_.method == Method::fixed_adjacency_baseline) {
      out.raw = out.norm = tape.constant(fixed_);
      return out;
    }
    Var alpha = v[p.index("adj.alpha")];
    if (config_.method == Method::dense_baseline) {
      out.raw = exp(alpha);
    } else if (free_adjacency(config_.method)) {
      out.raw = alpha;
    } else if (config_.free_gates) {
      out.raw = config_.adjacency_form == AdjacencyForm::exponential ? exp(alpha) : relu(alpha);
    } else {
      out.raw = sparse_adjacency(alpha, v[p.index("adj.beta_row")], v[p.index("adj.beta_col")], grad_mode(),
                                 config_.adjacency_form);
    }
    UnrolledNorm un = normalize_unrolled(out.raw, NormKind::balanced, kTrainingUnroll);
    out.norm = un.a;
    out.zero_lines = un.zero_rows + un.zero_cols;
    return out;
  }

 private:
  GcnVars model_vars(const ParameterSet& p, const std::vector<Var>& v) const {
    GcnVars g;
    for (std::size_t k = 0; k < config_.model.head_layers; ++k) {
      g.input_w.push_back(v[p.index("in" + std::to_string(k) + ".weight")]);
      g.input_b.push_back(v[p.index("in" + std::to_string(k) + ".bias")]);
      g.output_w.push_back(v[p.index("out" + std::to_string(k) + ".weight")]);
      g.output_b.push_back(v[p.index("out" + std::to_string(k) + ".bias")]);
    }
    for (std::size_t k = 0; k < config_.model.blocks; ++k) g.blocks.push_back(v[p.index("block" + std::to_string(k))]);
    return g;
  }

  std::pair<Tensor, Tensor> stack(const std::vector<std::size_t>& samples) const {
    const std::size_t n = config_.data.nodes, h = config_.data.history;
    std::vector<double> x, y;
    x.reserve(samples.size() * n * h);
    y.reserve(samples.size() * n);
    for (std::size_t s : samples) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < h; ++k) x.push_back(data_.series.at(s + k, i));
        y.push_back(data_.series.at(s + h, i));
      }
    }
    return {Tensor::matrix(samples.size() * n, h, std::move(x)), Tensor::vector(std::move(y))};
  }

  TrafficData data_;
  Split split_;
  Tensor fixed_;
};

}  // namespace

Tensor gcn_adjacency(const ExperimentConfig& c, const ParameterSet& p) {
  GcnHarness h(c);
  Tape tape;
  std::vector<Var> v;
  for (const auto& q : p.all()) v.push_back(tape.constant(q.value));
  return h.adjacency(tape, p, v).raw.value();
}

std::unique_ptr<HarnessModel> make_gcn_harness(const ExperimentConfig& c) { return std::make_unique<GcnHarness>(c); }

}  // namespace sparsegrad
