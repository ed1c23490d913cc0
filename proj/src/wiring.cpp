#include "sparsegrad/wiring.hpp"

#include <algorithm>
#include <deque>

#include "sparsegrad/error.hpp"

namespace sparsegrad {

using namespace ad;

std::vector<std::size_t> WiringGraph::nodes_of(NodeKind kind) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i] == kind) out.push_back(i);
  return out;
}

std::vector<std::vector<std::size_t>> WiringGraph::in_edges() const {
  std::vector<std::vector<std::size_t>> in(nodes.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].from >= nodes.size() || edges[e].to >= nodes.size()) {
      throw ValidationError("edge " + std::to_string(e) + " references a missing node");
    }
    in[edges[e].to].push_back(e);
  }
  return in;
}

std::vector<std::size_t> WiringGraph::topological_order() const {
  const auto in = in_edges();
  std::vector<std::size_t> indeg(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> out(nodes.size());
  for (const Edge& e : edges) {
    if (nodes[e.to] == NodeKind::input) throw ValidationError("input nodes cannot have in-edges");
    ++indeg[e.to];
    out[e.from].push_back(e.to);
  }
  std::deque<std::size_t> ready;
  for (std::size_t v = 0; v < nodes.size(); ++v)
    if (indeg[v] == 0) ready.push_back(v);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t u = ready.front();
    ready.pop_front();
    order.push_back(u);
    for (std::size_t v : out[u])
      if (--indeg[v] == 0) ready.push_back(v);
  }
  if (order.size() != nodes.size()) throw ValidationError("wiring graph contains a cycle");
  return order;
}

WiringGraph complete_dag(std::size_t inputs, std::size_t hidden, std::size_t outputs) {
  if (inputs < 1 || outputs < 1) throw ValidationError("wiring graph needs inputs and outputs");
  WiringGraph g;
  g.nodes.assign(inputs, NodeKind::input);
  g.nodes.insert(g.nodes.end(), hidden, NodeKind::hidden);
  g.nodes.insert(g.nodes.end(), outputs, NodeKind::output);
  for (std::size_t v = inputs; v < inputs + hidden; ++v)
    for (std::size_t u = 0; u < v; ++u) g.edges.push_back({u, v});
  for (std::size_t v = inputs + hidden; v < g.nodes.size(); ++v) {
    const std::size_t first = hidden > 0 ? inputs : 0;
    for (std::size_t u = first; u < inputs + hidden; ++u) g.edges.push_back({u, v});
  }
  return g;
}

namespace {

void check_inputs(const WiringGraph& g, const Tensor& weights, const Tensor& x) {
  if (weights.numel() != g.edges.size()) throw ValidationError("one weight per edge required");
  if (x.rank() != 2 || x.cols() != g.nodes_of(NodeKind::input).size()) {
    throw ValidationError("wiring input must be batch x " + std::to_string(g.nodes_of(NodeKind::input).size()));
  }
}

}  // namespace

Tensor wiring_forward(const WiringGraph& g, const Tensor& weights, const Tensor& x) {
  check_inputs(g, weights, x);
  const auto order = g.topological_order();
  const auto in = g.in_edges();
  const auto inputs = g.nodes_of(NodeKind::input);
  const auto outputs = g.nodes_of(NodeKind::output);
  const std::size_t b = x.rows();
  std::vector<std::vector<double>> value(g.size(), std::vector<double>(b, 0.0));
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t s = 0; s < b; ++s) value[inputs[k]][s] = x.at(s, k);
  for (std::size_t v : order) {
    if (g.nodes[v] == NodeKind::input) continue;
    std::vector<double>& y = value[v];
    for (std::size_t e : in[v]) {
      const double w = weights[e];
      if (w == 0.0) continue;
      for (std::size_t s = 0; s < b; ++s) y[s] += w * value[g.edges[e].from][s];
    }
    if (g.nodes[v] == NodeKind::hidden && g.hidden_activation == Activation::relu)
      for (double& t : y) t = t > 0.0 ? t : 0.0;
  }
  Tensor out(Shape{b, outputs.size()}, 0.0);
  for (std::size_t k = 0; k < outputs.size(); ++k)
    for (std::size_t s = 0; s < b; ++s) out.at(s, k) = value[outputs[k]][s];
  return out;
}

Var wiring_forward(const WiringGraph& g, Var weights, Var x) {
  check_inputs(g, weights.value(), x.value());
  const auto order = g.topological_order();
  const auto in = g.in_edges();
  const auto inputs = g.nodes_of(NodeKind::input);
  const auto outputs = g.nodes_of(NodeKind::output);
  const std::size_t b = x.value().rows();
  Tape& tape = *weights.tape();

  std::vector<Var> column(g.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) column[inputs[k]] = slice_cols(x, k, k + 1);
  for (std::size_t v : order) {
    if (g.nodes[v] == NodeKind::input) continue;
    if (in[v].empty()) {
      column[v] = tape.constant(Tensor(Shape{b, 1}, 0.0));
      continue;
    }
    std::vector<Var> sources;
    for (std::size_t e : in[v]) sources.push_back(column[g.edges[e].from]);
    Var w = reshape(gather(weights, in[v]), Shape{in[v].size(), 1});
    Var y = matmul(concat(sources, 1), w);
    column[v] = (g.nodes[v] == NodeKind::hidden && g.hidden_activation == Activation::relu) ? relu(y) : y;
  }
  std::vector<Var> outs;
  for (std::size_t o : outputs) outs.push_back(column[o]);
  return concat(outs, 1);
}

double edge_sparsity(const Tensor& weights) {
  if (weights.numel() == 0) return 0.0;
  std::size_t z = 0;
  for (double w : weights.data()) z += w == 0.0;
  return static_cast<double>(z) / static_cast<double>(weights.numel());
}

WiringData generate_wiring(std::size_t samples, std::size_t inputs, std::size_t hidden, std::size_t outputs,
                           double noise, Rng& rng) {
  if (samples < 10) throw ValidationError("wiring data needs at least 10 samples");
  if (!(noise >= 0.0)) throw ValidationError("wiring noise must be >= 0");
  WiringData d;
  d.teacher = complete_dag(inputs, hidden, outputs);
  const auto in = d.teacher.in_edges();
  d.teacher_weights = Tensor(Shape{d.teacher.edges.size()}, 0.0);
  // Each non-input node keeps a few random in-edges of moderate magnitude.
  for (std::size_t v = 0; v < d.teacher.size(); ++v) {
    std::vector<std::size_t> es = in[v];
    if (es.empty()) continue;
    rng.shuffle(es);
    const std::size_t keep = std::min<std::size_t>(es.size(), 2 + rng.index(2));
    for (std::size_t k = 0; k < keep; ++k) {
      const double mag = rng.uniform(0.5, 1.5);
      d.teacher_weights[es[k]] = rng.uniform() < 0.5 ? -mag : mag;
    }
  }
  d.x = rng.normal_tensor(Shape{samples, inputs}, 1.0);
  d.y = wiring_forward(d.teacher, d.teacher_weights, d.x);
  for (double& v : d.y.data()) v += noise * rng.normal();
  return d;
}

}  // namespace sparsegrad
