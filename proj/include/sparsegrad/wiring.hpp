#pragma once

// Scalar-node directed acyclic network: node v computes
// y_v = sum over in-edges (u, v) of w_uv x_u, then x_v = act(y_v).
// Input nodes take their value from the input batch.

#include <cstddef>
#include <vector>

#include "sparsegrad/autodiff.hpp"
#include "sparsegrad/rng.hpp"
#include "sparsegrad/tensor.hpp"

namespace sparsegrad {

enum class NodeKind { input, hidden, output };
enum class Activation { relu, identity };

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
};

struct WiringGraph {
  std::vector<NodeKind> nodes;
  std::vector<Edge> edges;
  Activation hidden_activation = Activation::relu;  // output nodes are always identity

  std::size_t size() const noexcept { return nodes.size(); }
  std::vector<std::size_t> nodes_of(NodeKind kind) const;
  /// Edge indices entering each node.
  std::vector<std::vector<std::size_t>> in_edges() const;
  /// Kahn ordering; ValidationError on a cycle or a bad edge.
  std::vector<std::size_t> topological_order() const;
};

/// Every hidden node reads from all inputs and all earlier hidden nodes; every
/// output reads from all hidden nodes. Edges are stored grouped by
/// destination in node order.
WiringGraph complete_dag(std::size_t inputs, std::size_t hidden, std::size_t outputs);

/// x: batch x inputs, returns batch x outputs.
Tensor wiring_forward(const WiringGraph& g, const Tensor& weights, const Tensor& x);
ad::Var wiring_forward(const WiringGraph& g, ad::Var weights, ad::Var x);

/// Fraction of edge weights that are exactly zero.
double edge_sparsity(const Tensor& weights);

struct WiringData {
  Tensor x;  // samples x inputs
  Tensor y;  // samples x outputs
  WiringGraph teacher;
  Tensor teacher_weights;
};

/// Targets come from a randomly thinned teacher on the complete DAG plus
/// Gaussian noise.
WiringData generate_wiring(std::size_t samples, std::size_t inputs, std::size_t hidden, std::size_t outputs,
                           double noise, Rng& rng);

}  // namespace sparsegrad
