#pragma once

#include <cstddef>
#include <vector>

#include "sparsegrad/rng.hpp"
#include "sparsegrad/tensor.hpp"

namespace sparsegrad {

/// Undirected graph with self-loops stored as a symmetric 0/1 matrix.
struct Graph {
  Tensor adjacency;
  std::vector<double> x, y;  // node coordinates in the unit square

  std::size_t size() const { return adjacency.rows(); }
  std::size_t edge_count() const;  // nonzero entries, self-loops included
};

/// Nodes scattered in the unit square, joined when closer than `radius`;
/// isolated components are bridged to their nearest outside node.
Graph random_geometric_graph(std::size_t n, double radius, Rng& rng);

/// Hop distances by breadth-first search; -1 marks unreachable pairs.
std::vector<std::vector<int>> geodesic_distances(const Tensor& adjacency);

/// M^k: 1 where 0 <= distance <= k.
Tensor hop_mask(const std::vector<std::vector<int>>& dist, int k);

struct TrafficParams {
  std::size_t nodes = 30;
  std::size_t steps = 2000;
  std::size_t history = 8;
  double noise = 0.05;
  double mixing = 0.6;      // weight on neighbours in one diffusion step
  double persistence = 0.95;  // pull of deviations back toward the base level
  double radius = 0.0;        // 0 picks one from the node count
};

struct TrafficData {
  Graph graph;
  Tensor series;  // steps x nodes, strictly positive
  std::vector<std::vector<int>> geodesic;

  /// Number of (history -> next step) samples.
  std::size_t sample_count(std::size_t history) const { return series.rows() - history; }
  /// Node features of sample s: nodes x history, oldest first.
  Tensor features(std::size_t s, std::size_t history) const;
  /// Next-step values of sample s.
  Tensor target(std::size_t s, std::size_t history) const;
};

/// Diffusion on a random geometric graph: deviations d from a base level obey
/// d_{t+1} = persistence * (mixing * P + (1 - mixing) I) d_t + noise, with P
/// the row-normalized adjacency. Series are shifted to stay above 0.1.
TrafficData generate_traffic(const TrafficParams& p, Rng& rng);

struct ClassifyData {
  Tensor x;                 // samples x features
  std::vector<int> labels;  // 0 or 1
};

ClassifyData generate_classify(std::size_t samples, std::size_t features, Rng& rng);

/// Chronological or shuffled 70/15/15 split into index lists.
struct Split {
  std::vector<std::size_t> train, valid, test;
};
Split split_indices(std::size_t n, bool shuffle, Rng& rng);

}  // namespace sparsegrad
