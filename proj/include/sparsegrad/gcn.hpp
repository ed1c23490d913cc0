#pragma once

// Graph convolutional network with one adjacency shared by every block:
// input head (per node) -> blocks H <- F(A H W) -> concat(block outputs)
// -> output head (per node). Features of a batch of B graphs are stacked as
// (B * N) x F matrices, graph by graph.

#include <cstddef>
#include <vector>

#include "sparsegrad/autodiff.hpp"
#include "sparsegrad/rng.hpp"
#include "sparsegrad/tensor.hpp"
#include "sparsegrad/wiring.hpp"

namespace sparsegrad {

struct DenseLayer {
  Tensor weight;  // in x out
  Tensor bias;    // out
};

struct GcnModel {
  std::vector<DenseLayer> input_head;
  std::vector<Tensor> blocks;  // W^l, hidden x hidden
  std::vector<DenseLayer> output_head;
  Activation activation = Activation::relu;
};

struct GcnSizes {
  std::size_t features = 8;
  std::size_t hidden = 16;
  std::size_t blocks = 5;
  std::size_t head_layers = 3;
};

GcnModel init_gcn(const GcnSizes& sizes, Rng& rng);

struct GcnVars {
  std::vector<ad::Var> input_w, input_b;
  std::vector<ad::Var> blocks;
  std::vector<ad::Var> output_w, output_b;
};

struct GcnOutput {
  ad::Var prediction;                // (B * N) x out
  std::vector<ad::Var> block_outputs;  // each (B * N) x hidden
};

/// The activation follows every layer except the last layer of the output head.
GcnOutput gcn_forward(const GcnVars& vars, Activation act, ad::Var a, ad::Var x, std::size_t batch);
Tensor gcn_forward(const GcnModel& model, const Tensor& a, const Tensor& x, std::size_t batch);

GcnVars bind_constants(ad::Tape& tape, const GcnModel& model);

}  // namespace sparsegrad
