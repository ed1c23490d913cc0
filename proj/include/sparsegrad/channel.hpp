#pragma once

// Fully connected network whose hidden channels pass through a standardize-
// then-gate transform y_i = a_i (x~_i + b_i). A channel with a_i == 0 emits
// exact zeros and can be cut out of the network.

#include <cstddef>
#include <vector>

#include "sparsegrad/autodiff.hpp"
#include "sparsegrad/tensor.hpp"

namespace sparsegrad {

inline constexpr double kNormEps = 1e-5;

struct GatedChannelLayer {
  Tensor weight;  // in x out
  Tensor bias;    // out
  Tensor mean;    // running statistics, used outside training
  Tensor var;
  Tensor gate;   // frozen gate values a
  Tensor shift;  // b

  std::size_t channels() const { return weight.cols(); }
};

/// x @ W + bias, standardized per channel, then a * (x~ + b). Training mode
/// uses batch statistics and needs at least two rows.
Tensor gated_forward(const GatedChannelLayer& layer, const Tensor& x, bool training = false);

struct ChannelNet {
  std::vector<GatedChannelLayer> layers;  // each followed by relu
  Tensor out_weight;                      // last hidden x classes
  Tensor out_bias;

  std::size_t parameter_count() const;
  std::size_t gate_count() const;
  std::size_t zero_gate_count() const;
};

Tensor channel_logits(const ChannelNet& net, const Tensor& x);

/// Removes every channel whose gate is exactly zero together with the weights
/// that read from it.
ChannelNet prune_dead_channels(const ChannelNet& net);

struct GatedVars {
  ad::Var out;
  Tensor batch_mean;
  Tensor batch_var;
};

/// Tape version of gated_forward in training mode.
GatedVars gated_forward(ad::Var x, ad::Var weight, ad::Var bias, ad::Var gate, ad::Var shift);

}  // namespace sparsegrad
