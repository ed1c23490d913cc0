#pragma once

// The three training harnesses behind one interface so that the experiment
// runner, the checkpoint loader and the tests drive them the same way.

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "sparsegrad/autodiff.hpp"
#include "sparsegrad/channel.hpp"
#include "sparsegrad/config.hpp"
#include "sparsegrad/data.hpp"
#include "sparsegrad/optim.hpp"
#include "sparsegrad/rng.hpp"
#include "sparsegrad/wiring.hpp"

namespace sparsegrad {

struct SparsityReport {
  double sparsity_rate = 0.0;  // exact zeros / total
  std::size_t nonzero_count = 0;
  std::size_t total = 0;
  std::size_t remaining_parameters = 0;  // after structurally deleting dead units
  std::size_t degenerate_groups = 0;
};

struct Evaluation {
  double error = 0.0;
  double lr_score_k1 = std::numeric_limits<double>::quiet_NaN();
  double lr_score_k2 = std::numeric_limits<double>::quiet_NaN();
};

struct StepLoss {
  ad::Var prediction;
  std::optional<ad::Var> penalty;  // unweighted; the runner multiplies by lambda
  std::vector<Tensor> batch_stats;
};

enum class SplitPart { train, valid, test };

class HarnessModel {
 public:
  explicit HarnessModel(ExperimentConfig config) : config_(std::move(config)) {}
  virtual ~HarnessModel() = default;

  const ExperimentConfig& config() const noexcept { return config_; }

  /// Registers and initializes every parameter and buffer.
  virtual void init(ParameterSet& params, Rng& rng) const = 0;
  /// false for buffers the optimizer must not touch.
  virtual std::vector<bool> trainable(const ParameterSet& params) const;
  virtual std::size_t train_size() const = 0;
  virtual StepLoss loss(ad::Tape& tape, const ParameterSet& params, const std::vector<ad::Var>& vars,
                        const std::vector<std::size_t>& batch) const = 0;
  virtual void after_step(ParameterSet&, const StepLoss&) const {}
  /// Proximal update with step eta for prox-* methods.
  virtual void prox(ParameterSet&, double) const {}
  virtual Evaluation evaluate(const ParameterSet& params, SplitPart part) const = 0;
  virtual SparsityReport sparsity(const ParameterSet& params) const = 0;

 protected:
  GradMode grad_mode() const {
    return config_.method == Method::ds_rectified ? GradMode::rectified : GradMode::exact;
  }
  bool learned_gates() const { return is_ds(config_.method) && !config_.free_gates; }
  bool has_penalty() const { return is_ds(config_.method) && config_.regularizer.lambda > 0.0; }

  ExperimentConfig config_;
};

std::unique_ptr<HarnessModel> make_harness(const ExperimentConfig& config);

/// Frozen, tape-free channel network for a parameter set of the channel harness.
ChannelNet channel_net(const ExperimentConfig& config, const ParameterSet& params);
/// Edge weights of the wiring harness, in edge order.
Tensor wiring_weights(const ExperimentConfig& config, const ParameterSet& params);
/// Unnormalized adjacency of the gcn harness.
Tensor gcn_adjacency(const ExperimentConfig& config, const ParameterSet& params);

SparsityReport sparsity_report(const ChannelNet& net);
/// Gate or edge vector: counts exact zeros.
SparsityReport sparsity_report(const Tensor& gates);

}  // namespace sparsegrad
