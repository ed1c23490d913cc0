#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsegrad/normalization.hpp"
#include "sparsegrad/optim.hpp"
#include "sparsegrad/regularizers.hpp"

namespace sparsegrad {

enum class Harness { channel, wiring, gcn };
enum class Method {
  ds_exact,
  ds_rectified,
  prox_l1,
  prox_group,
  prox_exclusive,
  dense_baseline,
  fixed_adjacency_baseline,
};
/// What the penalty reads: gate values (a, or the adjacency) or the free
/// parameters alpha.
enum class RegTarget { gates, alpha };

std::string to_string(Harness h);
std::string to_string(Method m);
std::string to_string(RegTarget t);
std::string to_string(AdjacencyForm f);
Harness harness_from_string(const std::string& s);
Method method_from_string(const std::string& s);
RegTarget reg_target_from_string(const std::string& s);
AdjacencyForm adjacency_form_from_string(const std::string& s);

bool is_prox(Method m);
bool is_ds(Method m);

struct ModelConfig {
  std::size_t width = 32;        // channel: channels per hidden layer
  std::size_t layers = 3;        // channel: hidden layers
  std::size_t hidden_nodes = 16; // wiring
  std::size_t gcn_hidden = 16;
  std::size_t blocks = 5;
  std::size_t head_layers = 3;
  double init_beta = -4.0;       // threshold parameter start for learned gate groups
};

struct DataConfig {
  std::size_t samples = 1200;  // channel, wiring
  std::size_t features = 10;   // channel
  std::size_t inputs = 4;      // wiring
  std::size_t outputs = 1;     // wiring
  std::size_t nodes = 30;      // gcn
  std::size_t steps = 1200;    // gcn
  std::size_t history = 8;     // gcn
  double noise = 0.05;
  double mixing = 0.6;         // gcn
  double persistence = 0.95;   // gcn
  std::uint64_t seed = 0;      // 0: derive from the run seed
};

struct ExperimentConfig {
  Harness harness = Harness::channel;
  Method method = Method::ds_exact;
  RegularizerSpec regularizer;
  RegTarget reg_target = RegTarget::gates;
  AdjacencyForm adjacency_form = AdjacencyForm::exponential;
  bool free_gates = false;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  Schedule schedule;
  std::vector<double> sweep;
  ModelConfig model;
  DataConfig data;

  /// Harness defaults: epoch budget, optimizer, schedule, regularizer.
  static ExperimentConfig defaults(Harness h);
  void validate() const;
  std::uint64_t data_seed() const { return data.seed != 0 ? data.seed : seed; }
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Starts from the defaults of the document's harness; unknown keys throw.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// key=value with dotted paths ("regularizer.lambda=0.1"); "lambda" is short
/// for regularizer.lambda. Values parse as JSON, falling back to a string.
ExperimentConfig apply_overrides(const ExperimentConfig& c, const std::vector<std::string>& overrides);

/// SPARSEGRAD_SEED, when set, replaces the seed.
ExperimentConfig apply_seed_env(ExperimentConfig c);

}  // namespace sparsegrad
