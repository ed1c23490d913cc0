#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparsegrad/config.hpp"
#include "sparsegrad/harness.hpp"
#include "sparsegrad/optim.hpp"

namespace sparsegrad {

struct MetricsRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double eval_error = 0.0;
  double sparsity_rate = 0.0;
  std::size_t nonzero_count = 0;
  double lr_score_k1 = std::numeric_limits<double>::quiet_NaN();
  double lr_score_k2 = std::numeric_limits<double>::quiet_NaN();
  std::size_t degenerate_group_count = 0;

  /// Field-wise equality that treats NaN == NaN and compares bits otherwise.
  bool identical(const MetricsRecord& o) const;
};

inline constexpr const char* kMetricsHeader =
    "epoch,train_loss,eval_error,sparsity_rate,nonzero_count,lr_score_k1,lr_score_k2,degenerate_group_count";

std::string to_csv_row(const MetricsRecord& r);
nlohmann::json to_json(const MetricsRecord& r);

struct RunOptions {
  std::string output_dir;  // empty: nothing is written
  bool quiet = true;       // progress lines on stderr when false
};

struct RunResult {
  ExperimentConfig config;
  std::vector<MetricsRecord> series;
  MetricsRecord final_metrics;
  double test_error = 0.0;
  SparsityReport sparsity;
  ParameterSet params;
  std::string checkpoint_path;
};

/// Trains one configuration. ds methods minimize L + lambda * R; prox methods
/// take a gradient step on L and then apply the proximal operator, once per
/// mini-batch. A non-finite loss aborts with NumericError after writing a
/// summary marked "aborted".
RunResult run(const ExperimentConfig& config, const RunOptions& options = {});

/// Runs every configuration, `threads` at a time (0: hardware concurrency).
/// Results come back in input order.
std::vector<RunResult> run_many(const std::vector<ExperimentConfig>& configs, const RunOptions& options,
                                std::size_t threads = 0);

/// One run per lambda in config.sweep, each in its own output subdirectory.
std::vector<RunResult> run_sweep(const ExperimentConfig& config, const RunOptions& options, std::size_t threads = 0);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& series);
nlohmann::json summary_json(const RunResult& r);

// Checkpoints are JSON documents:
//   {"format": "sparsegrad-checkpoint", "version": 1, "config": {...},
//    "parameters": [{"name": ..., "shape": [...], "data": [...]}, ...]}
// Doubles are written with round-trip precision.
void save_checkpoint(const std::string& path, const ExperimentConfig& config, const ParameterSet& params);
std::pair<ExperimentConfig, ParameterSet> load_checkpoint(const std::string& path);

/// Metrics of a checkpoint on the test split.
nlohmann::json evaluate_checkpoint(const std::string& path);

SparsityReport sparsity_report(const ExperimentConfig& config, const ParameterSet& params);

enum class Aggregation { median, mean };
std::string to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

struct ComparisonRow {
  std::string method;
  double lambda = 0.0;
  std::size_t runs = 0;
  double sparsity_rate = 0.0;
  double nonzero_count = 0.0;
  double eval_error = 0.0;
  double test_error = 0.0;
  double lr_score_k1 = std::numeric_limits<double>::quiet_NaN();
  double lr_score_k2 = std::numeric_limits<double>::quiet_NaN();
};

struct ComparisonTable {
  Harness harness = Harness::channel;
  Aggregation aggregation = Aggregation::median;
  std::vector<ComparisonRow> rows;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Aggregates finished runs per (method, lambda) in first-seen order.
ComparisonTable compare_results(const std::vector<RunResult>& results, Aggregation aggregation);
/// Needs at least two configurations, all on the same harness.
ComparisonTable compare_methods(const std::vector<ExperimentConfig>& configs, Aggregation aggregation,
                                std::size_t threads = 0);

enum class CalibrationMetric { sparsity_rate, nonzero_count };

struct Calibration {
  double lambda = 0.0;
  RunResult result;
  std::size_t runs = 0;
  bool matched = false;
};

/// Bisection on log(lambda) in [lo, hi] until the final metric is within
/// rel_tol of `target`, starting from `start` (geometric midpoint when NaN).
/// Assumes sparsity grows with lambda.
Calibration calibrate_lambda(const ExperimentConfig& base, CalibrationMetric metric, double target, double rel_tol,
                             double lo, double hi, std::size_t max_runs,
                             double start = std::numeric_limits<double>::quiet_NaN());

}  // namespace sparsegrad
