#include "sparsegrad/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "harness_common.hpp"
#include "sparsegrad/error.hpp"

namespace sparsegrad {

using nlohmann::json;
namespace fs = std::filesystem;

std::unique_ptr<HarnessModel> make_harness(const ExperimentConfig& c) {
  c.validate();
  switch (c.harness) {
    case Harness::channel: return make_channel_harness(c);
    case Harness::wiring: return make_wiring_harness(c);
    case Harness::gcn: return make_gcn_harness(c);
  }
  throw ValidationError("unknown harness");
}

std::vector<bool> HarnessModel::trainable(const ParameterSet& params) const {
  return std::vector<bool>(params.size(), true);
}

namespace {

bool same_double(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string lambda_dir(double l) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "lambda_%g", l);
  return buf;
}

}  // namespace

bool MetricsRecord::identical(const MetricsRecord& o) const {
  return epoch == o.epoch && same_double(train_loss, o.train_loss) && same_double(eval_error, o.eval_error) &&
         same_double(sparsity_rate, o.sparsity_rate) && nonzero_count == o.nonzero_count &&
         same_double(lr_score_k1, o.lr_score_k1) && same_double(lr_score_k2, o.lr_score_k2) &&
         degenerate_group_count == o.degenerate_group_count;
}

std::string to_csv_row(const MetricsRecord& r) {
  std::ostringstream s;
  s << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.eval_error) << ',' << fmt(r.sparsity_rate) << ','
    << r.nonzero_count << ',' << fmt(r.lr_score_k1) << ',' << fmt(r.lr_score_k2) << ',' << r.degenerate_group_count;
  return s.str();
}

json to_json(const MetricsRecord& r) {
  return json{{"epoch", r.epoch},
              {"train_loss", num_or_null(r.train_loss)},
              {"eval_error", num_or_null(r.eval_error)},
              {"sparsity_rate", r.sparsity_rate},
              {"nonzero_count", r.nonzero_count},
              {"lr_score_k1", num_or_null(r.lr_score_k1)},
              {"lr_score_k2", num_or_null(r.lr_score_k2)},
              {"degenerate_group_count", r.degenerate_group_count}};
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& series) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << kMetricsHeader << '\n';
  for (const auto& r : series) out << to_csv_row(r) << '\n';
}

json summary_json(const RunResult& r) {
  json fm = to_json(r.final_metrics);
  fm["test_error"] = num_or_null(r.test_error);
  fm["remaining_parameters"] = r.sparsity.remaining_parameters;
  fm["total_gates"] = r.sparsity.total;
  return json{{"config", to_json(r.config)},
              {"final_metrics", fm},
              {"checkpoint_path", r.checkpoint_path.empty() ? json(nullptr) : json(r.checkpoint_path)},
              {"seed", r.config.seed}};
}

void save_checkpoint(const std::string& path, const ExperimentConfig& config, const ParameterSet& params) {
  json ps = json::array();
  for (const auto& p : params.all()) {
    ps.push_back(json{{"name", p.name}, {"shape", p.value.shape()}, {"data", p.value.values()}});
  }
  json doc{{"format", "sparsegrad-checkpoint"}, {"version", 1}, {"config", to_json(config)}, {"parameters", ps}};
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint '" + path + "'");
  out << doc.dump(1) << '\n';
}

std::pair<ExperimentConfig, ParameterSet> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "sparsegrad-checkpoint" || doc.value("version", 0) != 1) {
    throw ValidationError("'" + path + "' is not a version 1 sparsegrad checkpoint");
  }
  ExperimentConfig config = config_from_json(doc.at("config"));
  ParameterSet params;
  try {
    for (const auto& p : doc.at("parameters")) {
      params.add(p.at("name").get<std::string>(),
                 Tensor(p.at("shape").get<Shape>(), p.at("data").get<std::vector<double>>()));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint parameters: ") + e.what());
  }
  return {config, params};
}

namespace {

// Parameters of a fresh model with values taken from `loaded` by name.
ParameterSet adopt(const HarnessModel& h, const ParameterSet& loaded) {
  ParameterSet fresh;
  Rng rng(0);
  h.init(fresh, rng);
  for (auto& p : fresh.all()) {
    const Tensor& v = loaded.value(p.name);
    if (v.shape() != p.value.shape()) throw ValidationError("checkpoint parameter '" + p.name + "' has the wrong shape");
    p.value = v;
  }
  return fresh;
}

MetricsRecord make_record(std::size_t epoch, double train_loss, const Evaluation& e, const SparsityReport& s) {
  MetricsRecord r;
  r.epoch = epoch;
  r.train_loss = train_loss;
  r.eval_error = e.error;
  r.sparsity_rate = s.sparsity_rate;
  r.nonzero_count = s.nonzero_count;
  r.lr_score_k1 = e.lr_score_k1;
  r.lr_score_k2 = e.lr_score_k2;
  r.degenerate_group_count = s.degenerate_groups;
  return r;
}

void write_outputs(const RunOptions& o, RunResult& r, bool aborted, const std::string& error) {
  if (o.output_dir.empty()) return;
  fs::create_directories(o.output_dir);
  write_metrics_csv((fs::path(o.output_dir) / "metrics.csv").string(), r.series);
  if (!aborted) {
    r.checkpoint_path = (fs::path(o.output_dir) / "checkpoint.json").string();
    save_checkpoint(r.checkpoint_path, r.config, r.params);
  }
  json s = summary_json(r);
  if (aborted) {
    s["status"] = "aborted";
    s["error"] = error;
  } else {
    s["status"] = "ok";
  }
  std::ofstream out(fs::path(o.output_dir) / "summary.json");
  out << s.dump(2) << '\n';
}

}  // namespace

RunResult run(const ExperimentConfig& config, const RunOptions& options) {
  const auto harness = make_harness(config);
  RunResult r;
  r.config = config;
  Rng master(config.seed);
  Rng init_rng = master.fork(kInitStream);
  Rng batch_rng = master.fork(kBatchStream);
  harness->init(r.params, init_rng);
  const std::vector<bool> trainable = harness->trainable(r.params);
  Optimizer opt(config.schedule);
  const double lambda = config.regularizer.lambda;
  const std::size_t n_train = harness->train_size();
  const std::size_t bs = std::min(config.batch_size, n_train);

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.schedule.rate(epoch, config.epochs);
    batch_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + bs <= n_train; start += bs) {
      std::vector<std::size_t> batch(order.begin() + start, order.begin() + start + bs);
      ad::Tape tape;
      const std::vector<ad::Var> vars = r.params.bind(tape);
      StepLoss sl = harness->loss(tape, r.params, vars, batch);
      ad::Var total = sl.penalty ? sl.prediction + lambda * *sl.penalty : sl.prediction;
      const double lv = total.value().item();
      if (!std::isfinite(lv)) {
        const std::string msg = "non-finite loss at epoch " + std::to_string(epoch) + " (" + to_string(config.method) +
                                ", lambda " + fmt(lambda) + ")";
        write_outputs(options, r, true, msg);
        throw NumericError(msg);
      }
      loss_sum += sl.prediction.value().item();
      ++batches;
      const ad::Gradients g = tape.backward(total);
      std::vector<Tensor> grads;
      grads.reserve(vars.size());
      for (ad::Var v : vars) grads.push_back(g[v]);
      opt.step(r.params, grads, lr, trainable);
      harness->after_step(r.params, sl);
      harness->prox(r.params, lr);
    }
    const Evaluation e = harness->evaluate(r.params, SplitPart::valid);
    r.series.push_back(make_record(epoch, loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1)), e,
                                   harness->sparsity(r.params)));
    if (!options.quiet) {
      std::cerr << "[" << to_string(config.harness) << "/" << to_string(config.method) << " seed " << config.seed
                << "] epoch " << epoch << "  " << to_csv_row(r.series.back()) << '\n';
    }
  }
  r.final_metrics = r.series.back();
  r.test_error = harness->evaluate(r.params, SplitPart::test).error;
  r.sparsity = harness->sparsity(r.params);
  write_outputs(options, r, false, "");
  return r;
}

std::vector<RunResult> run_many(const std::vector<ExperimentConfig>& configs, const RunOptions& options,
                                std::size_t threads) {
  for (const auto& c : configs) c.validate();
  std::vector<RunResult> results(configs.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      try {
        RunOptions o = options;
        if (!o.output_dir.empty() && configs.size() > 1) {
          o.output_dir = (fs::path(options.output_dir) / ("run_" + std::to_string(i))).string();
        }
        results[i] = run(configs[i], o);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

std::vector<RunResult> run_sweep(const ExperimentConfig& config, const RunOptions& options, std::size_t threads) {
  if (config.sweep.empty()) throw ValidationError("config has an empty sweep");
  std::vector<ExperimentConfig> cells;
  for (double l : config.sweep) {
    ExperimentConfig c = config;
    c.regularizer.lambda = l;
    c.sweep.clear();
    cells.push_back(c);
  }
  std::vector<RunResult> results(cells.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  // Name the output directories after lambda rather than the run index.
  std::vector<RunOptions> opts(cells.size(), options);
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!options.output_dir.empty()) opts[i].output_dir = (fs::path(options.output_dir) / lambda_dir(cells[i].regularizer.lambda)).string();
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        results[i] = run(cells[i], opts[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, cells.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

json evaluate_checkpoint(const std::string& path) {
  auto [config, loaded] = load_checkpoint(path);
  const auto h = make_harness(config);
  const ParameterSet params = adopt(*h, loaded);
  const Evaluation test = h->evaluate(params, SplitPart::test);
  const Evaluation valid = h->evaluate(params, SplitPart::valid);
  const SparsityReport s = h->sparsity(params);
  return json{{"harness", to_string(config.harness)},
              {"method", to_string(config.method)},
              {"test_error", test.error},
              {"valid_error", valid.error},
              {"sparsity_rate", s.sparsity_rate},
              {"nonzero_count", s.nonzero_count},
              {"remaining_parameters", s.remaining_parameters},
              {"lr_score_k1", num_or_null(test.lr_score_k1)},
              {"lr_score_k2", num_or_null(test.lr_score_k2)},
              {"degenerate_group_count", s.degenerate_groups}};
}

SparsityReport sparsity_report(const ExperimentConfig& config, const ParameterSet& params) {
  return make_harness(config)->sparsity(params);
}

std::string to_string(Aggregation a) { return a == Aggregation::median ? "median" : "mean"; }

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "median") return Aggregation::median;
  if (s == "mean") return Aggregation::mean;
  throw ValidationError("unknown aggregation '" + s + "'");
}

namespace {

double aggregate(std::vector<double> v, Aggregation a) {
  std::erase_if(v, [](double x) { return std::isnan(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (a == Aggregation::mean) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

ComparisonTable compare_results(const std::vector<RunResult>& results, Aggregation aggregation) {
  if (results.size() < 2) throw ValidationError("comparison needs at least two runs");
  ComparisonTable t;
  t.harness = results.front().config.harness;
  t.aggregation = aggregation;
  std::vector<std::pair<std::string, double>> keys;
  std::map<std::pair<std::string, double>, std::vector<const RunResult*>> groups;
  for (const auto& r : results) {
    if (r.config.harness != t.harness) {
      throw ValidationError("cannot compare runs from harnesses " + to_string(t.harness) + " and " +
                            to_string(r.config.harness));
    }
    const auto k = std::make_pair(to_string(r.config.method), r.config.regularizer.lambda);
    if (!groups.contains(k)) keys.push_back(k);
    groups[k].push_back(&r);
  }
  for (const auto& k : keys) {
    const auto& g = groups[k];
    auto col = [&](auto f) {
      std::vector<double> v;
      for (const RunResult* r : g) v.push_back(f(*r));
      return aggregate(v, aggregation);
    };
    ComparisonRow row;
    row.method = k.first;
    row.lambda = k.second;
    row.runs = g.size();
    row.sparsity_rate = col([](const RunResult& r) { return r.final_metrics.sparsity_rate; });
    row.nonzero_count = col([](const RunResult& r) { return static_cast<double>(r.final_metrics.nonzero_count); });
    row.eval_error = col([](const RunResult& r) { return r.final_metrics.eval_error; });
    row.test_error = col([](const RunResult& r) { return r.test_error; });
    row.lr_score_k1 = col([](const RunResult& r) { return r.final_metrics.lr_score_k1; });
    row.lr_score_k2 = col([](const RunResult& r) { return r.final_metrics.lr_score_k2; });
    t.rows.push_back(row);
  }
  return t;
}

ComparisonTable compare_methods(const std::vector<ExperimentConfig>& configs, Aggregation aggregation,
                                std::size_t threads) {
  if (configs.size() < 2) throw ValidationError("compare needs at least two configs");
  for (const auto& c : configs) {
    if (c.harness != configs.front().harness) {
      throw ValidationError("cannot compare harnesses " + to_string(configs.front().harness) + " and " +
                            to_string(c.harness));
    }
  }
  return compare_results(run_many(configs, RunOptions{}, threads), aggregation);
}

json ComparisonTable::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows) {
    rows_j.push_back(json{{"method", r.method},
                          {"lambda", r.lambda},
                          {"runs", r.runs},
                          {"sparsity_rate", r.sparsity_rate},
                          {"nonzero_count", r.nonzero_count},
                          {"eval_error", r.eval_error},
                          {"test_error", r.test_error},
                          {"lr_score_k1", num_or_null(r.lr_score_k1)},
                          {"lr_score_k2", num_or_null(r.lr_score_k2)}});
  }
  return json{{"harness", to_string(harness)}, {"aggregation", to_string(aggregation)}, {"rows", rows_j}};
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream s;
  s << "method,lambda,runs,aggregation,sparsity_rate,nonzero_count,eval_error,test_error,lr_score_k1,lr_score_k2\n";
  for (const auto& r : rows) {
    s << r.method << ',' << fmt(r.lambda) << ',' << r.runs << ',' << to_string(aggregation) << ','
      << fmt(r.sparsity_rate) << ',' << fmt(r.nonzero_count) << ',' << fmt(r.eval_error) << ',' << fmt(r.test_error)
      << ',' << fmt(r.lr_score_k1) << ',' << fmt(r.lr_score_k2) << '\n';
  }
  return s.str();
}

Calibration calibrate_lambda(const ExperimentConfig& base, CalibrationMetric metric, double target, double rel_tol,
                             double lo, double hi, std::size_t max_runs, double start) {
  if (!(lo > 0.0 && hi > lo)) throw ValidationError("calibration needs 0 < lo < hi");
  if (!(target > 0.0)) throw ValidationError("calibration target must be > 0");
  if (max_runs < 1) throw ValidationError("calibration needs at least one run");
  if (!std::isnan(start) && !(start >= lo && start <= hi)) throw ValidationError("calibration start outside [lo, hi]");
  auto value = [metric](const RunResult& r) {
    return metric == CalibrationMetric::sparsity_rate ? r.final_metrics.sparsity_rate
                                                      : static_cast<double>(r.final_metrics.nonzero_count);
  };
  // Sparsity rate grows with lambda; nonzero count shrinks.
  const bool grows = metric == CalibrationMetric::sparsity_rate;
  Calibration best;
  double best_gap = std::numeric_limits<double>::infinity();
  double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < max_runs; ++i) {
    ExperimentConfig c = base;
    c.regularizer.lambda = i == 0 && !std::isnan(start) ? start : std::exp(0.5 * (a + b));
    RunResult r = run(c);
    const double v = value(r);
    const double gap = std::abs(v - target) / target;
    if (gap < best_gap) {
      best_gap = gap;
      best.lambda = c.regularizer.lambda;
      best.result = std::move(r);
    }
    best.runs = i + 1;
    if (gap <= rel_tol) break;
    const bool too_sparse = grows ? v > target : v < target;
    (too_sparse ? b : a) = std::log(c.regularizer.lambda);
  }
  best.matched = best_gap <= rel_tol;
  return best;
}

}  // namespace sparsegrad
