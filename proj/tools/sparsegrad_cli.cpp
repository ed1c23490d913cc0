#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sparsegrad/config.hpp"
#include "sparsegrad/data.hpp"
#include "sparsegrad/error.hpp"
#include "sparsegrad/experiments.hpp"
#include "sparsegrad/verification.hpp"
#include "sparsegrad/wiring.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sparsegrad;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int report(const std::string& title, const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    std::printf("%-28s points=%-4zu max_error=%.3e  %s\n", r.name.c_str(), r.points, r.max_error,
                r.passed() ? "ok" : "FAIL");
  }
  const bool ok = all_passed(results);
  std::printf("%s: %s\n", title.c_str(), ok ? "all checks passed" : "FAILED");
  return ok ? 0 : 2;
}

ExperimentConfig resolve(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig c = path.empty() ? ExperimentConfig::defaults(Harness::channel) : load_config(path);
  c = apply_overrides(c, overrides);
  c = apply_seed_env(c);
  c.validate();
  return c;
}

struct GenArgs {
  std::string kind = "traffic-graph";
  std::size_t nodes = 30, steps = 2000, samples = 1200, features = 10, inputs = 4, hidden = 16, outputs = 1;
  double noise = 0.05;
  std::uint64_t seed = 0;
  std::string out = "data";
};

json geodesic_json(const std::vector<std::vector<int>>& g) { return json(g); }

json matrix_json(const Tensor& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m.at(i, j));
    rows.push_back(row);
  }
  return rows;
}

void gen_data(const GenArgs& a) {
  Rng rng = Rng(a.seed).fork(1);
  const fs::path dir(a.out);
  std::ostringstream csv;
  json side{{"kind", a.kind}, {"seed", a.seed}, {"noise", a.noise}};
  if (a.kind == "traffic-graph") {
    if (a.nodes < 2 || a.steps < 2) throw ValidationError("traffic-graph needs nodes >= 2 and steps >= 2");
    if (!(a.noise >= 0.0)) throw ValidationError("noise must be >= 0");
    TrafficParams p;
    p.nodes = a.nodes;
    p.steps = a.steps;
    p.noise = a.noise;
    const TrafficData d = generate_traffic(p, rng);
    csv << "step";
    for (std::size_t i = 0; i < a.nodes; ++i) csv << ",node" << i;
    csv << '\n';
    for (std::size_t t = 0; t < d.series.rows(); ++t) {
      csv << t;
      for (std::size_t i = 0; i < a.nodes; ++i) csv << ',' << num(d.series.at(t, i));
      csv << '\n';
    }
    side["nodes"] = a.nodes;
    side["steps"] = a.steps;
    side["adjacency"] = matrix_json(d.graph.adjacency);
    side["geodesic"] = geodesic_json(d.geodesic);
    side["coordinates"] = json{{"x", d.graph.x}, {"y", d.graph.y}};
  } else if (a.kind == "classify") {
    if (a.samples < 1 || a.features < 4) throw ValidationError("classify needs samples >= 1 and features >= 4");
    const ClassifyData d = generate_classify(a.samples, a.features, rng);
    for (std::size_t j = 0; j < a.features; ++j) csv << 'x' << j << ',';
    csv << "label\n";
    for (std::size_t i = 0; i < a.samples; ++i) {
      for (std::size_t j = 0; j < a.features; ++j) csv << num(d.x.at(i, j)) << ',';
      csv << d.labels[i] << '\n';
    }
    side["samples"] = a.samples;
    side["features"] = a.features;
  } else if (a.kind == "wiring") {
    if (a.samples < 1 || a.inputs < 1 || a.outputs < 1) {
      throw ValidationError("wiring needs samples, inputs and outputs >= 1");
    }
    const WiringData d = generate_wiring(a.samples, a.inputs, a.hidden, a.outputs, a.noise, rng);
    for (std::size_t j = 0; j < a.inputs; ++j) csv << 'x' << j << ',';
    for (std::size_t j = 0; j < a.outputs; ++j) csv << 'y' << j << (j + 1 < a.outputs ? "," : "\n");
    for (std::size_t i = 0; i < a.samples; ++i) {
      for (std::size_t j = 0; j < a.inputs; ++j) csv << num(d.x.at(i, j)) << ',';
      for (std::size_t j = 0; j < a.outputs; ++j) csv << num(d.y.at(i, j)) << (j + 1 < a.outputs ? "," : "\n");
    }
    json edges = json::array();
    for (std::size_t e = 0; e < d.teacher.edges.size(); ++e) {
      if (d.teacher_weights[e] == 0.0) continue;
      edges.push_back(json{{"from", d.teacher.edges[e].from}, {"to", d.teacher.edges[e].to}, {"weight", d.teacher_weights[e]}});
    }
    side["inputs"] = a.inputs;
    side["hidden"] = a.hidden;
    side["outputs"] = a.outputs;
    side["teacher_edges"] = edges;
  } else {
    throw ValidationError("unknown data kind '" + a.kind + "' (traffic-graph, classify, wiring)");
  }
  write_text(dir / (a.kind + ".csv"), csv.str());
  write_text(dir / (a.kind + ".json"), side.dump(1) + "\n");
  std::cerr << "wrote " << (dir / (a.kind + ".csv")).string() << " and " << (dir / (a.kind + ".json")).string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparsegrad: differentiable sparsification experiments"};
  app.require_subcommand(1);

  std::string config_path, output_dir = "runs", checkpoint;
  std::vector<std::string> overrides, compare_configs;
  std::size_t threads = 0, points = 100, seeds = 1;
  std::string aggregation = "median";
  bool verbose = false;

  auto* train = app.add_subcommand("train", "train one configuration, or every lambda in its sweep");
  train->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  train->add_option("--output-dir", output_dir, "directory for metrics, summary and checkpoint");
  train->add_option("--override", overrides, "dotted.key=value, applied after the file");
  train->add_option("--threads", threads, "parallel sweep cells (0: all cores)");
  train->add_flag("--verbose", verbose, "per-epoch progress on stderr");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json from train")->required()->check(CLI::ExistingFile);
  eval->add_option("--output-dir", output_dir, "where eval.json goes");

  auto* grad = app.add_subcommand("grad-check", "autodiff against central finite differences");
  grad->add_option("--points", points, "random points per op");

  std::size_t instances = 50;
  auto* prox = app.add_subcommand("prox-check", "proximal operators against grid-search argmin");
  prox->add_option("--instances", instances, "random instances per operator and size");

  auto* sink = app.add_subcommand("sinkhorn-check", "sinkhorn and balanced normalization residuals");
  sink->add_option("--matrices", instances, "random positive matrices");

  auto* compare = app.add_subcommand("compare", "run several configs and tabulate them");
  compare->add_option("--config", compare_configs, "two or more JSON configs on one harness")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--override", overrides, "applied to every config");
  compare->add_option("--seeds", seeds, "runs per config, seeds config.seed .. config.seed + n - 1");
  compare->add_option("--aggregation", aggregation, "median or mean")->check(CLI::IsMember({"median", "mean"}));
  compare->add_option("--output-dir", output_dir, "where comparison.json and comparison.csv go");
  compare->add_option("--threads", threads, "parallel runs (0: all cores)");

  GenArgs gen;
  auto* gd = app.add_subcommand("gen-data", "write a synthetic dataset and its JSON sidecar");
  gd->add_option("--kind", gen.kind, "traffic-graph, classify or wiring");
  gd->add_option("--nodes", gen.nodes, "traffic-graph nodes");
  gd->add_option("--steps", gen.steps, "traffic-graph time steps");
  gd->add_option("--samples", gen.samples, "classify / wiring rows");
  gd->add_option("--features", gen.features, "classify features");
  gd->add_option("--inputs", gen.inputs, "wiring inputs");
  gd->add_option("--hidden", gen.hidden, "wiring hidden nodes");
  gd->add_option("--outputs", gen.outputs, "wiring outputs");
  gd->add_option("--noise", gen.noise, "noise level");
  gd->add_option("--seed", gen.seed, "generator seed");
  gd->add_option("--output-dir", gen.out, "destination directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      const ExperimentConfig c = resolve(config_path, overrides);
      RunOptions o{output_dir, !verbose};
      if (!c.sweep.empty()) {
        for (const auto& r : run_sweep(c, o, threads)) {
          std::cerr << "lambda " << r.config.regularizer.lambda << ": " << to_csv_row(r.final_metrics)
                    << "  test_error " << r.test_error << '\n';
        }
      } else {
        const RunResult r = run(c, o);
        std::cerr << kMetricsHeader << '\n' << to_csv_row(r.final_metrics) << "\ntest_error " << r.test_error << '\n';
      }
      return 0;
    }
    if (*eval) {
      const json j = evaluate_checkpoint(checkpoint);
      write_text(fs::path(output_dir) / "eval.json", j.dump(2) + "\n");
      std::cerr << j.dump(2) << '\n';
      return 0;
    }
    if (*grad) return report("grad-check", grad_check_suite(points));
    if (*prox) return report("prox-check", prox_check_suite(instances));
    if (*sink) return report("sinkhorn-check", sinkhorn_check_suite(instances));
    if (*compare) {
      if (compare_configs.size() < 2) throw ValidationError("compare needs at least two --config files");
      std::vector<ExperimentConfig> cs;
      for (const auto& p : compare_configs) {
        const ExperimentConfig base = resolve(p, overrides);
        for (std::size_t s = 0; s < seeds; ++s) {
          ExperimentConfig c = base;
          c.seed = base.seed + s;
          cs.push_back(c);
        }
      }
      const ComparisonTable t = compare_methods(cs, aggregation_from_string(aggregation), threads);
      write_text(fs::path(output_dir) / "comparison.json", t.to_json().dump(2) + "\n");
      write_text(fs::path(output_dir) / "comparison.csv", t.to_csv());
      std::cerr << t.to_csv();
      return 0;
    }
    if (*gd) {
      gen_data(gen);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
