#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "sparsegrad/config.hpp"
#include "sparsegrad/error.hpp"
#include "sparsegrad/experiments.hpp"

using namespace sparsegrad;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(Harness h, Method m = Method::ds_exact) {
  ExperimentConfig c = ExperimentConfig::defaults(h);
  c.method = m;
  c.epochs = 4;
  if (h == Harness::gcn) {
    c.epochs = 2;
    c.data.nodes = 8;
    c.data.steps = 200;
    c.model.blocks = 2;
  } else {
    c.data.samples = 300;
  }
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sparsegrad_test_" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("config survives a JSON round trip") {
  for (Harness h : {Harness::channel, Harness::wiring, Harness::gcn}) {
    ExperimentConfig c = ExperimentConfig::defaults(h);
    c.seed = 42;
    c.sweep = {0.01, 0.02};
    c.regularizer.lambda = 0.125;
    const nlohmann::json j = to_json(c);
    CHECK(to_json(config_from_json(j)) == j);
    CHECK(to_json(config_from_json(nlohmann::json::parse(j.dump()))) == j);
  }
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"harness", "channel"}, {"bogus", 1}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"harness", "nowhere"}}), ValidationError);
  ExperimentConfig c = ExperimentConfig::defaults(Harness::channel);
  c.method = Method::prox_l1;
  c.regularizer.kind = RegKind::lp;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ExperimentConfig::defaults(Harness::channel);
  c.regularizer.lambda = -0.1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("overrides use dotted keys and a lambda shorthand") {
  const ExperimentConfig c = apply_overrides(ExperimentConfig::defaults(Harness::gcn),
                                             {"lambda=0.075", "schedule.lr=0.001", "method=ds-rectified", "data.nodes=12"});
  CHECK(c.regularizer.lambda == 0.075);
  CHECK(c.schedule.lr == 0.001);
  CHECK(c.method == Method::ds_rectified);
  CHECK(c.data.nodes == 12);
  CHECK_THROWS_AS(apply_overrides(c, {"nonsense"}), ValidationError);
}

TEST_CASE("sparsity report counts exact zeros") {
  const SparsityReport r = sparsity_report(Tensor::vector({1, 0, 2, 0, 3, 4, 0, 5, 6, 7}));
  CHECK(r.sparsity_rate == doctest::Approx(0.3));
  CHECK(r.nonzero_count == 7);
  CHECK(r.total == 10);
}

TEST_CASE("fresh init has no zero gates; a saturated threshold zeroes all of them") {
  const ExperimentConfig c = small(Harness::channel);
  const auto h = make_harness(c);
  ParameterSet p;
  Rng rng(1);
  h->init(p, rng);
  CHECK(h->sparsity(p).sparsity_rate == 0.0);
  for (auto& param : p.all())
    if (param.name.ends_with(".beta")) param.value[0] = 50.0;
  CHECK(h->sparsity(p).sparsity_rate == 1.0);
}

TEST_CASE("runs are deterministic under a fixed seed") {
  for (Harness h : {Harness::channel, Harness::wiring, Harness::gcn}) {
    const ExperimentConfig c = small(h);
    const RunResult a = run(c), b = run(c);
    REQUIRE(a.series.size() == b.series.size());
    for (std::size_t i = 0; i < a.series.size(); ++i) CHECK(a.series[i].identical(b.series[i]));
    CHECK(a.test_error == b.test_error);
  }
}

TEST_CASE("unregularized ds training leaves the channel net dense") {
  ExperimentConfig c = ExperimentConfig::defaults(Harness::channel);
  c.regularizer.lambda = 0.0;
  c.epochs = 40;
  CHECK(run(c).sparsity.sparsity_rate <= 0.05);
}

TEST_CASE("with lambda = 0 the l1 prox step changes nothing") {
  ExperimentConfig ds = small(Harness::channel);
  ds.free_gates = true;
  ds.regularizer.lambda = 0.0;
  ExperimentConfig px = ds;
  px.method = Method::prox_l1;
  px.free_gates = false;
  const RunResult a = run(ds), b = run(px);
  CHECK(a.final_metrics.train_loss == b.final_metrics.train_loss);
  CHECK(a.test_error == b.test_error);
}

TEST_CASE("outputs, checkpoint and evaluation agree") {
  const fs::path dir = scratch("outputs");
  const ExperimentConfig c = small(Harness::wiring);
  const RunResult r = run(c, RunOptions{dir.string(), true});
  CHECK(fs::exists(dir / "metrics.csv"));
  const nlohmann::json s = read_json(dir / "summary.json");
  CHECK(s["status"] == "ok");
  CHECK(s["seed"] == c.seed);

  const auto [cc, params] = load_checkpoint(r.checkpoint_path);
  CHECK(to_json(cc) == to_json(c));
  for (std::size_t i = 0; i < params.size(); ++i) CHECK(params[i].value == r.params[i].value);
  const nlohmann::json e = evaluate_checkpoint(r.checkpoint_path);
  CHECK(e["test_error"].get<double>() == r.test_error);

  std::ofstream(dir / "broken.json") << "{\"format\": \"something else\"}";
  CHECK_THROWS_AS(load_checkpoint((dir / "broken.json").string()), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("a diverging run aborts with a diagnostic summary") {
  const fs::path dir = scratch("abort");
  ExperimentConfig c = small(Harness::wiring);
  c.schedule.lr = 1e200;
  c.schedule.momentum = 0.0;
  CHECK_THROWS_AS(run(c, RunOptions{dir.string(), true}), NumericError);
  CHECK(read_json(dir / "summary.json")["status"] == "aborted");
  fs::remove_all(dir);
}

TEST_CASE("metrics rows write NaN as empty fields") {
  MetricsRecord m;
  m.epoch = 3;
  m.train_loss = 0.5;
  const std::string row = to_csv_row(m);
  CHECK(row.starts_with("3,0.5,"));
  CHECK(row.find("nan") == std::string::npos);
  CHECK(to_json(m)["lr_score_k1"].is_null());
  MetricsRecord n = m;
  CHECK(m.identical(n));
  n.train_loss = 0.25;
  CHECK_FALSE(m.identical(n));
}

TEST_CASE("comparison tables aggregate per method and reject mixed harnesses") {
  ExperimentConfig a = small(Harness::channel);
  ExperimentConfig b = small(Harness::channel, Method::prox_l1);
  const ComparisonTable t = compare_methods({a, b}, Aggregation::median, 1);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].method == "ds-exact");
  CHECK(t.rows[1].method == "prox-l1");
  CHECK(t.to_csv().starts_with("method,lambda,runs,aggregation"));
  CHECK_THROWS_AS(compare_methods({a, small(Harness::wiring)}, Aggregation::median, 1), ValidationError);
  CHECK_THROWS_AS(compare_methods({a}, Aggregation::median, 1), ValidationError);
}

TEST_CASE("median and mean aggregation over seeds") {
  ExperimentConfig c = small(Harness::channel);
  std::vector<RunResult> rs;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    c.seed = s;
    rs.push_back(run(c));
  }
  std::vector<double> errs;
  for (const auto& r : rs) errs.push_back(r.test_error);
  std::sort(errs.begin(), errs.end());
  CHECK(compare_results(rs, Aggregation::median).rows[0].test_error == errs[1]);
  CHECK(compare_results(rs, Aggregation::mean).rows[0].test_error ==
        doctest::Approx((errs[0] + errs[1] + errs[2]) / 3.0));
  CHECK(compare_results(rs, Aggregation::mean).rows[0].runs == 3);
}

TEST_CASE("seed from the environment replaces the config seed") {
  ::setenv("SPARSEGRAD_SEED", "99", 1);
  CHECK(apply_seed_env(ExperimentConfig::defaults(Harness::wiring)).seed == 99);
  ::unsetenv("SPARSEGRAD_SEED");
  CHECK(apply_seed_env(ExperimentConfig::defaults(Harness::wiring)).seed == 1);
}
