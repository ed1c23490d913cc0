#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "sparsegrad_cli_test";

int cli(const std::string& args) {
  const std::string cmd = std::string(SPARSEGRAD_CLI) + " " + args + " > " + (kDir / "out.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Scratch {
  Scratch() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
  }
  ~Scratch() { fs::remove_all(kDir); }
};

}  // namespace

TEST_CASE("gen-data writes a positive traffic series and regenerates it byte for byte") {
  Scratch s;
  const std::string args = "gen-data --kind traffic-graph --nodes 30 --steps 2000 --seed 7 --output-dir ";
  REQUIRE(cli(args + (kDir / "a").string()) == 0);
  REQUIRE(cli(args + (kDir / "b").string()) == 0);
  CHECK(slurp(kDir / "a" / "traffic-graph.csv") == slurp(kDir / "b" / "traffic-graph.csv"));
  CHECK(slurp(kDir / "a" / "traffic-graph.json") == slurp(kDir / "b" / "traffic-graph.json"));

  std::istringstream csv(slurp(kDir / "a" / "traffic-graph.csv"));
  std::string line;
  std::getline(csv, line);
  std::size_t rows = 0;
  bool positive = true;
  while (std::getline(csv, line)) {
    ++rows;
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    while (std::getline(cells, cell, ',')) positive = positive && std::stod(cell) > 0.0;
  }
  CHECK(rows == 2000);
  CHECK(positive);
  const nlohmann::json side = nlohmann::json::parse(slurp(kDir / "a" / "traffic-graph.json"));
  CHECK(side["geodesic"].size() == 30);
}

TEST_CASE("invalid arguments exit with status 1") {
  Scratch s;
  CHECK(cli("gen-data --kind traffic-graph --nodes 1 --output-dir " + kDir.string()) == 1);
  CHECK(cli("gen-data --kind nothing --output-dir " + kDir.string()) == 1);
  CHECK(cli("train --config /nonexistent.json") == 1);
  CHECK(cli("frobnicate") == 1);
  std::ofstream(kDir / "bad.json") << R"({"harness": "channel", "regularizer": {"lambda": -1}})";
  CHECK(cli("train --config " + (kDir / "bad.json").string()) == 1);
}

TEST_CASE("train then eval round trip") {
  Scratch s;
  std::ofstream(kDir / "cfg.json") << R"({"harness": "wiring", "epochs": 3, "data": {"samples": 200}})";
  REQUIRE(cli("train --config " + (kDir / "cfg.json").string() + " --override lambda=0.05 --output-dir " +
              (kDir / "run").string()) == 0);
  for (const char* f : {"metrics.csv", "summary.json", "checkpoint.json"}) CHECK(fs::exists(kDir / "run" / f));
  const nlohmann::json summary = nlohmann::json::parse(slurp(kDir / "run" / "summary.json"));
  CHECK(summary["config"]["regularizer"]["lambda"] == 0.05);
  REQUIRE(cli("eval --checkpoint " + (kDir / "run" / "checkpoint.json").string() + " --output-dir " +
              (kDir / "ev").string()) == 0);
  const nlohmann::json ev = nlohmann::json::parse(slurp(kDir / "ev" / "eval.json"));
  CHECK(ev["test_error"] == summary["final_metrics"]["test_error"]);
}

TEST_CASE("sweeps write one directory per lambda") {
  Scratch s;
  std::ofstream(kDir / "sweep.json") << R"({"harness": "channel", "epochs": 2, "data": {"samples": 200}, "sweep": [0.01, 0.02]})";
  REQUIRE(cli("train --threads 1 --config " + (kDir / "sweep.json").string() + " --output-dir " + (kDir / "sw").string()) == 0);
  CHECK(fs::exists(kDir / "sw" / "lambda_0.01" / "summary.json"));
  CHECK(fs::exists(kDir / "sw" / "lambda_0.02" / "summary.json"));
}

TEST_CASE("self-check subcommands succeed") {
  Scratch s;
  CHECK(cli("grad-check --points 20") == 0);
  CHECK(cli("prox-check --instances 10") == 0);
  CHECK(cli("sinkhorn-check --matrices 10") == 0);
}
