#include "sparsegrad/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

#include "sparsegrad/error.hpp"

namespace sparsegrad {

using nlohmann::json;

std::string to_string(Harness h) {
  switch (h) {
    case Harness::channel: return "channel";
    case Harness::wiring: return "wiring";
    case Harness::gcn: return "gcn";
  }
  return "?";
}

std::string to_string(Method m) {
  switch (m) {
    case Method::ds_exact: return "ds-exact";
    case Method::ds_rectified: return "ds-rectified";
    case Method::prox_l1: return "prox-l1";
    case Method::prox_group: return "prox-group";
    case Method::prox_exclusive: return "prox-exclusive";
    case Method::dense_baseline: return "dense-baseline";
    case Method::fixed_adjacency_baseline: return "fixed-adjacency-baseline";
  }
  return "?";
}

std::string to_string(RegTarget t) { return t == RegTarget::gates ? "gates" : "alpha"; }
std::string to_string(AdjacencyForm f) { return f == AdjacencyForm::exponential ? "exponential" : "linear"; }

Harness harness_from_string(const std::string& s) {
  for (Harness h : {Harness::channel, Harness::wiring, Harness::gcn})
    if (to_string(h) == s) return h;
  throw ValidationError("unknown harness '" + s + "'");
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::ds_exact, Method::ds_rectified, Method::prox_l1, Method::prox_group, Method::prox_exclusive,
                   Method::dense_baseline, Method::fixed_adjacency_baseline})
    if (to_string(m) == s) return m;
  throw ValidationError("unknown method '" + s + "'");
}

RegTarget reg_target_from_string(const std::string& s) {
  if (s == "gates") return RegTarget::gates;
  if (s == "alpha") return RegTarget::alpha;
  throw ValidationError("unknown reg_target '" + s + "'");
}

AdjacencyForm adjacency_form_from_string(const std::string& s) {
  if (s == "exponential") return AdjacencyForm::exponential;
  if (s == "linear") return AdjacencyForm::linear;
  throw ValidationError("unknown adjacency_form '" + s + "'");
}

bool is_prox(Method m) { return m == Method::prox_l1 || m == Method::prox_group || m == Method::prox_exclusive; }
bool is_ds(Method m) { return m == Method::ds_exact || m == Method::ds_rectified; }

ExperimentConfig ExperimentConfig::defaults(Harness h) {
  ExperimentConfig c;
  c.harness = h;
  switch (h) {
    case Harness::channel:
      c.epochs = 200;
      c.batch_size = 64;
      c.schedule = Schedule{OptimizerKind::sgd, 0.05, {0.5, 0.75}, 0.1, 0.9};
      c.regularizer.kind = RegKind::l1;
      c.regularizer.lambda = 0.005;
      break;
    case Harness::wiring:
      c.epochs = 200;
      c.batch_size = 32;
      c.schedule = Schedule{OptimizerKind::sgd, 0.02, {0.5, 0.75}, 0.1, 0.9};
      c.regularizer.kind = RegKind::l1;
      c.regularizer.lambda = 0.01;
      break;
    case Harness::gcn:
      c.epochs = 150;
      c.batch_size = 32;
      c.schedule = Schedule{OptimizerKind::adam, 0.0005, {0.8, 0.9}, 0.5, 0.9};
      c.regularizer.kind = RegKind::lp;
      c.regularizer.p = 0.5;
      c.regularizer.lambda = 0.05;
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  regularizer.validate(0);
  schedule.validate();
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
  for (double l : sweep) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("sweep lambdas must be finite and >= 0");
  }
  if (is_prox(method) && regularizer.kind == RegKind::lp) {
    throw ValidationError("proximal methods have no lp operator; use a ds method for lp");
  }
  const std::map<Method, RegKind> prox_kind{{Method::prox_l1, RegKind::l1},
                                            {Method::prox_group, RegKind::group_l21},
                                            {Method::prox_exclusive, RegKind::exclusive_l12}};
  if (auto it = prox_kind.find(method); it != prox_kind.end() && regularizer.kind != it->second) {
    throw ValidationError(to_string(method) + " requires regularizer kind " + to_string(it->second));
  }
  if (harness == Harness::gcn && regularizer.kind == RegKind::lp && regularizer.p != 0.5) {
    throw ValidationError("the gcn harness uses lp with p = 0.5");
  }
  if (method == Method::fixed_adjacency_baseline && harness != Harness::gcn) {
    throw ValidationError("fixed-adjacency-baseline only applies to the gcn harness");
  }
  if (reg_target == RegTarget::alpha && !is_ds(method)) {
    throw ValidationError("reg_target alpha only applies to ds methods");
  }
  if (reg_target == RegTarget::alpha && harness == Harness::gcn && adjacency_form != AdjacencyForm::linear) {
    throw ValidationError("reg_target alpha on the gcn harness needs adjacency_form linear");
  }
  if (model.width < 1 || model.layers < 1 || model.hidden_nodes < 1 || model.gcn_hidden < 1 || model.blocks < 1 ||
      model.head_layers < 1) {
    throw ValidationError("model sizes must be >= 1");
  }
  if (!std::isfinite(model.init_beta)) throw ValidationError("init_beta must be finite");
  if (data.samples < 20) throw ValidationError("data.samples must be >= 20");
  if (data.features < 4) throw ValidationError("data.features must be >= 4");
  if (data.inputs < 1 || data.outputs < 1) throw ValidationError("wiring inputs and outputs must be >= 1");
  if (data.nodes < 1) throw ValidationError("data.nodes must be >= 1");
  if (data.history < 1) throw ValidationError("data.history must be >= 1");
  if (data.steps < data.history + 40) throw ValidationError("data.steps too small for the history window");
  if (!(data.noise > 0.0)) throw ValidationError("data.noise must be > 0");
  if (!(data.mixing >= 0.0 && data.mixing <= 1.0)) throw ValidationError("data.mixing must be in [0, 1]");
  if (!(data.persistence > 0.0 && data.persistence < 1.0)) throw ValidationError("data.persistence must be in (0, 1)");
}

json to_json(const ExperimentConfig& c) {
  json reg{{"kind", to_string(c.regularizer.kind)}, {"lambda", c.regularizer.lambda}};
  if (c.regularizer.kind == RegKind::lp) reg["p"] = c.regularizer.p;
  return json{
      {"harness", to_string(c.harness)},
      {"method", to_string(c.method)},
      {"regularizer", reg},
      {"reg_target", to_string(c.reg_target)},
      {"adjacency_form", to_string(c.adjacency_form)},
      {"free_gates", c.free_gates},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"schedule",
       {{"optimizer", to_string(c.schedule.optimizer)},
        {"lr", c.schedule.lr},
        {"milestones", c.schedule.milestones},
        {"factor", c.schedule.factor},
        {"momentum", c.schedule.momentum}}},
      {"sweep", c.sweep},
      {"model",
       {{"width", c.model.width},
        {"layers", c.model.layers},
        {"hidden_nodes", c.model.hidden_nodes},
        {"gcn_hidden", c.model.gcn_hidden},
        {"blocks", c.model.blocks},
        {"head_layers", c.model.head_layers},
        {"init_beta", c.model.init_beta}}},
      {"data",
       {{"samples", c.data.samples},
        {"features", c.data.features},
        {"inputs", c.data.inputs},
        {"outputs", c.data.outputs},
        {"nodes", c.data.nodes},
        {"steps", c.data.steps},
        {"history", c.data.history},
        {"noise", c.data.noise},
        {"mixing", c.data.mixing},
        {"persistence", c.data.persistence},
        {"seed", c.data.seed}}},
  };
}

namespace {

using Handlers = std::map<std::string, std::function<void(const json&)>>;

void dispatch(const json& obj, const std::string& where, const Handlers& handlers) {
  if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) throw ValidationError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ValidationError("bad value for '" + key + "': " + e.what());
    }
  }
}

template <typename T>
std::function<void(const json&)> set(T& field) {
  return [&field](const json& v) {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw ValidationError("expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ValidationError("expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError("expected true or false");
    }
    field = v.get<T>();
  };
}

template <typename T, typename Parse>
std::function<void(const json&)> set_enum(T& field, Parse parse) {
  return [&field, parse](const json& v) {
    if (!v.is_string()) throw ValidationError("expected a string");
    field = parse(v.get<std::string>());
  };
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  if (!j.contains("harness")) throw ValidationError("config needs a 'harness' key");
  if (!j["harness"].is_string()) throw ValidationError("'harness' must be a string");
  ExperimentConfig c = ExperimentConfig::defaults(harness_from_string(j["harness"].get<std::string>()));
  Handlers top{
      {"harness", [](const json&) {}},
      {"method", set_enum(c.method, method_from_string)},
      {"regularizer",
       [&c](const json& v) {
         dispatch(v, "regularizer",
                  {{"kind", set_enum(c.regularizer.kind, reg_kind_from_string)},
                   {"lambda", set(c.regularizer.lambda)},
                   {"p", set(c.regularizer.p)}});
       }},
      {"reg_target", set_enum(c.reg_target, reg_target_from_string)},
      {"adjacency_form", set_enum(c.adjacency_form, adjacency_form_from_string)},
      {"free_gates", set(c.free_gates)},
      {"epochs", set(c.epochs)},
      {"batch_size", set(c.batch_size)},
      {"seed", set(c.seed)},
      {"schedule",
       [&c](const json& v) {
         dispatch(v, "schedule",
                  {{"optimizer", set_enum(c.schedule.optimizer, optimizer_kind_from_string)},
                   {"lr", set(c.schedule.lr)},
                   {"milestones",
                    [&c](const json& m) {
                      if (!m.is_array()) throw ValidationError("milestones must be an array");
                      c.schedule.milestones = m.get<std::vector<double>>();
                    }},
                   {"factor", set(c.schedule.factor)},
                   {"momentum", set(c.schedule.momentum)}});
       }},
      {"sweep",
       [&c](const json& v) {
         if (!v.is_array()) throw ValidationError("sweep must be an array of lambdas");
         c.sweep = v.get<std::vector<double>>();
       }},
      {"model",
       [&c](const json& v) {
         dispatch(v, "model",
                  {{"width", set(c.model.width)},
                   {"layers", set(c.model.layers)},
                   {"hidden_nodes", set(c.model.hidden_nodes)},
                   {"gcn_hidden", set(c.model.gcn_hidden)},
                   {"blocks", set(c.model.blocks)},
                   {"head_layers", set(c.model.head_layers)},
                   {"init_beta", set(c.model.init_beta)}});
       }},
      {"data",
       [&c](const json& v) {
         dispatch(v, "data",
                  {{"samples", set(c.data.samples)},
                   {"features", set(c.data.features)},
                   {"inputs", set(c.data.inputs)},
                   {"outputs", set(c.data.outputs)},
                   {"nodes", set(c.data.nodes)},
                   {"steps", set(c.data.steps)},
                   {"history", set(c.data.history)},
                   {"noise", set(c.data.noise)},
                   {"mixing", set(c.data.mixing)},
                   {"persistence", set(c.data.persistence)},
                   {"seed", set(c.data.seed)}});
       }},
  };
  dispatch(j, "", top);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig apply_overrides(const ExperimentConfig& c, const std::vector<std::string>& overrides) {
  json j = to_json(c);
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + ov + "' is not key=value");
    std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    if (key == "lambda") key = "regularizer.lambda";
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &j;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (dot == std::string::npos) {
        if (!node->is_object()) throw ValidationError("override path '" + key + "' is not an object");
        (*node)[part] = value;
        break;
      }
      if (!node->contains(part)) throw ValidationError("unknown key '" + key + "'");
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return config_from_json(j);
}

ExperimentConfig apply_seed_env(ExperimentConfig c) {
  if (const char* s = std::getenv("SPARSEGRAD_SEED"); s != nullptr && *s != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') throw ValidationError("SPARSEGRAD_SEED must be a non-negative integer");
    c.seed = v;
  }
  return c;
}

}  // namespace sparsegrad
