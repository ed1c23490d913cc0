#include "sparsegrad/verification.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "sparsegrad/error.hpp"
#include "sparsegrad/gradcheck.hpp"
#include "sparsegrad/normalization.hpp"
#include "sparsegrad/regularizers.hpp"
#include "sparsegrad/rng.hpp"
#include "sparsegrad/sparse_param.hpp"

namespace sparsegrad {

using namespace ad;

bool all_passed(const std::vector<CheckResult>& results) {
  return !results.empty() && std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed(); });
}

namespace {

constexpr double kKinkMargin = 1e-3;
constexpr double kInf = std::numeric_limits<double>::infinity();

// sum(y * c) with c drawn from a fixed stream, so every output entry carries
// a different upstream gradient.
Var project(Var y) {
  Rng r(0xC0FFEE);
  Tensor c = r.uniform_tensor(y.value().shape(), -1.0, 1.0);
  return sum(y * y.tape()->constant(std::move(c)));
}

struct GradCase {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> draw;
  LossBuilder loss;
  std::function<double(const std::vector<Tensor>&)> kink = [](const std::vector<Tensor>&) { return kInf; };
};

double min_abs(const Tensor& t) {
  double m = kInf;
  for (double v : t.data()) m = std::min(m, std::abs(v));
  return m;
}

Tensor away_from_zero(Rng& r, Shape s, double lo, double hi) {
  Tensor t = r.uniform_tensor(std::move(s), lo, hi);
  for (double& v : t.data()) v = r.uniform() < 0.5 ? -v : v;
  return t;
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Distance of every pre-relu gate strength from the threshold.
double gate_kink(const std::vector<Tensor>& in, GateMode mode) {
  const Tensor& a = in[0];
  const double s = sigm(in[1][0]);
  double total = 0.0;
  for (double v : a.data()) total += mode == GateMode::signed_magnitude ? std::abs(v) : std::exp(v);
  double d = mode == GateMode::signed_magnitude ? min_abs(a) : kInf;
  bool any_active = false;
  for (double v : a.data()) {
    const double strength = mode == GateMode::signed_magnitude ? std::abs(v) : std::exp(v);
    d = std::min(d, std::abs(strength - s * total));
    any_active = any_active || strength > s * total;
  }
  // An all-dropped softmax group switches formula; keep away from it.
  if (mode == GateMode::nonneg_softmax && !any_active) return 0.0;
  return d;
}

double adjacency_kink(const std::vector<Tensor>& in, AdjacencyForm form) {
  const Tensor& a = in[0];
  const std::size_t n = a.rows();
  std::vector<double> rs(n, 0.0), cs(n, 0.0);
  auto g = [&](std::size_t i, std::size_t j) {
    return form == AdjacencyForm::exponential ? std::exp(a.at(i, j)) : a.at(i, j);
  };
  auto strength = [&](std::size_t i, std::size_t j) {
    return form == AdjacencyForm::exponential ? std::exp(a.at(i, j)) : std::abs(a.at(i, j));
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) rs[i] += strength(i, j), cs[j] += strength(i, j);
  double d = form == AdjacencyForm::linear ? min_abs(a) : kInf;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      d = std::min(d, std::abs(g(i, j) - sigm(in[1][i]) * rs[i] - sigm(in[2][j]) * cs[j]));
  return d;
}

std::vector<GradCase> grad_cases() {
  std::vector<GradCase> cs;
  auto unary = [&cs](std::string name, std::function<Var(Var)> f, std::function<Tensor(Rng&)> draw,
                     bool kink_at_zero = false) {
    GradCase c;
    c.name = std::move(name);
    c.draw = [draw](Rng& r) { return std::vector<Tensor>{draw(r)}; };
    c.loss = [f](Tape&, std::span<const Var> x) { return project(f(x[0])); };
    if (kink_at_zero) c.kink = [](const std::vector<Tensor>& in) { return min_abs(in[0]); };
    cs.push_back(std::move(c));
  };
  auto binary = [&cs](std::string name, std::function<Var(Var, Var)> f,
                      std::function<std::vector<Tensor>(Rng&)> draw) {
    GradCase c;
    c.name = std::move(name);
    c.draw = std::move(draw);
    c.loss = [f](Tape&, std::span<const Var> x) { return project(f(x[0], x[1])); };
    cs.push_back(std::move(c));
  };
  auto normal = [](Shape s) { return [s](Rng& r) { return r.normal_tensor(s, 1.0); }; };
  auto positive = [](Shape s) { return [s](Rng& r) { return r.uniform_tensor(s, 0.2, 3.0); }; };
  const Shape m34{3, 4};

  auto two = [](Shape a, Shape b) {
    return [a, b](Rng& r) { return std::vector<Tensor>{r.normal_tensor(a, 1.0), r.normal_tensor(b, 1.0)}; };
  };
  binary("add", [](Var a, Var b) { return a + b; }, two(m34, m34));
  binary("sub", [](Var a, Var b) { return a - b; }, two(m34, m34));
  binary("mul", [](Var a, Var b) { return a * b; }, two(m34, m34));
  binary("mul_scalar", [](Var a, Var b) { return a * b; }, two(m34, Shape{}));
  binary("div", [](Var a, Var b) { return a / b; }, [](Rng& r) {
    return std::vector<Tensor>{r.normal_tensor(Shape{3, 4}, 1.0), away_from_zero(r, Shape{3, 4}, 0.5, 2.0)};
  });
  binary("matmul", [](Var a, Var b) { return matmul(a, b); }, two(m34, Shape{4, 2}));
  binary("block_left_matmul", [](Var a, Var b) { return block_left_matmul(a, b, 2); }, two(Shape{3, 3}, Shape{6, 2}));
  binary("concat_rows", [](Var a, Var b) { return concat({a, b}, 0); }, two(m34, Shape{2, 4}));
  binary("concat_cols", [](Var a, Var b) { return concat({a, b}, 1); }, two(m34, Shape{3, 2}));
  binary("add_n", [](Var a, Var b) {
    std::vector<Var> t{a, b, a};
    return add_n(t);
  }, two(m34, m34));

  unary("neg", [](Var x) { return -x; }, normal(m34));
  unary("add_scalar", [](Var x) { return x + 1.5; }, normal(m34));
  unary("scale", [](Var x) { return x * -2.5; }, normal(m34));
  unary("exp", [](Var x) { return exp(x); }, normal(m34));
  unary("log", [](Var x) { return log(x); }, positive(m34));
  unary("abs", [](Var x) { return abs(x); }, normal(m34), true);
  unary("sign", [](Var x) { return sign(x) * x; }, normal(m34), true);
  unary("sigmoid", [](Var x) { return sigmoid(x); }, normal(m34));
  unary("sqrt", [](Var x) { return sqrt(x); }, positive(m34));
  unary("pow_0.5", [](Var x) { return pow(x, 0.5); }, positive(m34));
  unary("pow_-0.5", [](Var x) { return pow(x, -0.5); }, positive(m34));
  unary("pow_3", [](Var x) { return pow(x, 3.0); }, positive(m34));
  unary("relu", [](Var x) { return relu(x); }, normal(m34), true);
  unary("safe_l2_norm", [](Var x) { return safe_l2_norm(x); }, normal(m34));
  unary("safe_l2_norm_axis0", [](Var x) { return safe_l2_norm(x, 0); }, normal(m34));
  unary("safe_l2_norm_axis1", [](Var x) { return safe_l2_norm(x, 1); }, normal(m34));
  unary("transpose", [](Var x) { return transpose(x); }, normal(m34));
  unary("reshape", [](Var x) { return reshape(x, Shape{2, 6}); }, normal(m34));
  unary("gather", [](Var x) { return gather(x, {0, 5, 5, 11, 3}); }, normal(m34));
  unary("slice_cols", [](Var x) { return slice_cols(x, 1, 3); }, normal(m34));
  unary("broadcast_rows", [](Var x) { return broadcast_rows(x, 3); }, normal(Shape{4}));
  unary("broadcast_cols", [](Var x) { return broadcast_cols(x, 5); }, normal(Shape{4}));
  unary("sum", [](Var x) { return sum(x); }, normal(m34));
  unary("sum_axis0", [](Var x) { return sum(x, 0); }, normal(m34));
  unary("sum_axis1", [](Var x) { return sum(x, 1); }, normal(m34));
  unary("mean", [](Var x) { return mean(x); }, normal(m34));
  unary("mean_axis0", [](Var x) { return mean(x, 0); }, normal(m34));
  unary("log_softmax_rows", [](Var x) { return log_softmax_rows(x); }, normal(m34));

  const std::pair<GateMode, const char*> modes[] = {{GateMode::signed_magnitude, "gate_signed"},
                                                    {GateMode::nonneg_raw, "gate_nonneg_raw"},
                                                    {GateMode::nonneg_softmax, "gate_nonneg_softmax"}};
  for (auto [mode, name] : modes) {
    GradCase c;
    c.name = name;
    c.draw = [](Rng& r) {
      return std::vector<Tensor>{r.normal_tensor(Shape{5}, 1.0), Tensor::scalar(r.uniform(-3.5, -1.0))};
    };
    c.loss = [mode](Tape&, std::span<const Var> x) { return project(gate_values(x[0], x[1], mode, GradMode::exact).a); };
    c.kink = [mode](const std::vector<Tensor>& in) { return gate_kink(in, mode); };
    cs.push_back(std::move(c));
  }

  struct Pen {
    const char* name;
    RegKind kind;
    double p;
  };
  for (Pen pen : {Pen{"penalty_l1", RegKind::l1, 1.0}, Pen{"penalty_group_l21", RegKind::group_l21, 1.0},
                  Pen{"penalty_exclusive_l12", RegKind::exclusive_l12, 1.0}, Pen{"penalty_lp_0.5", RegKind::lp, 0.5}}) {
    GradCase c;
    c.name = pen.name;
    const bool lp = pen.kind == RegKind::lp;
    c.draw = [lp](Rng& r) {
      return std::vector<Tensor>{lp ? r.uniform_tensor(Shape{3, 4}, 0.1, 2.0) : away_from_zero(r, Shape{3, 4}, 0.01, 2.0)};
    };
    RegularizerSpec spec{pen.kind, pen.p, 1.0, row_groups(3, 4)};
    c.loss = [spec](Tape&, std::span<const Var> x) { return penalty(spec, x[0]); };
    c.kink = [lp](const std::vector<Tensor>& in) { return lp ? kInf : min_abs(in[0]); };
    cs.push_back(std::move(c));
  }

  for (AdjacencyForm form : {AdjacencyForm::exponential, AdjacencyForm::linear}) {
    GradCase c;
    c.name = form == AdjacencyForm::exponential ? "sparse_adjacency_exp" : "sparse_adjacency_linear";
    c.draw = [form](Rng& r) {
      Tensor a = form == AdjacencyForm::exponential ? r.normal_tensor(Shape{4, 4}, 1.0)
                                                    : r.uniform_tensor(Shape{4, 4}, -0.5, 2.0);
      return std::vector<Tensor>{a, r.uniform_tensor(Shape{4}, -4.0, -1.5), r.uniform_tensor(Shape{4}, -4.0, -1.5)};
    };
    c.loss = [form](Tape&, std::span<const Var> x) {
      return project(sparse_adjacency(x[0], x[1], x[2], GradMode::exact, form));
    };
    c.kink = [form](const std::vector<Tensor>& in) { return adjacency_kink(in, form); };
    cs.push_back(std::move(c));
  }

  for (NormKind kind : {NormKind::sinkhorn, NormKind::balanced}) {
    GradCase c;
    c.name = kind == NormKind::sinkhorn ? "unrolled_sinkhorn" : "unrolled_balanced";
    c.draw = [](Rng& r) { return std::vector<Tensor>{r.uniform_tensor(Shape{4, 4}, 0.1, 2.0)}; };
    c.loss = [kind](Tape&, std::span<const Var> x) { return project(normalize_unrolled(x[0], kind, 15).a); };
    cs.push_back(std::move(c));
  }
  return cs;
}

}  // namespace

std::vector<CheckResult> grad_check_suite(std::size_t points, std::uint64_t seed, double tolerance) {
  std::vector<CheckResult> out;
  Rng master(seed);
  std::uint64_t tag = 0;
  for (const GradCase& c : grad_cases()) {
    Rng r = master.fork(++tag);
    CheckResult res{c.name, 0, 0.0, tolerance};
    std::size_t attempts = 0;
    while (res.points < points) {
      if (++attempts > 100 * points) throw NumericError("grad-check could not sample away from kinks for " + c.name);
      std::vector<Tensor> in = c.draw(r);
      if (!(c.kink(in) > kKinkMargin)) continue;
      res.max_error = std::max(res.max_error, max_gradient_error(c.loss, in));
      ++res.points;
    }
    out.push_back(res);
  }
  return out;
}

std::vector<CheckResult> prox_check_suite(std::size_t instances, std::uint64_t seed, double tolerance) {
  std::vector<CheckResult> out;
  Rng r(seed);
  for (ProxKind kind : {ProxKind::l1, ProxKind::group_l21, ProxKind::exclusive_l12}) {
    for (std::size_t n : {1u, 2u}) {
      CheckResult res{to_string(kind) + (n == 1 ? "_scalar" : "_vec2"), 0, 0.0, tolerance};
      for (std::size_t i = 0; i < instances; ++i) {
        ProxSpec spec{kind, r.uniform(0.0, 1.5), r.uniform(0.1, 1.0), {}};
        const Tensor w = r.uniform_tensor(Shape{n}, -2.0, 2.0);
        res.max_error = std::max(res.max_error, prox_oracle_check(spec, w));
        ++res.points;
      }
      out.push_back(res);
    }
  }
  return out;
}

std::vector<CheckResult> sinkhorn_check_suite(std::size_t matrices, std::uint64_t seed, double tolerance) {
  CheckResult sk{"sinkhorn_residual", 0, 0.0, tolerance};
  CheckResult bal{"balanced_residual", 0, 0.0, tolerance};
  CheckResult sk_scale{"sinkhorn_scale_invariance", 0, 0.0, tolerance};
  CheckResult bal_scale{"balanced_scale_invariance", 0, 0.0, tolerance};
  Rng r(seed);
  auto max_diff = [](const Tensor& a, const Tensor& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
  };
  for (std::size_t k = 0; k < matrices; ++k) {
    const std::size_t n = 1 + r.index(10);
    const Tensor m = r.uniform_tensor(Shape{n, n}, 0.01, 5.0);
    Tensor scaled = m;
    const double c = std::exp(r.uniform(-3.0, 3.0));
    for (double& v : scaled.data()) v *= c;
    const StochMatrix s = sinkhorn(m), b = balanced_normalize(m);
    sk.max_error = std::max(sk.max_error, doubly_stochastic_deviation(s.values));
    bal.max_error = std::max(bal.max_error, doubly_stochastic_deviation(b.values));
    sk_scale.max_error = std::max(sk_scale.max_error, max_diff(s.values, sinkhorn(scaled).values));
    bal_scale.max_error = std::max(bal_scale.max_error, max_diff(b.values, balanced_normalize(scaled).values));
    ++sk.points, ++bal.points, ++sk_scale.points, ++bal_scale.points;
  }
  return {sk, bal, sk_scale, bal_scale};
}

}  // namespace sparsegrad
