#include "sparsegrad/data.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "sparsegrad/error.hpp"

namespace sparsegrad {

std::size_t Graph::edge_count() const {
  std::size_t c = 0;
  for (double v : adjacency.data()) c += v != 0.0;
  return c;
}

Graph random_geometric_graph(std::size_t n, double radius, Rng& rng) {
  if (n < 1) throw ValidationError("graph needs at least one node");
  if (!(radius > 0.0)) throw ValidationError("graph radius must be > 0");
  Graph g;
  g.adjacency = Tensor(Shape{n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    g.x.push_back(rng.uniform());
    g.y.push_back(rng.uniform());
  }
  auto d2 = [&](std::size_t i, std::size_t j) {
    return (g.x[i] - g.x[j]) * (g.x[i] - g.x[j]) + (g.y[i] - g.y[j]) * (g.y[i] - g.y[j]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    g.adjacency.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (d2(i, j) < radius * radius) g.adjacency.at(i, j) = g.adjacency.at(j, i) = 1.0;
    }
  }
  // Bridge components until connected.
  for (;;) {
    const auto dist = geodesic_distances(g.adjacency);
    std::vector<std::size_t> inside, outside;
    for (std::size_t j = 0; j < n; ++j) (dist[0][j] >= 0 ? inside : outside).push_back(j);
    if (outside.empty()) break;
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i : inside)
      for (std::size_t j : outside)
        if (d2(i, j) < best) best = d2(i, j), bi = i, bj = j;
    g.adjacency.at(bi, bj) = g.adjacency.at(bj, bi) = 1.0;
  }
  return g;
}

std::vector<std::vector<int>> geodesic_distances(const Tensor& adjacency) {
  const std::size_t n = adjacency.rows();
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (std::size_t s = 0; s < n; ++s) {
    std::deque<std::size_t> queue{s};
    dist[s][s] = 0;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t v = 0; v < n; ++v) {
        if (adjacency.at(u, v) != 0.0 && dist[s][v] < 0) {
          dist[s][v] = dist[s][u] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  return dist;
}

Tensor hop_mask(const std::vector<std::vector<int>>& dist, int k) {
  const std::size_t n = dist.size();
  Tensor m(Shape{n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m.at(i, j) = (dist[i][j] >= 0 && dist[i][j] <= k) ? 1.0 : 0.0;
  return m;
}

Tensor TrafficData::features(std::size_t s, std::size_t history) const {
  const std::size_t n = series.cols();
  Tensor f(Shape{n, history}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < history; ++h) f.at(i, h) = series.at(s + h, i);
  return f;
}

Tensor TrafficData::target(std::size_t s, std::size_t history) const {
  const std::size_t n = series.cols();
  Tensor t(Shape{n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) t[i] = series.at(s + history, i);
  return t;
}

TrafficData generate_traffic(const TrafficParams& p, Rng& rng) {
  if (p.nodes < 1) throw ValidationError("traffic data needs at least one node");
  if (p.history < 1) throw ValidationError("traffic history must be >= 1");
  if (p.steps < p.history + 20) throw ValidationError("traffic series too short for the history window");
  if (!(p.noise > 0.0)) throw ValidationError("traffic noise must be > 0");
  if (!(p.mixing >= 0.0 && p.mixing <= 1.0)) throw ValidationError("traffic mixing must be in [0, 1]");
  if (!(p.persistence > 0.0 && p.persistence < 1.0)) throw ValidationError("traffic persistence must be in (0, 1)");

  const std::size_t n = p.nodes;
  // About four neighbours per node on average.
  const double radius = p.radius > 0.0 ? p.radius : std::sqrt(4.0 / (3.14159265358979 * static_cast<double>(n)));
  TrafficData data;
  data.graph = random_geometric_graph(n, radius, rng);
  data.geodesic = geodesic_distances(data.graph.adjacency);

  Tensor step(Shape{n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += data.graph.adjacency.at(i, j);
    for (std::size_t j = 0; j < n; ++j) {
      step.at(i, j) = p.persistence * (p.mixing * data.graph.adjacency.at(i, j) / deg + (i == j ? 1.0 - p.mixing : 0.0));
    }
  }

  const std::size_t burn = 200;
  std::vector<double> d(n, 0.0), next(n);
  data.series = Tensor(Shape{p.steps, n}, 0.0);
  for (std::size_t t = 0; t < burn + p.steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += step.at(i, j) * d[j];
      next[i] = s + p.noise * rng.normal();
    }
    d.swap(next);
    if (t >= burn)
      for (std::size_t i = 0; i < n; ++i) data.series.at(t - burn, i) = 1.0 + d[i];
  }
  double lo = std::numeric_limits<double>::infinity();
  for (double v : data.series.data()) lo = std::min(lo, v);
  if (lo < 0.1)
    for (double& v : data.series.data()) v += 0.1 - lo;
  return data;
}

ClassifyData generate_classify(std::size_t samples, std::size_t features, Rng& rng) {
  if (samples < 10) throw ValidationError("classification data needs at least 10 samples");
  if (features < 4) throw ValidationError("classification data needs at least 4 features");
  ClassifyData out;
  out.x = Tensor(Shape{samples, features}, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t f = 0; f < features; ++f) out.x.at(s, f) = rng.normal();
    const double* r = &out.x.data()[s * features];
    // Only the first four features carry signal.
    const double score = std::sin(2.0 * r[0]) + r[1] * r[2] - 0.5 * r[3] * r[3] + 0.4;
    out.labels.push_back(score > 0.0 ? 1 : 0);
  }
  return out;
}

Split split_indices(std::size_t n, bool shuffle, Rng& rng) {
  if (n < 3) throw ValidationError("need at least 3 samples to split");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (shuffle) rng.shuffle(idx);
  const std::size_t n_train = std::max<std::size_t>(1, n * 70 / 100);
  const std::size_t n_valid = std::max<std::size_t>(1, n * 15 / 100);
  Split s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.valid.assign(idx.begin() + n_train, idx.begin() + n_train + n_valid);
  s.test.assign(idx.begin() + n_train + n_valid, idx.end());
  return s;
}

}  // namespace sparsegrad
