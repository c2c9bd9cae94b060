#pragma once

// Generators and reference implementations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sesg/common.hpp"
#include "sesg/explain.hpp"
#include "sesg/graph.hpp"
#include "sesg/training.hpp"
#include "sesg/transformer.hpp"

namespace sesg::testing {

inline SignedGraph random_graph(std::size_t n, double p_edge, double p_neg, std::uint64_t seed, bool undirected) {
  Rng rng(seed);
  std::vector<SignedEdge> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = 0; j < n; ++j) {
      if (i == j || (undirected && j < i)) continue;
      if (!rng.bernoulli(p_edge)) continue;
      edges.push_back({i, j, rng.bernoulli(p_neg) ? Sign::Negative : Sign::Positive});
    }
  return SignedGraph(n, std::move(edges), undirected);
}

/// Undirected graph in which every node has at least one neighbour: a random
/// Hamiltonian cycle plus random chords.
inline SignedGraph random_connected_graph(std::size_t n, double p_chord, double p_neg, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  for (std::size_t t = n; t > 1; --t) std::swap(order[t - 1], order[rng.index(t)]);
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  std::vector<SignedEdge> edges;
  auto add = [&](NodeId a, NodeId b) {
    if (a == b || used[a][b]) return;
    used[a][b] = used[b][a] = true;
    edges.push_back({std::min(a, b), std::max(a, b), rng.bernoulli(p_neg) ? Sign::Negative : Sign::Positive});
  };
  for (std::size_t t = 0; t < n; ++t) add(order[t], order[(t + 1) % n]);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (rng.bernoulli(p_chord)) add(i, j);
  return SignedGraph(n, std::move(edges), true);
}

inline std::vector<NodeId> random_permutation(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  for (std::size_t t = n; t > 1; --t) std::swap(perm[t - 1], perm[rng.index(t)]);
  return perm;
}

/// Node v of `g` becomes perm[v].
inline SignedGraph relabel(const SignedGraph& g, const std::vector<NodeId>& perm) {
  std::vector<SignedEdge> edges;
  for (const auto& e : g.edges()) {
    if (g.undirected() && e.dst < e.src) continue;
    NodeId a = perm[e.src], b = perm[e.dst];
    if (g.undirected() && b < a) std::swap(a, b);
    edges.push_back({a, b, e.sign});
  }
  return SignedGraph(g.num_nodes(), std::move(edges), g.undirected());
}

/// Every edge of `g` as a training unit (no test part).
inline EdgeSplit full_split(const SignedGraph& g) {
  EdgeSplit s;
  s.undirected = g.undirected();
  for (const auto& e : g.edges())
    if (!g.undirected() || e.src < e.dst) s.train.push_back(e);
  return s;
}

struct GradCheckReport {
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  std::string worst;
  std::vector<std::string> classes;  // parameter tensors that were sampled
};

/// Central differences on `samples` coordinates spread evenly over every
/// tensor (at least one per tensor). The relative error uses
/// max(|analytic|, |numeric|, floor) as denominator.
inline GradCheckReport gradient_check(ModelParams<double> params, const EncoderInputs<double>& in,
                                      const TrainBatch& batch, const ModelConfig& mcfg, const LossConfig& lcfg,
                                      std::size_t samples, double eps, double floor, std::uint64_t seed) {
  ModelParams<double> grads;
  loss_and_gradient(params, in, batch, mcfg, lcfg, &grads);

  std::vector<std::pair<std::string, Eigen::Index>> tensors;
  params.visit([&](const std::string& name, const auto& t) { tensors.emplace_back(name, t.size()); });
  std::vector<double*> pptr, gptr;
  params.visit([&](const std::string&, auto& t) { pptr.push_back(t.data()); });
  grads.visit([&](const std::string&, auto& t) { gptr.push_back(t.data()); });

  GradCheckReport rep;
  Rng rng(seed);
  const std::size_t per = std::max<std::size_t>(1, samples / tensors.size());
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    rep.classes.push_back(tensors[t].first);
    const std::size_t count = t + 1 == tensors.size() ? std::max<std::size_t>(per, samples - rep.coordinates) : per;
    for (std::size_t s = 0; s < count; ++s) {
      const auto k = static_cast<std::size_t>(rng.index(static_cast<std::uint64_t>(tensors[t].second)));
      double& x = pptr[t][k];
      const double saved = x;
      x = saved + eps;
      const double up = loss_and_gradient<double>(params, in, batch, mcfg, lcfg, nullptr);
      x = saved - eps;
      const double down = loss_and_gradient<double>(params, in, batch, mcfg, lcfg, nullptr);
      x = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = gptr[t][k];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst = tensors[t].first + "[" + std::to_string(k) + "] analytic=" + std::to_string(analytic) +
                    " numeric=" + std::to_string(numeric);
      }
      ++rep.coordinates;
    }
  }
  return rep;
}

/// Decoder rule evaluated by exhaustive enumeration of every candidate. Valid
/// when n_sample exceeds every candidate list, so nothing is subsampled.
inline int reference_sign(NodeId i, NodeId j, const Matrix<double>& z, const SignedGraph& g, const DiffusionMatrix* s,
                          std::size_t k, int fallback) {
  auto dist = [&](NodeId v) { return (z.row(i) - z.row(v)).norm(); };
  std::vector<double> pos, neg;
  for (const auto& nb : g.out_neighbors(i)) (nb.sign == Sign::Positive ? pos : neg).push_back(dist(nb.node));
  if (pos.empty() && s)
    for (NodeId v = 0; v < g.num_nodes(); ++v)
      if (v != i && s->sign(i, v) == 1) pos.push_back(dist(v));
  if (neg.size() < k && s)
    for (NodeId v = 0; v < g.num_nodes(); ++v)
      if (v != i && s->sign(i, v) == -1 && !g.has_edge(i, v)) neg.push_back(dist(v));
  if (pos.empty() || neg.empty()) return fallback;
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end(), std::greater<>());
  pos.resize(std::min(pos.size(), k));
  neg.resize(std::min(neg.size(), k));
  auto mid = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto h = v.size() / 2;
    return v.size() % 2 ? v[h] : (v[h - 1] + v[h]) / 2;
  };
  const double d = dist(j);
  return std::abs(d - mid(pos)) <= std::abs(d - mid(neg)) ? 1 : -1;
}

}  // namespace sesg::testing
