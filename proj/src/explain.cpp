#include "sesg/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "json.hpp"

namespace sesg {

const char* to_string(NeighborSource s) noexcept {
  return s == NeighborSource::Adjacency ? "adjacency" : "diffusion";
}

void DecoderConfig::validate() const {
  if (k < 1) throw ConfigError("K must be at least 1");
  if (n_sample < k) throw ConfigError("n_sample must be at least K");
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

// Partial Fisher-Yates: the first `count` entries become a uniform sample.
void sample_in_place(std::vector<NodeId>& pool, std::size_t count, Rng& rng) {
  if (pool.size() <= count) return;
  for (std::size_t t = 0; t < count; ++t) std::swap(pool[t], pool[t + rng.index(pool.size() - t)]);
  pool.resize(count);
}

void append(std::vector<ContextEntry>& out, const std::vector<NodeId>& ids, const Matrix<double>& z, NodeId node,
            NeighborSource src) {
  for (NodeId id : ids) out.push_back({id, pairwise_distance(z, node, id), src});
}

}  // namespace

NeighborContext neighbor_context(NodeId node, const Matrix<double>& z, const SignedGraph& g, const DiffusionMatrix* s,
                                 const DecoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, node));
  std::vector<NodeId> pos, neg;
  for (const auto& nb : g.out_neighbors(node)) (nb.sign == Sign::Positive ? pos : neg).push_back(nb.node);

  NeighborContext ctx;
  ctx.node = node;
  std::vector<ContextEntry> pos_cand, neg_cand;
  if (!pos.empty()) {
    sample_in_place(pos, cfg.n_sample, rng);
    append(pos_cand, pos, z, node, NeighborSource::Adjacency);
  } else if (s) {
    auto extra = s->positives(node);
    sample_in_place(extra, cfg.n_sample, rng);
    append(pos_cand, extra, z, node, NeighborSource::Diffusion);
  }
  sample_in_place(neg, cfg.n_sample, rng);
  append(neg_cand, neg, z, node, NeighborSource::Adjacency);
  if (neg.size() < cfg.k && s) {
    auto extra = s->negatives(node);
    std::erase_if(extra, [&](NodeId v) { return g.has_edge(node, v); });
    sample_in_place(extra, cfg.n_sample - neg.size(), rng);
    append(neg_cand, extra, z, node, NeighborSource::Diffusion);
  }

  std::sort(pos_cand.begin(), pos_cand.end(), [](const ContextEntry& a, const ContextEntry& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
  });
  std::sort(neg_cand.begin(), neg_cand.end(), [](const ContextEntry& a, const ContextEntry& b) {
    return a.dist != b.dist ? a.dist > b.dist : a.id < b.id;
  });
  if (pos_cand.size() > cfg.k) pos_cand.resize(cfg.k);
  if (neg_cand.size() > cfg.k) neg_cand.resize(cfg.k);
  ctx.k_pos = std::move(pos_cand);
  ctx.k_neg = std::move(neg_cand);

  auto dists = [](const std::vector<ContextEntry>& v) {
    std::vector<double> d(v.size());
    std::transform(v.begin(), v.end(), d.begin(), [](const ContextEntry& e) { return e.dist; });
    return d;
  };
  ctx.d_ip = median(dists(ctx.k_pos));
  ctx.d_in = median(dists(ctx.k_neg));
  ctx.degenerate = ctx.k_pos.empty() || ctx.k_neg.empty();
  return ctx;
}

namespace {

ExplainedPrediction decide(NodeId i, NodeId j, double d_ij, double d_ip, double d_in, bool degenerate,
                           int fallback_sign) {
  ExplainedPrediction p;
  p.i = i;
  p.j = j;
  p.d_ij = d_ij;
  p.d_ip = d_ip;
  p.d_in = d_in;
  p.degenerate = degenerate;
  const double to_pos = std::abs(d_ij - d_ip);
  const double to_neg = std::abs(d_ij - d_in);
  p.margin = to_pos - to_neg;
  if (degenerate) {
    p.predicted_sign = fallback_sign;
  } else {
    p.tie = to_pos == to_neg;
    p.predicted_sign = to_pos <= to_neg ? 1 : -1;
  }
  return p;
}

}  // namespace

ExplainedPrediction predict_sign(NodeId i, NodeId j, const Matrix<double>& z, const NeighborContext& context_i,
                                 int fallback_sign) {
  auto p = decide(i, j, pairwise_distance(z, i, j), context_i.d_ip, context_i.d_in, context_i.degenerate,
                  fallback_sign);
  p.context = context_i;
  return p;
}

ExplainedPrediction predict_sign(NodeId i, NodeId j, const Matrix<double>& z, const NeighborContext& context_i,
                                 const NeighborContext& context_j, int fallback_sign) {
  if (context_i.degenerate || context_j.degenerate) {
    const auto& usable = context_i.degenerate ? context_j : context_i;
    return predict_sign(i, j, z, usable, fallback_sign);
  }
  auto p = decide(i, j, pairwise_distance(z, i, j), 0.5 * (context_i.d_ip + context_j.d_ip),
                  0.5 * (context_i.d_in + context_j.d_in), false, fallback_sign);
  p.context = context_i;
  return p;
}

std::vector<ExplainedPrediction> explain_edges(std::span<const SignedEdge> queries, const Matrix<double>& z,
                                               const SignedGraph& g, const DiffusionMatrix* s,
                                               const DecoderConfig& cfg, std::uint64_t seed, int fallback_sign,
                                               unsigned threads) {
  cfg.validate();
  std::vector<ExplainedPrediction> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t q) {
    const auto& e = queries[q];
    const auto ci = neighbor_context(e.src, z, g, s, cfg, seed);
    if (cfg.symmetric) {
      const auto cj = neighbor_context(e.dst, z, g, s, cfg, seed);
      out[q] = predict_sign(e.src, e.dst, z, ci, cj, fallback_sign);
    } else {
      out[q] = predict_sign(e.src, e.dst, z, ci, fallback_sign);
    }
  });
  return out;
}

std::vector<ExplanationSets> generate_ground_truth_explanations(const Matrix<double>& z_ref, std::size_t k) {
  const auto n = static_cast<std::size_t>(z_ref.rows());
  if (k >= n) throw ConfigError("K must be smaller than the node count");
  std::vector<ExplanationSets> out(n);
  std::vector<std::pair<double, NodeId>> order;
  for (NodeId i = 0; i < n; ++i) {
    order.clear();
    for (NodeId j = 0; j < n; ++j)
      if (j != i) order.emplace_back(pairwise_distance(z_ref, i, j), j);
    std::sort(order.begin(), order.end());
    for (std::size_t t = 0; t < k; ++t) out[i].nearest.push_back(order[t].second);
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t t = 0; t < k; ++t) out[i].farthest.push_back(order[t].second);
  }
  return out;
}

namespace {

std::size_t overlap(std::vector<NodeId> a, std::vector<NodeId> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<NodeId> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return common.size();
}

}  // namespace

double precision_at_k(std::span<const ExplanationSets> predicted, std::span<const ExplanationSets> truth,
                      std::span<const NodeId> nodes, std::size_t k) {
  if (k == 0) throw ConfigError("K must be at least 1");
  if (nodes.empty()) return 0.0;
  double total = 0.0;
  for (NodeId v : nodes) {
    const auto& p = predicted[v];
    const auto& t = truth[v];
    total += static_cast<double>(overlap(p.nearest, t.nearest)) / static_cast<double>(k);
    total += static_cast<double>(overlap(p.farthest, t.farthest)) / static_cast<double>(k);
  }
  return total / (2.0 * static_cast<double>(nodes.size()));
}

ExplanationSets context_sets(const NeighborContext& ctx) {
  ExplanationSets s;
  for (const auto& e : ctx.k_pos) s.nearest.push_back(e.id);
  for (const auto& e : ctx.k_neg) s.farthest.push_back(e.id);
  return s;
}

void write_explanations(std::ostream& out, std::span<const ExplainedPrediction> predictions,
                        std::span<const std::int64_t> original_ids) {
  auto id = [&](NodeId v) -> std::int64_t { return original_ids.empty() ? v : original_ids[v]; };
  auto side = [&](const std::vector<ContextEntry>& entries) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries)
      arr.push_back({{"id", id(e.id)}, {"dist", e.dist}, {"source", to_string(e.source)}});
    return arr;
  };
  for (const auto& p : predictions) {
    nlohmann::ordered_json j;
    j["i"] = id(p.i);
    j["j"] = id(p.j);
    j["predicted_sign"] = p.predicted_sign;
    j["d_ij"] = p.d_ij;
    j["d_ip"] = p.d_ip;
    j["d_in"] = p.d_in;
    j["margin"] = p.margin;
    j["k_pos"] = side(p.context.k_pos);
    j["k_neg"] = side(p.context.k_neg);
    j["tie"] = p.tie;
    j["degenerate"] = p.degenerate;
    out << j.dump() << '\n';
  }
}

}  // namespace sesg
