#include <set>
#include <sstream>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "doctest.h"
#include "sesg/explain.hpp"
#include "support.hpp"

using namespace sesg;

namespace {

Matrix<double> random_embeddings(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix<double> z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = rng.uniform(-1, 1);
  return z;
}

std::vector<NodeId> ids(const std::vector<ContextEntry>& entries) {
  std::vector<NodeId> out;
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

NeighborContext context_with(double d_ip, double d_in) {
  NeighborContext c;
  c.k_pos = {{1, d_ip, NeighborSource::Adjacency}};
  c.k_neg = {{2, d_in, NeighborSource::Adjacency}};
  c.d_ip = d_ip;
  c.d_in = d_in;
  return c;
}

// Node 0 sits at the origin; node 1 lies at distance d_ij on the x axis.
Matrix<double> line_embeddings(double d_ij) {
  Matrix<double> z = Matrix<double>::Zero(3, 2);
  z(1, 0) = d_ij;
  return z;
}

}  // namespace

TEST_CASE("pairwise distance") {
  Matrix<double> z(2, 2);
  z << 0, 0, 3, 4;
  CHECK(pairwise_distance(z, 0, 1) == 5.0);
  CHECK(pairwise_distance(z, 1, 0) == 5.0);
  CHECK(pairwise_distance(z, 1, 1) == 0.0);
}

TEST_CASE("median convention") {
  CHECK(median({}) == 0.0);
  CHECK(median({3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 10.0}) == 3.0);
}

TEST_CASE("decoder config validation") {
  DecoderConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.k = 10;
  cfg.n_sample = 5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("decision rule examples") {
  const auto a = predict_sign(0, 1, line_embeddings(1.0), context_with(0.9, 3.0));
  CHECK(a.predicted_sign == 1);
  CHECK(a.margin < 0);
  CHECK_FALSE(a.tie);
  CHECK(predict_sign(0, 1, line_embeddings(3.1), context_with(0.9, 3.0)).predicted_sign == -1);
  const auto tie = predict_sign(0, 1, line_embeddings(2.0), context_with(1.0, 3.0));
  CHECK(tie.tie);
  CHECK(tie.predicted_sign == 1);
}

TEST_CASE("degenerate context predicts the fallback") {
  NeighborContext c = context_with(1.0, 2.0);
  c.k_neg.clear();
  c.degenerate = true;
  const auto p = predict_sign(0, 1, line_embeddings(5.0), c, -1);
  CHECK(p.degenerate);
  CHECK(p.predicted_sign == -1);
  // The symmetric variant falls back to the usable endpoint.
  const auto q = predict_sign(0, 1, line_embeddings(5.0), c, context_with(1.0, 4.0), -1);
  CHECK_FALSE(q.degenerate);
  CHECK(q.predicted_sign == -1);
}

TEST_CASE("symmetric rule averages the medians") {
  const auto p = predict_sign(0, 1, line_embeddings(2.0), context_with(1.0, 2.0), context_with(3.0, 4.0));
  CHECK(p.d_ip == 2.0);
  CHECK(p.d_in == 3.0);
  CHECK(p.predicted_sign == 1);
}

TEST_CASE("scarce positives are used as they are") {
  std::vector<SignedEdge> edges{{0, 1, Sign::Positive}, {0, 2, Sign::Positive}, {0, 3, Sign::Positive}, {0, 4, Sign::Negative}};
  const SignedGraph g(6, edges);
  DiffusionMatrix s(6);
  s.set(0, 5, 1, 0.5);
  s.finalize();
  const auto ctx = neighbor_context(0, random_embeddings(6, 3, 1), g, &s, DecoderConfig{}, 1);
  REQUIRE(ctx.k_pos.size() == 3);
  for (const auto& e : ctx.k_pos) CHECK(e.source == NeighborSource::Adjacency);
  CHECK(ctx.k_pos[0].dist <= ctx.k_pos[1].dist);
  CHECK_FALSE(ctx.degenerate);
}

TEST_CASE("missing negatives are taken from the diffusion matrix") {
  std::vector<SignedEdge> edges{{0, 1, Sign::Positive}};
  const SignedGraph g(8, edges);
  DiffusionMatrix s(8);
  for (NodeId v = 2; v < 7; ++v) s.set(0, v, -1, -0.1);
  s.set(0, 1, -1, -0.1);  // already an A-neighbour, never a diffusion negative
  s.set(0, 7, 1, 0.3);
  s.finalize();
  const auto ctx = neighbor_context(0, random_embeddings(8, 3, 2), g, &s, DecoderConfig{}, 1);
  REQUIRE(ctx.k_neg.size() == 5);
  std::set<NodeId> got;
  for (const auto& e : ctx.k_neg) {
    CHECK(e.source == NeighborSource::Diffusion);
    got.insert(e.id);
  }
  CHECK(got == std::set<NodeId>{2, 3, 4, 5, 6});
  CHECK(ctx.k_neg.front().dist >= ctx.k_neg.back().dist);

  const auto bare = neighbor_context(0, random_embeddings(8, 3, 2), g, nullptr, DecoderConfig{}, 1);
  CHECK(bare.degenerate);
  CHECK(bare.k_neg.empty());
}

TEST_CASE("diffusion positives stand in only when there are no positive neighbours") {
  const SignedGraph g(4, {{0, 1, Sign::Negative}});
  DiffusionMatrix s(4);
  s.set(0, 2, 1, 0.2);
  s.set(0, 3, 1, 0.2);
  s.finalize();
  const auto ctx = neighbor_context(0, random_embeddings(4, 2, 3), g, &s, DecoderConfig{}, 1);
  CHECK(ctx.k_pos.size() == 2);
  for (const auto& e : ctx.k_pos) CHECK(e.source == NeighborSource::Diffusion);
}

TEST_CASE("context keeps the K extreme neighbours and samples deterministically") {
  std::vector<SignedEdge> edges;
  for (NodeId v = 1; v < 60; ++v) edges.push_back({0, v, v % 3 ? Sign::Positive : Sign::Negative});
  const SignedGraph g(60, edges);
  const auto z = random_embeddings(60, 4, 5);
  DecoderConfig cfg;
  cfg.k = 5;
  cfg.n_sample = 200;
  const auto full = neighbor_context(0, z, g, nullptr, cfg, 1);
  REQUIRE(full.k_pos.size() == 5);
  REQUIRE(full.k_neg.size() == 5);
  std::vector<std::pair<double, NodeId>> pos;
  for (NodeId v = 1; v < 60; ++v)
    if (v % 3) pos.emplace_back(pairwise_distance(z, 0, v), v);
  std::sort(pos.begin(), pos.end());
  for (std::size_t t = 0; t < 5; ++t) CHECK(full.k_pos[t].id == pos[t].second);

  cfg.n_sample = 10;
  const auto a = neighbor_context(0, z, g, nullptr, cfg, 7);
  const auto b = neighbor_context(0, z, g, nullptr, cfg, 7);
  CHECK(ids(a.k_pos) == ids(b.k_pos));
  CHECK(ids(a.k_neg) == ids(b.k_neg));
  bool differs = false;
  for (std::uint64_t seed = 8; seed < 20 && !differs; ++seed)
    differs = ids(neighbor_context(0, z, g, nullptr, cfg, seed).k_pos) != ids(a.k_pos);
  CHECK(differs);
}

TEST_CASE("decoder agrees with exhaustive enumeration on small graphs") {
  std::size_t compared = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t n = 4 + seed % 9;
    const auto g = testing::random_graph(n, 0.35, 0.35, seed, seed % 2 == 0);
    const auto s = build_diffusion_matrix(g, SrwrConfig{});
    const auto z = random_embeddings(n, 3, seed + 1000);
    DecoderConfig cfg;
    cfg.k = 1 + seed % 4;
    cfg.n_sample = std::max(n, cfg.k);
    for (NodeId i = 0; i < n; ++i)
      for (NodeId j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto ctx = neighbor_context(i, z, g, &s, cfg, seed);
        CHECK(predict_sign(i, j, z, ctx, -1).predicted_sign == testing::reference_sign(i, j, z, g, &s, cfg.k, -1));
        ++compared;
      }
  }
  CHECK(compared > 1000);
}

TEST_CASE("predictions are invariant under isometry and scaling") {
  const auto g = testing::random_connected_graph(25, 0.2, 0.4, 4);
  const auto s = build_diffusion_matrix(g, SrwrConfig{});
  const auto z = random_embeddings(25, 4, 9);
  const Matrix<double> q = Eigen::HouseholderQR<Matrix<double>>(random_embeddings(4, 4, 10)).householderQ();
  const Eigen::RowVector4d shift(0.3, -2.0, 1.5, 0.7);
  const Matrix<double> moved = (z * q).rowwise() + shift;
  const Matrix<double> scaled = 3.7 * z;
  DecoderConfig cfg;
  cfg.k = 3;
  std::vector<SignedEdge> queries;
  for (const auto& e : g.edges()) queries.push_back(e);
  const auto base = explain_edges(queries, z, g, &s, cfg, 2, 1);
  const auto rot = explain_edges(queries, moved, g, &s, cfg, 2, 1);
  const auto big = explain_edges(queries, scaled, g, &s, cfg, 2, 1);
  for (std::size_t k = 0; k < queries.size(); ++k) {
    CHECK(base[k].predicted_sign == rot[k].predicted_sign);
    CHECK(ids(base[k].context.k_pos) == ids(rot[k].context.k_pos));
    CHECK(ids(base[k].context.k_neg) == ids(rot[k].context.k_neg));
    CHECK(base[k].predicted_sign == big[k].predicted_sign);
    CHECK(big[k].d_ij == doctest::Approx(3.7 * base[k].d_ij));
    CHECK(big[k].d_ip == doctest::Approx(3.7 * base[k].d_ip));
    CHECK(big[k].d_in == doctest::Approx(3.7 * base[k].d_in));
  }
  const auto threaded = explain_edges(queries, z, g, &s, cfg, 2, 1, 4);
  for (std::size_t k = 0; k < queries.size(); ++k) CHECK(threaded[k].margin == base[k].margin);
}

TEST_CASE("ground truth tie rule on collinear points") {
  Matrix<double> z(3, 1);
  z << 0.0, 1.0, 2.0;
  const auto t = generate_ground_truth_explanations(z, 1);
  CHECK(t[1].nearest == std::vector<NodeId>{0});
  CHECK(t[1].farthest == std::vector<NodeId>{0});
  CHECK(t[0].nearest == std::vector<NodeId>{1});
  CHECK(t[0].farthest == std::vector<NodeId>{2});
  CHECK_THROWS_AS(generate_ground_truth_explanations(z, 3), ConfigError);
}

TEST_CASE("ground truth matches a full sort and its sides are disjoint") {
  const auto z = random_embeddings(50, 5, 21);
  const std::size_t k = 7;
  const auto t = generate_ground_truth_explanations(z, k);
  for (NodeId i = 0; i < 50; ++i) {
    std::vector<std::pair<double, NodeId>> all;
    for (NodeId j = 0; j < 50; ++j)
      if (j != i) all.emplace_back((z.row(i) - z.row(j)).norm(), j);
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < k; ++r) {
      CHECK(t[i].nearest[r] == all[r].second);
      CHECK(t[i].farthest[r] == all[all.size() - 1 - r].second);
    }
    std::set<NodeId> near(t[i].nearest.begin(), t[i].nearest.end());
    for (NodeId v : t[i].farthest) CHECK(near.count(v) == 0);
  }
}

TEST_CASE("precision at K examples") {
  std::vector<ExplanationSets> truth(1), same(1), disjoint(1), half(1);
  for (NodeId v = 0; v < 40; ++v) {
    truth[0].nearest.push_back(v);
    truth[0].farthest.push_back(100 + v);
    disjoint[0].nearest.push_back(200 + v);
    disjoint[0].farthest.push_back(300 + v);
    half[0].nearest.push_back(v % 2 ? v : 400 + v);
    half[0].farthest.push_back(v % 2 ? 100 + v : 500 + v);
  }
  same = truth;
  const std::vector<NodeId> nodes{0};
  CHECK(precision_at_k(same, truth, nodes, 40) == 1.0);
  CHECK(precision_at_k(disjoint, truth, nodes, 40) == 0.0);
  CHECK(precision_at_k(half, truth, nodes, 40) == 0.5);
  CHECK(precision_at_k(same, truth, {}, 40) == 0.0);
  CHECK_THROWS_AS(precision_at_k(same, truth, nodes, 0), ConfigError);
}

TEST_CASE("explanations are written as JSON lines") {
  const SignedGraph g(4, {{0, 1, Sign::Positive}, {0, 2, Sign::Negative}, {0, 3, Sign::Positive}});
  const auto z = random_embeddings(4, 2, 1);
  const std::vector<SignedEdge> queries{{0, 1, Sign::Positive}, {0, 2, Sign::Negative}};
  const auto preds = explain_edges(queries, z, g, nullptr, DecoderConfig{}, 1, 1);
  std::ostringstream out;
  const std::vector<std::int64_t> original{10, 11, 12, 13};
  write_explanations(out, preds, original);
  std::istringstream in(out.str());
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("i") == 10);
    CHECK((j.at("predicted_sign") == 1 || j.at("predicted_sign") == -1));
    CHECK(j.at("k_pos").size() == 2);
    CHECK(j.at("k_neg").at(0).at("id") == 12);
    CHECK(j.at("k_neg").at(0).at("source") == "adjacency");
    ++count;
  }
  CHECK(count == 2);
}
