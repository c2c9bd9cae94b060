#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "sesg/graph.hpp"
#include "support.hpp"

using namespace sesg;

namespace {

SignedGraph parse(const std::string& text, LoadOptions opts = {}, LoadReport* rep = nullptr) {
  std::istringstream in(text);
  return parse_edge_list(in, opts, rep);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("edge list parsing") {
  LoadReport rep;
  const auto g = parse("# comment\n0 1 1\n1\t2\t-1\n\n2 2 1\n0 1 1\n", {}, &rep);
  CHECK(g.num_nodes() == 3);
  CHECK(g.num_edges() == 2);
  CHECK(g.sign(0, 1) == 1);
  CHECK(g.sign(1, 2) == -1);
  CHECK(g.sign(1, 0) == 0);
  CHECK(rep.self_loops == 1);
  CHECK(rep.duplicates == 1);
  CHECK(rep.comments == 1);
}

TEST_CASE("parse errors carry the line number") {
  auto line_of = [](const std::string& text) {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  CHECK(line_of("0 1 1\n1 2 0\n") == 2);
  CHECK(line_of("0 1 1\n\n# c\n1 x 1\n") == 4);
  CHECK(line_of("0 1\n") == 1);
  CHECK(line_of("-3 1 1\n") == 1);
  CHECK(line_of("0 1 1 7\n") == 1);
}

TEST_CASE("a pair with both signs is rejected") {
  CHECK_THROWS_AS(parse("0 1 1\n0 1 -1\n"), ConstraintError);
  CHECK_THROWS_AS(parse("0 1 1\n1 0 -1\n", {.undirected = true}), ConstraintError);
  CHECK_NOTHROW(parse("0 1 1\n1 0 -1\n"));
  CHECK_THROWS_AS(SignedGraph(3, {{0, 1, Sign::Positive}, {0, 1, Sign::Negative}}), ConstraintError);
  CHECK_THROWS_AS(SignedGraph(3, {{1, 1, Sign::Positive}}), ConstraintError);
  CHECK_THROWS_AS(SignedGraph(2, {{0, 5, Sign::Positive}}), ConstraintError);
}

TEST_CASE("undirected graphs mirror every edge") {
  const auto g = parse("0 1 1\n2 1 -1\n", {.undirected = true});
  CHECK(g.num_edges() == 4);
  CHECK(g.sign(1, 0) == 1);
  CHECK(g.sign(1, 2) == -1);
  CHECK(g.out_neighbors(1).size() == 2);
}

TEST_CASE("compacted ids keep the original table") {
  const auto g = parse("100 7 1\n7 42 -1\n", {.compact_ids = true});
  CHECK(g.num_nodes() == 3);
  CHECK(g.original_ids() == std::vector<std::int64_t>{100, 7, 42});
  CHECK(g.sign(0, 1) == 1);
  CHECK(g.sign(1, 2) == -1);
}

TEST_CASE("degree profile counts out-edges per sign") {
  const auto g = parse("0 1 1\n0 2 -1\n0 3 -1\n3 0 1\n");
  const auto d = degree_profile(g);
  CHECK(d.pos_degree[0] == 1);
  CHECK(d.neg_degree[0] == 2);
  CHECK(d.pos_degree[3] == 1);
  CHECK(d.neg_degree[1] == 0);
}

TEST_CASE("edge list round trip") {
  for (bool undirected : {false, true}) {
    const auto g = testing::random_graph(30, 0.1, 0.3, 17, undirected);
    const auto path = std::filesystem::temp_directory_path() / "sesg_graph_rt.tsv";
    save_edge_list(g, path);
    const auto back = load_edge_list(path, {.undirected = undirected});
    CHECK(back.edges() == g.edges());
    std::filesystem::remove(path);
  }
  CHECK_THROWS_AS(load_edge_list("/nonexistent/sesg.tsv"), IoError);
}

TEST_CASE("split is deterministic and partitions the units") {
  const auto g = testing::random_graph(40, 0.15, 0.3, 5, false);
  const auto a = split_edges(g, 0.8, 11);
  const auto b = split_edges(g, 0.8, 11);
  const auto c = split_edges(g, 0.8, 12);
  CHECK(a.train == b.train);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());
  CHECK(a.train.size() == static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(g.num_edges()))));
  std::set<SignedEdge> all(a.train.begin(), a.train.end());
  for (const auto& e : a.test) CHECK(all.insert(e).second);
  CHECK(all == std::set<SignedEdge>(g.edges().begin(), g.edges().end()));
  CHECK_THROWS_AS(split_edges(g, 1.0, 1), ConfigError);
}

TEST_CASE("undirected split uses each pair once") {
  const auto g = testing::random_connected_graph(30, 0.2, 0.3, 8);
  const auto s = split_edges(g, 0.8, 3);
  CHECK(s.train.size() + s.test.size() == g.num_edges() / 2);
  for (const auto& e : s.train) CHECK(e.src < e.dst);
  const auto tg = training_graph(g, s);
  CHECK(tg.num_edges() == 2 * s.train.size());
  for (const auto& e : s.test) CHECK_FALSE(tg.has_edge(e.src, e.dst));
}

TEST_CASE("split training part keeps both signs") {
  // One negative edge among many positives, and a ratio that leaves a single
  // training unit: the negative must still be trained on.
  std::vector<SignedEdge> edges;
  for (NodeId i = 1; i < 20; ++i) edges.push_back({0, i, Sign::Positive});
  edges.push_back({1, 2, Sign::Negative});
  const SignedGraph g(20, edges);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_edges(g, 0.1, seed);
    bool pos = false, neg = false;
    for (const auto& e : s.train) (e.sign == Sign::Positive ? pos : neg) = true;
    CHECK(pos);
    CHECK(neg);
  }
}

TEST_CASE("split save and load") {
  const auto g = testing::random_graph(25, 0.2, 0.4, 2, false);
  const auto s = split_edges(g, 0.7, 9);
  const auto dir = temp_dir("sesg_split_rt");
  save_split(s, dir);
  const auto back = load_split(dir);
  CHECK(back.train == s.train);
  CHECK(back.test == s.test);
  CHECK(back.seed == 9);
  CHECK(back.checksum() == s.checksum());

  std::ofstream(dir / "test.tsv", std::ios::app) << "0 24 1\n";
  CHECK_THROWS_AS(load_split(dir), ConstraintError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("balanced generator edge counts follow the binomial expectation") {
  // Two blocks of 50 at p = 0.2: 2 * C(50, 2) = 2450 intra pairs and 2500
  // inter pairs, so 490 positive and 500 negative pairs on average.
  double pos_total = 0, neg_total = 0;
  const int runs = 20;
  for (int r = 0; r < runs; ++r) {
    const auto g = generate_balanced_graph({.seed = static_cast<std::uint64_t>(r)});
    CHECK(g.undirected());
    const double pos = static_cast<double>(g.num_positive()) / 2;
    const double neg = static_cast<double>(g.num_negative()) / 2;
    CHECK(std::abs(pos - 490) < 4 * std::sqrt(2450 * 0.2 * 0.8));
    CHECK(std::abs(neg - 500) < 4 * std::sqrt(2500 * 0.2 * 0.8));
    pos_total += pos;
    neg_total += neg;
  }
  CHECK(std::abs(pos_total / runs - 490) < 4 * std::sqrt(2450 * 0.2 * 0.8 / runs));
  CHECK(std::abs(neg_total / runs - 500) < 4 * std::sqrt(2500 * 0.2 * 0.8 / runs));
}

TEST_CASE("balanced generator without noise is structurally balanced") {
  const auto g = generate_balanced_graph({.nodes_per_block = 20, .blocks = 3, .p_intra = 0.3, .p_inter = 0.1, .seed = 4});
  for (const auto& e : g.edges()) {
    const bool same = e.src / 20 == e.dst / 20;
    CHECK((e.sign == Sign::Positive) == same);
  }
  const auto a = generate_balanced_graph({.seed = 3});
  const auto b = generate_balanced_graph({.seed = 3});
  CHECK(a.edges() == b.edges());
}

TEST_CASE("flip noise flips the expected share of signs") {
  const auto g = generate_balanced_graph({.nodes_per_block = 60, .p_intra = 0.5, .p_inter = 0.5, .flip_noise = 0.1, .seed = 1});
  std::size_t flipped = 0, total = 0;
  for (const auto& e : g.edges()) {
    if (e.src > e.dst) continue;
    ++total;
    if ((e.sign == Sign::Positive) != (e.src / 60 == e.dst / 60)) ++flipped;
  }
  const double share = static_cast<double>(flipped) / static_cast<double>(total);
  CHECK(std::abs(share - 0.1) < 4 * std::sqrt(0.09 / static_cast<double>(total)));
}
