#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "sesg/common.hpp"

namespace sesg {

enum class Sign : std::int8_t { Negative = -1, Positive = 1 };

constexpr int to_int(Sign s) noexcept { return static_cast<int>(s); }

struct SignedEdge {
  NodeId src = 0;
  NodeId dst = 0;
  Sign sign = Sign::Positive;

  friend bool operator==(const SignedEdge&, const SignedEdge&) = default;
  friend auto operator<=>(const SignedEdge&, const SignedEdge&) = default;
};

struct Neighbor {
  NodeId node = 0;
  Sign sign = Sign::Positive;
};

/// Directed signed graph with disjoint positive and negative edge sets and no
/// self-loops. Immutable after construction.
///
/// When `undirected` is set every edge is stored in both directions and the
/// graph is treated as a set of unordered pairs by the splitter.
class SignedGraph {
 public:
  SignedGraph() = default;

  /// Validates and deduplicates `edges`. Throws ConstraintError when an ordered
  /// pair carries both signs, on self-loops, or on ids >= num_nodes.
  SignedGraph(std::size_t num_nodes, std::vector<SignedEdge> edges, bool undirected = false);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t num_positive() const noexcept { return num_positive_; }
  std::size_t num_negative() const noexcept { return edges_.size() - num_positive_; }
  bool undirected() const noexcept { return undirected_; }

  /// All directed edges sorted by (src, dst).
  const std::vector<SignedEdge>& edges() const noexcept { return edges_; }
  std::vector<SignedEdge> positive_edges() const;
  std::vector<SignedEdge> negative_edges() const;

  /// A[i][j] in {-1, 0, +1}.
  int sign(NodeId i, NodeId j) const;
  bool has_edge(NodeId i, NodeId j) const { return sign(i, j) != 0; }

  /// Out-neighbours sorted by id.
  std::span<const Neighbor> out_neighbors(NodeId i) const;

  /// Neighbours in either direction, sorted by id. When the two directions of
  /// a pair disagree in sign, the edge stored from the smaller id wins.
  std::span<const Neighbor> neighbors(NodeId i) const;

  Eigen::SparseMatrix<double, Eigen::RowMajor> adjacency() const;

  /// Original ids from the input file (identity unless ids were compacted).
  const std::vector<std::int64_t>& original_ids() const noexcept { return original_ids_; }
  void set_original_ids(std::vector<std::int64_t> ids);

 private:
  std::size_t num_nodes_ = 0;
  std::size_t num_positive_ = 0;
  bool undirected_ = false;
  std::vector<SignedEdge> edges_;
  std::vector<std::size_t> out_offsets_{0};
  std::vector<Neighbor> out_;
  std::vector<std::size_t> und_offsets_{0};
  std::vector<Neighbor> und_;
  std::vector<std::int64_t> original_ids_;
};

struct DegreeProfile {
  std::vector<std::size_t> pos_degree;
  std::vector<std::size_t> neg_degree;
};

/// Out-degree per sign.
DegreeProfile degree_profile(const SignedGraph& g);

// ---- ingestion --------------------------------------------------------------

struct LoadOptions {
  bool undirected = false;  // mirror every edge
  bool compact_ids = false; // remap ids to 0..n-1 in order of first appearance
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t comments = 0;
  std::size_t duplicates = 0;
  std::size_t self_loops = 0;  // dropped
};

/// Parses `src dst sign` records separated by tabs or spaces. Lines starting
/// with '#' and blank lines are skipped. Sign must be 1 or -1.
SignedGraph parse_edge_list(std::istream& in, const LoadOptions& opts = {}, LoadReport* report = nullptr);
SignedGraph load_edge_list(const std::filesystem::path& path, const LoadOptions& opts = {},
                           LoadReport* report = nullptr);

void write_edge_list(std::ostream& out, std::span<const SignedEdge> edges);
/// Writes one line per stored edge; undirected graphs write each pair once
/// (src < dst) so that reloading with `undirected` reproduces the graph.
void save_edge_list(const SignedGraph& g, const std::filesystem::path& path);

// ---- splitting --------------------------------------------------------------

struct EdgeSplit {
  std::vector<SignedEdge> train;
  std::vector<SignedEdge> test;
  std::uint64_t seed = 0;
  double ratio = 0.8;
  bool undirected = false;  // units are unordered pairs stored with src < dst

  std::uint64_t checksum() const;
};

/// Shuffles edge units (ordered edges, or unordered pairs for undirected
/// graphs) with `seed` and keeps round(ratio * units) for training. When the
/// graph has both signs the training part is repaired to contain both.
EdgeSplit split_edges(const SignedGraph& g, double ratio, std::uint64_t seed);

/// Graph restricted to the training units (test edges removed).
SignedGraph training_graph(const SignedGraph& g, const EdgeSplit& split);

/// train.tsv, test.tsv and manifest.json under `dir`.
void save_split(const EdgeSplit& split, const std::filesystem::path& dir);
EdgeSplit load_split(const std::filesystem::path& dir);

// ---- synthetic data ---------------------------------------------------------

struct BalancedGraphParams {
  std::size_t nodes_per_block = 50;
  std::size_t blocks = 2;
  double p_intra = 0.2;
  double p_inter = 0.2;
  double flip_noise = 0.0;
  std::uint64_t seed = 0;
};

/// Undirected block graph: each unordered pair is sampled once, intra-block
/// pairs positive and inter-block pairs negative, each sign flipped with
/// probability `flip_noise`. Node v belongs to block v / nodes_per_block.
SignedGraph generate_balanced_graph(const BalancedGraphParams& params);

}  // namespace sesg
