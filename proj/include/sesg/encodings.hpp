#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sesg/common.hpp"
#include "sesg/graph.hpp"

namespace sesg {

// ---- node features ----------------------------------------------------------

/// Rows of U * Sigma^(1/2) from the rank-d truncated SVD of the signed
/// adjacency matrix. Each left singular vector is oriented so that its
/// largest-magnitude entry (lowest index on ties) is positive.
Matrix<double> spectral_init(const SignedGraph& g, std::size_t d);

/// Row index into the centrality tables: min(degree, max_degree).
std::vector<std::size_t> clipped_degrees(std::span<const std::size_t> degree, std::size_t max_degree);

/// h0[i] = x[i] + c_neg[min(deg-, D)] + c_pos[min(deg+, D)]. The tables have
/// D + 1 rows and the same width as x.
template <typename Scalar>
Matrix<Scalar> centrality_encode(const Matrix<Scalar>& x, std::span<const std::size_t> pos_index,
                                 std::span<const std::size_t> neg_index, const Matrix<Scalar>& c_pos,
                                 const Matrix<Scalar>& c_neg) {
  if (c_pos.cols() != x.cols() || c_neg.cols() != x.cols())
    throw ConstraintError("centrality table width does not match feature width");
  Matrix<Scalar> h = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    h.row(i) += c_pos.row(static_cast<Eigen::Index>(pos_index[static_cast<std::size_t>(i)]));
    h.row(i) += c_neg.row(static_cast<Eigen::Index>(neg_index[static_cast<std::size_t>(i)]));
  }
  return h;
}

// ---- attention biases -------------------------------------------------------

/// D^(-1/2) A D^(-1/2), D the degree of each node in the undirected view of
/// the graph. Rows and columns of isolated nodes are zero.
Matrix<double> adjacency_bias(const SignedGraph& g);

/// r walks per start node. walks[start * r + k] is the k-th walk from start.
struct WalkSet {
  std::size_t num_nodes = 0;
  std::size_t num_walks = 0;    // r
  std::size_t walk_length = 0;  // l (steps)
  std::uint64_t seed = 0;
  std::vector<std::vector<NodeId>> walks;

  std::span<const NodeId> walk(NodeId start, std::size_t k) const { return walks[start * num_walks + k]; }
  friend bool operator==(const WalkSet&, const WalkSet&) = default;
};

/// Non-backtracking walks over the undirected view: the predecessor is
/// excluded unless it is the only neighbour. A walk stops early at an isolated
/// node. Start nodes draw from independent substreams of `seed`.
WalkSet sample_signed_walks(const SignedGraph& g, std::size_t num_walks, std::size_t walk_length,
                            std::uint64_t seed, unsigned threads = 1);

void save_walk_set(const WalkSet& walks, const std::filesystem::path& path);
WalkSet load_walk_set(const std::filesystem::path& path);

struct WalkDistance {
  NodeId from = 0;
  NodeId to = 0;
  int psi = 0;
};

/// Signed walk distance for every ordered pair co-occurring in `walk`: the
/// product of edge signs on the segment between the two positions times the
/// hop count. Among several co-occurrences the smallest hop count wins, then
/// the earliest position of `to`. Segments longer than max_path_length are
/// ignored. Results are sorted by (from, to).
std::vector<WalkDistance> signed_walk_distance(std::span<const NodeId> walk, const SignedGraph& g,
                                               std::size_t max_path_length);

/// psi(start, j) for every j visited by a walk that begins at walk[0].
std::vector<WalkDistance> start_walk_distances(std::span<const NodeId> walk, const SignedGraph& g,
                                               std::size_t max_path_length);

/// Sparse form of the per-walk reciprocal distances. For walk index k,
/// inv_psi_k(i, j) = unreachable + correction when (i, j) is listed in
/// entries[k], otherwise unreachable = 1 / (m_max + 1). Self pairs are always
/// listed with value 0 (psi = 0 contributes nothing).
struct WalkBiasBasis {
  std::size_t num_nodes = 0;
  double unreachable = 0.0;
  struct Entry {
    NodeId i;
    NodeId j;
    double correction;
  };
  std::vector<std::vector<Entry>> entries;  // one list per walk index

  std::size_t num_walks() const noexcept { return entries.size(); }
};

WalkBiasBasis walk_bias_basis(const WalkSet& walks, const SignedGraph& g, std::size_t max_path_length);

/// b(i, j) = sum_k w_k / psi_k(i, j).
template <typename Scalar>
Matrix<Scalar> walk_bias(const WalkBiasBasis& basis, const Vector<Scalar>& weights) {
  if (static_cast<std::size_t>(weights.size()) != basis.num_walks())
    throw ConstraintError("walk weight count does not match the number of walks per node");
  const auto n = static_cast<Eigen::Index>(basis.num_nodes);
  Matrix<Scalar> b = Matrix<Scalar>::Constant(n, n, weights.sum() * Scalar(basis.unreachable));
  for (std::size_t k = 0; k < basis.num_walks(); ++k)
    for (const auto& e : basis.entries[k]) b(e.i, e.j) += weights(static_cast<Eigen::Index>(k)) * Scalar(e.correction);
  return b;
}

/// Gradient of a scalar loss w.r.t. the walk weights given dL/db.
template <typename Scalar>
Vector<Scalar> walk_weight_gradient(const WalkBiasBasis& basis, const Matrix<Scalar>& grad_bias) {
  Vector<Scalar> g(static_cast<Eigen::Index>(basis.num_walks()));
  const Scalar total = grad_bias.sum() * Scalar(basis.unreachable);
  for (std::size_t k = 0; k < basis.num_walks(); ++k) {
    Scalar acc = total;
    for (const auto& e : basis.entries[k]) acc += Scalar(e.correction) * grad_bias(e.i, e.j);
    g(static_cast<Eigen::Index>(k)) = acc;
  }
  return g;
}

/// Elementwise sum of the adjacency and walk biases.
template <typename Scalar>
Matrix<Scalar> assemble_attention_bias(const Matrix<Scalar>& adj_bias, const Matrix<Scalar>& walk_bias) {
  if (adj_bias.rows() != walk_bias.rows() || adj_bias.cols() != walk_bias.cols())
    throw ConstraintError("attention bias shape mismatch");
  return adj_bias + walk_bias;
}

/// Signed BFS distance on the undirected view. Neighbours are expanded in
/// ascending id order; the sign is the product along the first shortest path
/// found. Unreachable pairs get max_path_length + 1, the diagonal is 0.
Matrix<int> shortest_path_signed_encoding(const SignedGraph& g, std::size_t max_path_length);

}  // namespace sesg
