#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sesg/common.hpp"
#include "sesg/graph.hpp"
#include "sesg/srwr.hpp"

namespace sesg {

/// ||z_i - z_j||_2
template <typename Derived>
typename Derived::Scalar pairwise_distance(const Eigen::MatrixBase<Derived>& z, NodeId i, NodeId j) {
  return (z.row(i) - z.row(j)).norm();
}

enum class NeighborSource : std::uint8_t { Adjacency, Diffusion };

const char* to_string(NeighborSource s) noexcept;

struct ContextEntry {
  NodeId id = 0;
  double dist = 0.0;
  NeighborSource source = NeighborSource::Adjacency;
};

struct NeighborContext {
  NodeId node = 0;
  std::vector<ContextEntry> k_pos;  // ascending distance
  std::vector<ContextEntry> k_neg;  // descending distance
  double d_ip = 0.0;
  double d_in = 0.0;
  bool degenerate = false;  // one side has no neighbours at all
};

struct DecoderConfig {
  std::size_t k = 40;
  std::size_t n_sample = 200;
  bool symmetric = false;  // average the medians of both endpoints

  void validate() const;
};

/// Median with the mean of the two central values for even sizes. 0 if empty.
double median(std::vector<double> values);

/// Positive candidates are the out-neighbours of `node` with sign +1, or the
/// +1 entries of S when there are none. Negative candidates are the -1
/// out-neighbours, topped up from the -1 entries of S when fewer than K exist.
/// Each source is sampled without replacement down to n_sample (all are used
/// when fewer are available); the K nearest positives and the K farthest
/// negatives are kept, ties broken by smaller id.
NeighborContext neighbor_context(NodeId node, const Matrix<double>& z, const SignedGraph& g, const DiffusionMatrix* s,
                                 const DecoderConfig& cfg, std::uint64_t seed);

struct ExplainedPrediction {
  NodeId i = 0;
  NodeId j = 0;
  int predicted_sign = 1;
  double d_ij = 0.0;
  double d_ip = 0.0;
  double d_in = 0.0;
  double margin = 0.0;  // |d_ij - d_ip| - |d_ij - d_in|
  bool tie = false;
  bool degenerate = false;
  NeighborContext context;
};

/// +1 iff |d_ij - d_ip| <= |d_ij - d_in|. A degenerate context predicts
/// `fallback_sign` and sets the flag.
ExplainedPrediction predict_sign(NodeId i, NodeId j, const Matrix<double>& z, const NeighborContext& context_i,
                                 int fallback_sign = 1);

/// Symmetric variant: medians averaged over the contexts of i and j.
ExplainedPrediction predict_sign(NodeId i, NodeId j, const Matrix<double>& z, const NeighborContext& context_i,
                                 const NeighborContext& context_j, int fallback_sign = 1);

/// Builds contexts (seeded per source node) and predicts every query edge.
std::vector<ExplainedPrediction> explain_edges(std::span<const SignedEdge> queries, const Matrix<double>& z,
                                               const SignedGraph& g, const DiffusionMatrix* s,
                                               const DecoderConfig& cfg, std::uint64_t seed, int fallback_sign,
                                               unsigned threads = 1);

struct ExplanationSets {
  std::vector<NodeId> nearest;   // ascending distance, smaller id first on ties
  std::vector<NodeId> farthest;  // descending distance, smaller id first on ties
};

/// K nearest and K farthest other nodes of every node under z_ref.
std::vector<ExplanationSets> generate_ground_truth_explanations(const Matrix<double>& z_ref, std::size_t k);

/// Mean over nodes and over the two sides of |predicted ∩ truth| / K.
/// `nodes` selects which rows of both tables take part.
double precision_at_k(std::span<const ExplanationSets> predicted, std::span<const ExplanationSets> truth,
                      std::span<const NodeId> nodes, std::size_t k);

/// The selected neighbour ids of a context as explanation sets.
ExplanationSets context_sets(const NeighborContext& ctx);

/// One JSON object per line.
void write_explanations(std::ostream& out, std::span<const ExplainedPrediction> predictions,
                        std::span<const std::int64_t> original_ids = {});

}  // namespace sesg
