#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sesg/graph.hpp"

namespace sesg {

/// Per-iteration (balanced, unbalanced) labels of the extended signed WL test.
/// labels[l - 1][i] is the pair of node i after iteration l.
struct WlLabeling {
  using Label = std::pair<std::uint64_t, std::uint64_t>;
  std::vector<std::vector<Label>> labels;
  std::size_t stable_iteration = 0;  // first l whose partition the next iteration did not refine

  /// Sorted label pairs after iteration l (1-based).
  std::vector<Label> multiset(std::size_t l) const;
};

/// Iteration 1 hashes each node's initial label with the multiset of its
/// positive (balanced) or negative (unbalanced) neighbours' labels. Later
/// iterations combine the node's own label of that kind with the same-kind
/// labels of positive neighbours and the opposite-kind labels of negative
/// neighbours. The hash is structural, so labels agree across graphs. Runs
/// `iterations` rounds unless `stop_when_stable` ends it earlier.
WlLabeling extended_wl_labels(const SignedGraph& g, std::size_t iterations, bool stop_when_stable = true);

struct NodeWalkSignature {
  std::uint64_t hash = 0;
  std::vector<int> self_returns;  // signed step counts of every return to the start, sorted
};

struct GraphSignature {
  std::vector<std::uint64_t> nodes;  // sorted node hashes
  friend bool operator==(const GraphSignature&, const GraphSignature&) = default;
};

inline constexpr std::size_t kMaxEnumeratedWalks = 10'000'000;

/// Every non-backtracking walk of up to max_steps from `start` (backtracking
/// only at dead ends), each encoded without node ids as, per step, the sign of
/// the prefix and the first earlier position holding the same node.
NodeWalkSignature node_walk_signature(const SignedGraph& g, NodeId start, std::size_t max_steps);

/// Multiset of node walk signatures. Throws ConstraintError if the
/// enumeration would exceed kMaxEnumeratedWalks walks.
GraphSignature walk_signature(const SignedGraph& g, std::size_t max_steps);

/// Sorted signed shortest-path distances from `node` to every other node.
std::vector<int> shortest_path_multiset(const SignedGraph& g, NodeId node);

GraphSignature shortest_path_signature(const SignedGraph& g);

/// Same node count and equal sorted label multisets after each of n WL
/// iterations.
bool wl_equivalent(const SignedGraph& a, const SignedGraph& b);

struct EncodingComparison {
  bool spe_same = false;
  bool walk_same = false;
  bool wl_same = false;
  std::size_t walk_steps = 0;

  std::string to_json() const;
};

EncodingComparison compare_encodings(const SignedGraph& a, const SignedGraph& b, std::size_t walk_steps = 6);

}  // namespace sesg
