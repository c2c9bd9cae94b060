#include "sesg/expressivity.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "sesg/encodings.hpp"

namespace sesg {

namespace {

// Tagged hash of a word sequence; the length is folded in so different
// shapes never share an encoding.
class WordHash {
 public:
  explicit WordHash(std::uint64_t tag) { add(tag); }
  WordHash& add(std::uint64_t w) {
    h_.update(&w, sizeof(w));
    return *this;
  }
  WordHash& add_multiset(std::vector<std::uint64_t> words) {
    std::sort(words.begin(), words.end());
    add(words.size());
    for (auto w : words) add(w);
    return *this;
  }
  std::uint64_t digest() const { return mix64(h_.digest()); }

 private:
  Fnv1a h_;
};

constexpr std::uint64_t kInitial = 0x1a7e1;
constexpr std::uint64_t kFirstB = 0xb1, kFirstU = 0xa1, kNextB = 0xb2, kNextU = 0xa2;

std::size_t distinct(const std::vector<WlLabeling::Label>& labels) {
  return std::set<WlLabeling::Label>(labels.begin(), labels.end()).size();
}

}  // namespace

std::vector<WlLabeling::Label> WlLabeling::multiset(std::size_t l) const {
  auto out = labels.at(l - 1);
  std::sort(out.begin(), out.end());
  return out;
}

WlLabeling extended_wl_labels(const SignedGraph& g, std::size_t iterations, bool stop_when_stable) {
  const std::size_t n = g.num_nodes();
  WlLabeling wl;
  if (iterations == 0) return wl;
  const std::uint64_t x0 = WordHash(kInitial).digest();

  std::vector<WlLabeling::Label> cur(n);
  for (NodeId i = 0; i < n; ++i) {
    std::vector<std::uint64_t> pos, neg;
    for (const auto& nb : g.neighbors(i)) (nb.sign == Sign::Positive ? pos : neg).push_back(x0);
    cur[i] = {WordHash(kFirstB).add(x0).add_multiset(pos).digest(),
              WordHash(kFirstU).add(x0).add_multiset(neg).digest()};
  }
  wl.labels.push_back(cur);

  for (std::size_t l = 2; l <= iterations; ++l) {
    std::vector<WlLabeling::Label> next(n);
    for (NodeId i = 0; i < n; ++i) {
      std::vector<std::uint64_t> b_pos, u_neg, u_pos, b_neg;
      for (const auto& nb : g.neighbors(i)) {
        const auto& lab = cur[nb.node];
        if (nb.sign == Sign::Positive) {
          b_pos.push_back(lab.first);
          u_pos.push_back(lab.second);
        } else {
          u_neg.push_back(lab.second);
          b_neg.push_back(lab.first);
        }
      }
      next[i] = {WordHash(kNextB).add(cur[i].first).add_multiset(b_pos).add_multiset(u_neg).digest(),
                 WordHash(kNextU).add(cur[i].second).add_multiset(u_pos).add_multiset(b_neg).digest()};
    }
    const bool refined = distinct(next) > distinct(cur);
    if (!refined && wl.stable_iteration == 0) wl.stable_iteration = l - 1;
    wl.labels.push_back(next);
    cur = std::move(next);
    if (!refined && stop_when_stable) break;
  }
  if (wl.stable_iteration == 0) wl.stable_iteration = wl.labels.size();
  return wl;
}

// ---- walk signatures -----------------------------------------------------------

namespace {

struct WalkEnumerator {
  const SignedGraph& g;
  std::size_t max_steps;
  std::vector<NodeId> path;
  std::vector<int> prefix;
  std::vector<std::uint64_t> walk_hashes;
  std::vector<int> self_returns;

  void record() {
    WordHash h(0x3a1c);
    h.add(path.size());
    for (std::size_t t = 1; t < path.size(); ++t) {
      std::int64_t first = -1;
      for (std::size_t s = 0; s < t; ++s)
        if (path[s] == path[t]) {
          first = static_cast<std::int64_t>(s);
          break;
        }
      h.add(static_cast<std::uint64_t>(prefix[t] + 1)).add(static_cast<std::uint64_t>(first + 1));
    }
    walk_hashes.push_back(h.digest());
    if (walk_hashes.size() > kMaxEnumeratedWalks)
      throw ConstraintError("walk enumeration exceeds " + std::to_string(kMaxEnumeratedWalks) + " walks");
  }

  void extend() {
    const std::size_t t = path.size() - 1;
    if (t > 0 && path[t] == path[0]) self_returns.push_back(prefix[t] * static_cast<int>(t));
    const auto nbrs = g.neighbors(path.back());
    if (t == max_steps || nbrs.empty()) {
      record();
      return;
    }
    const bool can_skip_prev = t > 0 && nbrs.size() > 1;
    for (const auto& nb : nbrs) {
      if (can_skip_prev && nb.node == path[t - 1]) continue;
      path.push_back(nb.node);
      prefix.push_back(prefix.back() * to_int(nb.sign));
      extend();
      path.pop_back();
      prefix.pop_back();
    }
  }
};

}  // namespace

NodeWalkSignature node_walk_signature(const SignedGraph& g, NodeId start, std::size_t max_steps) {
  if (max_steps < 1) throw ConfigError("walk signature needs at least one step");
  WalkEnumerator en{g, max_steps, {start}, {1}, {}, {}};
  en.extend();
  NodeWalkSignature sig;
  std::sort(en.self_returns.begin(), en.self_returns.end());
  sig.self_returns = std::move(en.self_returns);
  WordHash h(0x5e1f);
  h.add_multiset(std::move(en.walk_hashes));
  sig.hash = h.digest();
  return sig;
}

GraphSignature walk_signature(const SignedGraph& g, std::size_t max_steps) {
  GraphSignature sig;
  for (NodeId v = 0; v < g.num_nodes(); ++v) sig.nodes.push_back(node_walk_signature(g, v, max_steps).hash);
  std::sort(sig.nodes.begin(), sig.nodes.end());
  return sig;
}

std::vector<int> shortest_path_multiset(const SignedGraph& g, NodeId node) {
  const auto spe = shortest_path_signed_encoding(g, g.num_nodes());
  std::vector<int> out;
  for (NodeId t = 0; t < g.num_nodes(); ++t)
    if (t != node) out.push_back(spe(node, t));
  std::sort(out.begin(), out.end());
  return out;
}

GraphSignature shortest_path_signature(const SignedGraph& g) {
  const auto spe = shortest_path_signed_encoding(g, g.num_nodes());
  GraphSignature sig;
  for (NodeId s = 0; s < g.num_nodes(); ++s) {
    std::vector<std::uint64_t> row;
    for (NodeId t = 0; t < g.num_nodes(); ++t)
      if (t != s) row.push_back(static_cast<std::uint64_t>(static_cast<std::int64_t>(spe(s, t))));
    sig.nodes.push_back(WordHash(0x5b).add_multiset(std::move(row)).digest());
  }
  std::sort(sig.nodes.begin(), sig.nodes.end());
  return sig;
}

bool wl_equivalent(const SignedGraph& a, const SignedGraph& b) {
  if (a.num_nodes() != b.num_nodes()) return false;
  const std::size_t rounds = std::max<std::size_t>(a.num_nodes(), 1);
  const auto la = extended_wl_labels(a, rounds, false);
  const auto lb = extended_wl_labels(b, rounds, false);
  for (std::size_t l = 1; l <= rounds; ++l)
    if (la.multiset(l) != lb.multiset(l)) return false;
  return true;
}

EncodingComparison compare_encodings(const SignedGraph& a, const SignedGraph& b, std::size_t walk_steps) {
  EncodingComparison c;
  c.walk_steps = walk_steps;
  c.spe_same = shortest_path_signature(a) == shortest_path_signature(b);
  c.walk_same = walk_signature(a, walk_steps) == walk_signature(b, walk_steps);
  c.wl_same = wl_equivalent(a, b);
  return c;
}

std::string EncodingComparison::to_json() const {
  nlohmann::ordered_json j;
  j["spe"] = spe_same ? "same" : "different";
  j["walk"] = walk_same ? "same" : "different";
  j["wl"] = wl_same ? "same" : "different";
  j["walk_steps"] = walk_steps;
  return j.dump(2);
}

}  // namespace sesg
