#include "sesg/encodings.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>

#include <Eigen/SVD>

namespace sesg {

namespace {

int undirected_sign(const SignedGraph& g, NodeId a, NodeId b) {
  auto row = g.neighbors(a);
  auto it = std::lower_bound(row.begin(), row.end(), b, [](const Neighbor& nb, NodeId id) { return nb.node < id; });
  if (it == row.end() || it->node != b) throw ConstraintError("walk step between non-adjacent nodes");
  return to_int(it->sign);
}

// prefix[t] = product of edge signs over walk steps 0..t-1.
std::vector<int> prefix_signs(std::span<const NodeId> walk, const SignedGraph& g) {
  std::vector<int> prefix(walk.size(), 1);
  for (std::size_t t = 1; t < walk.size(); ++t) prefix[t] = prefix[t - 1] * undirected_sign(g, walk[t - 1], walk[t]);
  return prefix;
}

}  // namespace

Matrix<double> spectral_init(const SignedGraph& g, std::size_t d) {
  const auto n = g.num_nodes();
  if (d > n) throw ConfigError("embedding width " + std::to_string(d) + " exceeds node count " + std::to_string(n));
  const auto rows = static_cast<Eigen::Index>(n);
  const auto width = static_cast<Eigen::Index>(d);
  Matrix<double> features = Matrix<double>::Zero(rows, width);
  if (n == 0 || d == 0 || g.num_edges() == 0) return features;

  const Matrix<double> a = Matrix<double>(g.adjacency());
  Eigen::BDCSVD<Matrix<double>> svd(a, Eigen::ComputeThinU);
  const Matrix<double>& u = svd.matrixU();
  const Vector<double>& sigma = svd.singularValues();
  for (Eigen::Index k = 0; k < width; ++k) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < rows; ++i)
      if (std::abs(u(i, k)) > std::abs(u(arg, k))) arg = i;
    const double orient = u(arg, k) < 0.0 ? -1.0 : 1.0;
    features.col(k) = orient * std::sqrt(sigma(k)) * u.col(k);
  }
  return features;
}

std::vector<std::size_t> clipped_degrees(std::span<const std::size_t> degree, std::size_t max_degree) {
  std::vector<std::size_t> out(degree.size());
  std::transform(degree.begin(), degree.end(), out.begin(),
                 [max_degree](std::size_t d) { return std::min(d, max_degree); });
  return out;
}

Matrix<double> adjacency_bias(const SignedGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix<double> bias = Matrix<double>::Zero(n, n);
  std::vector<double> inv_sqrt(g.num_nodes(), 0.0);
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto deg = g.neighbors(i).size();
    if (deg > 0) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(deg));
  }
  for (const auto& e : g.edges()) bias(e.src, e.dst) = to_int(e.sign) * inv_sqrt[e.src] * inv_sqrt[e.dst];
  return bias;
}

// ---- walks ------------------------------------------------------------------

WalkSet sample_signed_walks(const SignedGraph& g, std::size_t num_walks, std::size_t walk_length,
                            std::uint64_t seed, unsigned threads) {
  if (walk_length < 1) throw ConfigError("walk length must be at least 1");
  WalkSet ws;
  ws.num_nodes = g.num_nodes();
  ws.num_walks = num_walks;
  ws.walk_length = walk_length;
  ws.seed = seed;
  ws.walks.resize(g.num_nodes() * num_walks);
  parallel_for(g.num_nodes(), threads, [&](std::size_t start) {
    Rng rng(mix_seed(seed, start));
    for (std::size_t k = 0; k < num_walks; ++k) {
      auto& walk = ws.walks[start * num_walks + k];
      walk.reserve(walk_length + 1);
      walk.push_back(static_cast<NodeId>(start));
      bool has_prev = false;
      NodeId prev = 0;
      for (std::size_t step = 0; step < walk_length; ++step) {
        const NodeId cur = walk.back();
        auto nbrs = g.neighbors(cur);
        if (nbrs.empty()) break;
        NodeId next;
        if (!has_prev || nbrs.size() == 1) {
          next = nbrs[rng.index(nbrs.size())].node;
        } else {
          // Uniform over neighbours other than the predecessor.
          const auto prev_pos = static_cast<std::size_t>(
              std::lower_bound(nbrs.begin(), nbrs.end(), prev,
                               [](const Neighbor& nb, NodeId id) { return nb.node < id; }) -
              nbrs.begin());
          auto pick = rng.index(nbrs.size() - 1);
          if (pick >= prev_pos) ++pick;
          next = nbrs[pick].node;
        }
        has_prev = true;
        prev = cur;
        walk.push_back(next);
      }
    }
  });
  return ws;
}

namespace {
constexpr char kWalkMagic[8] = {'S', 'E', 'S', 'G', 'W', 'A', 'L', 'K'};
constexpr std::uint32_t kWalkVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated walk cache");
  return value;
}
}  // namespace

void save_walk_set(const WalkSet& ws, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write walk cache '" + path.string() + "'");
  out.write(kWalkMagic, sizeof(kWalkMagic));
  put<std::uint32_t>(out, kWalkVersion);
  put<std::uint64_t>(out, ws.num_nodes);
  put<std::uint64_t>(out, ws.num_walks);
  put<std::uint64_t>(out, ws.walk_length);
  put<std::uint64_t>(out, ws.seed);
  for (const auto& w : ws.walks) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(w.size()));
    out.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(NodeId)));
  }
}

WalkSet load_walk_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open walk cache '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kWalkMagic, sizeof(magic)) != 0) throw IoError("not a walk cache file");
  if (get<std::uint32_t>(in) != kWalkVersion) throw IoError("unsupported walk cache version");
  WalkSet ws;
  ws.num_nodes = get<std::uint64_t>(in);
  ws.num_walks = get<std::uint64_t>(in);
  ws.walk_length = get<std::uint64_t>(in);
  ws.seed = get<std::uint64_t>(in);
  ws.walks.resize(ws.num_nodes * ws.num_walks);
  for (auto& w : ws.walks) {
    w.resize(get<std::uint32_t>(in));
    in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(NodeId)));
    if (!in) throw IoError("truncated walk cache");
  }
  return ws;
}

std::vector<WalkDistance> signed_walk_distance(std::span<const NodeId> walk, const SignedGraph& g,
                                               std::size_t max_path_length) {
  const auto prefix = prefix_signs(walk, g);
  struct Best {
    std::size_t hops;
    std::size_t to_pos;
    int psi;
  };
  std::vector<std::pair<std::pair<NodeId, NodeId>, Best>> best;
  for (std::size_t m = 0; m < walk.size(); ++m) {
    for (std::size_t n = 0; n < walk.size(); ++n) {
      const std::size_t hops = m > n ? m - n : n - m;
      if (hops > max_path_length) continue;
      const int psi = prefix[m] * prefix[n] * static_cast<int>(hops);
      best.push_back({{walk[m], walk[n]}, {hops, n, psi}});
    }
  }
  std::sort(best.begin(), best.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    if (a.second.hops != b.second.hops) return a.second.hops < b.second.hops;
    return a.second.to_pos < b.second.to_pos;
  });
  std::vector<WalkDistance> out;
  for (std::size_t k = 0; k < best.size(); ++k)
    if (k == 0 || best[k].first != best[k - 1].first)
      out.push_back({best[k].first.first, best[k].first.second, best[k].second.psi});
  return out;
}

std::vector<WalkDistance> start_walk_distances(std::span<const NodeId> walk, const SignedGraph& g,
                                               std::size_t max_path_length) {
  if (walk.empty()) return {};
  auto all = signed_walk_distance(walk, g, max_path_length);
  std::erase_if(all, [start = walk.front()](const WalkDistance& w) { return w.from != start; });
  return all;
}

WalkBiasBasis walk_bias_basis(const WalkSet& walks, const SignedGraph& g, std::size_t max_path_length) {
  WalkBiasBasis basis;
  basis.num_nodes = walks.num_nodes;
  basis.unreachable = 1.0 / static_cast<double>(max_path_length + 1);
  basis.entries.resize(walks.num_walks);
  for (NodeId start = 0; start < walks.num_nodes; ++start) {
    for (std::size_t k = 0; k < walks.num_walks; ++k) {
      for (const auto& wd : start_walk_distances(walks.walk(start, k), g, max_path_length)) {
        const double inv = wd.psi == 0 ? 0.0 : 1.0 / static_cast<double>(wd.psi);
        basis.entries[k].push_back({wd.from, wd.to, inv - basis.unreachable});
      }
    }
  }
  return basis;
}

Matrix<int> shortest_path_signed_encoding(const SignedGraph& g, std::size_t max_path_length) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const int unreachable = static_cast<int>(max_path_length + 1);
  Matrix<int> out = Matrix<int>::Constant(n, n, unreachable);
  std::vector<int> dist(g.num_nodes());
  std::vector<int> sign(g.num_nodes());
  for (NodeId s = 0; s < g.num_nodes(); ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[s] = 0;
    sign[s] = 1;
    std::deque<NodeId> queue{s};
    while (!queue.empty()) {
      const NodeId u = queue.front();
      queue.pop_front();
      for (const auto& nb : g.neighbors(u)) {
        if (dist[nb.node] >= 0) continue;
        dist[nb.node] = dist[u] + 1;
        sign[nb.node] = sign[u] * to_int(nb.sign);
        queue.push_back(nb.node);
      }
    }
    for (NodeId t = 0; t < g.num_nodes(); ++t)
      if (dist[t] >= 0 && static_cast<std::size_t>(dist[t]) <= max_path_length) out(s, t) = sign[t] * dist[t];
  }
  return out;
}

}  // namespace sesg
