#include "sesg/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace sesg {

SignedGraph::SignedGraph(std::size_t num_nodes, std::vector<SignedEdge> edges, bool undirected)
    : num_nodes_(num_nodes), undirected_(undirected) {
  if (undirected) {
    const std::size_t n = edges.size();
    edges.reserve(2 * n);
    for (std::size_t k = 0; k < n; ++k) edges.push_back({edges[k].dst, edges[k].src, edges[k].sign});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    if (e.src >= num_nodes || e.dst >= num_nodes)
      throw ConstraintError("edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                            ") references a node outside 0.." + std::to_string(num_nodes));
    if (e.src == e.dst) throw ConstraintError("self-loop on node " + std::to_string(e.src));
    if (k > 0 && edges[k - 1].src == e.src && edges[k - 1].dst == e.dst)
      throw ConstraintError("pair (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                            ") appears with both signs");
  }
  edges_ = std::move(edges);
  num_positive_ = static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [](const SignedEdge& e) { return e.sign == Sign::Positive; }));

  out_offsets_.assign(num_nodes_ + 1, 0);
  for (const auto& e : edges_) ++out_offsets_[e.src + 1];
  for (std::size_t i = 0; i < num_nodes_; ++i) out_offsets_[i + 1] += out_offsets_[i];
  out_.resize(edges_.size());
  for (std::size_t k = 0; k < edges_.size(); ++k) out_[k] = {edges_[k].dst, edges_[k].sign};

  // Undirected view: union of both directions, sign from the smaller-id side.
  std::vector<std::vector<Neighbor>> und(num_nodes_);
  for (const auto& e : edges_) {
    und[e.src].push_back({e.dst, e.sign});
    und[e.dst].push_back({e.src, e.sign});
  }
  und_offsets_.assign(num_nodes_ + 1, 0);
  und_.clear();
  for (std::size_t i = 0; i < num_nodes_; ++i) {
    auto& list = und[i];
    std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    for (std::size_t k = 0; k < list.size();) {
      std::size_t end = k;
      while (end < list.size() && list[end].node == list[k].node) ++end;
      const NodeId j = list[k].node;
      const NodeId lo = std::min<NodeId>(static_cast<NodeId>(i), j);
      const NodeId hi = std::max<NodeId>(static_cast<NodeId>(i), j);
      int s = sign(lo, hi);
      if (s == 0) s = sign(hi, lo);
      und_.push_back({j, s > 0 ? Sign::Positive : Sign::Negative});
      k = end;
    }
    und_offsets_[i + 1] = und_.size();
  }
  original_ids_.resize(num_nodes_);
  for (std::size_t i = 0; i < num_nodes_; ++i) original_ids_[i] = static_cast<std::int64_t>(i);
}

std::vector<SignedEdge> SignedGraph::positive_edges() const {
  std::vector<SignedEdge> out;
  std::copy_if(edges_.begin(), edges_.end(), std::back_inserter(out),
               [](const SignedEdge& e) { return e.sign == Sign::Positive; });
  return out;
}

std::vector<SignedEdge> SignedGraph::negative_edges() const {
  std::vector<SignedEdge> out;
  std::copy_if(edges_.begin(), edges_.end(), std::back_inserter(out),
               [](const SignedEdge& e) { return e.sign == Sign::Negative; });
  return out;
}

int SignedGraph::sign(NodeId i, NodeId j) const {
  if (i >= num_nodes_) return 0;
  auto row = out_neighbors(i);
  auto it = std::lower_bound(row.begin(), row.end(), j,
                             [](const Neighbor& nb, NodeId id) { return nb.node < id; });
  if (it == row.end() || it->node != j) return 0;
  return to_int(it->sign);
}

std::span<const Neighbor> SignedGraph::out_neighbors(NodeId i) const {
  return {out_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
}

std::span<const Neighbor> SignedGraph::neighbors(NodeId i) const {
  return {und_.data() + und_offsets_[i], und_offsets_[i + 1] - und_offsets_[i]};
}

Eigen::SparseMatrix<double, Eigen::RowMajor> SignedGraph::adjacency() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges_.size());
  for (const auto& e : edges_) trips.emplace_back(e.src, e.dst, static_cast<double>(to_int(e.sign)));
  Eigen::SparseMatrix<double, Eigen::RowMajor> a(static_cast<Eigen::Index>(num_nodes_),
                                                 static_cast<Eigen::Index>(num_nodes_));
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

void SignedGraph::set_original_ids(std::vector<std::int64_t> ids) {
  if (ids.size() != num_nodes_) throw ConstraintError("original id table size mismatch");
  original_ids_ = std::move(ids);
}

DegreeProfile degree_profile(const SignedGraph& g) {
  DegreeProfile p;
  p.pos_degree.assign(g.num_nodes(), 0);
  p.neg_degree.assign(g.num_nodes(), 0);
  for (const auto& e : g.edges()) (e.sign == Sign::Positive ? p.pos_degree : p.neg_degree)[e.src]++;
  return p;
}

// ---- ingestion --------------------------------------------------------------

namespace {

bool parse_int(std::string_view tok, long long& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

}  // namespace

SignedGraph parse_edge_list(std::istream& in, const LoadOptions& opts, LoadReport* report) {
  LoadReport rep;
  std::vector<SignedEdge> edges;
  std::map<std::pair<long long, long long>, int> seen;
  std::unordered_map<long long, NodeId> compact;
  std::vector<std::int64_t> originals;
  long long max_id = -1;

  auto map_id = [&](long long id) -> NodeId {
    if (!opts.compact_ids) return static_cast<NodeId>(id);
    auto [it, inserted] = compact.try_emplace(id, static_cast<NodeId>(compact.size()));
    if (inserted) originals.push_back(id);
    return it->second;
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    ++rep.lines;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.front().front() == '#') {
      ++rep.comments;
      continue;
    }
    if (toks.size() != 3) throw ParseError("expected 'src dst sign', got " + std::to_string(toks.size()) + " fields", lineno);
    long long src = 0, dst = 0, sgn = 0;
    if (!parse_int(toks[0], src) || src < 0) throw ParseError("invalid source id '" + std::string(toks[0]) + "'", lineno);
    if (!parse_int(toks[1], dst) || dst < 0) throw ParseError("invalid target id '" + std::string(toks[1]) + "'", lineno);
    if (src > 0xfffffffeLL || dst > 0xfffffffeLL) throw ParseError("node id out of range", lineno);
    if (!parse_int(toks[2], sgn) || (sgn != 1 && sgn != -1))
      throw ParseError("sign must be 1 or -1, got '" + std::string(toks[2]) + "'", lineno);
    if (src == dst) {
      ++rep.self_loops;
      continue;
    }
    auto key = std::make_pair(src, dst);
    auto [it, inserted] = seen.try_emplace(key, static_cast<int>(sgn));
    if (!inserted) {
      if (it->second != sgn)
        throw ConstraintError("pair (" + std::to_string(src) + ", " + std::to_string(dst) +
                              ") appears with both signs (line " + std::to_string(lineno) + ")");
      ++rep.duplicates;
      continue;
    }
    if (opts.undirected) {
      auto rev = seen.find(std::make_pair(dst, src));
      if (rev != seen.end() && rev->second != sgn)
        throw ConstraintError("undirected pair (" + std::to_string(src) + ", " + std::to_string(dst) +
                              ") appears with both signs (line " + std::to_string(lineno) + ")");
    }
    max_id = std::max({max_id, src, dst});
    const NodeId s = map_id(src);
    const NodeId d = map_id(dst);
    edges.push_back({s, d, sgn > 0 ? Sign::Positive : Sign::Negative});
  }
  if (report) *report = rep;
  const std::size_t n = opts.compact_ids ? compact.size() : static_cast<std::size_t>(max_id + 1);
  SignedGraph g(n, std::move(edges), opts.undirected);
  if (opts.compact_ids) g.set_original_ids(std::move(originals));
  return g;
}

SignedGraph load_edge_list(const std::filesystem::path& path, const LoadOptions& opts, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list '" + path.string() + "'");
  return parse_edge_list(in, opts, report);
}

void write_edge_list(std::ostream& out, std::span<const SignedEdge> edges) {
  for (const auto& e : edges) out << e.src << '\t' << e.dst << '\t' << to_int(e.sign) << '\n';
}

void save_edge_list(const SignedGraph& g, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  if (!g.undirected()) {
    write_edge_list(out, g.edges());
  } else {
    std::vector<SignedEdge> half;
    for (const auto& e : g.edges())
      if (e.src < e.dst) half.push_back(e);
    write_edge_list(out, half);
  }
}

// ---- splitting --------------------------------------------------------------

std::uint64_t EdgeSplit::checksum() const {
  Fnv1a h;
  std::ostringstream os;
  write_edge_list(os, train);
  os << "--\n";
  write_edge_list(os, test);
  h.update(os.str());
  return h.digest();
}

EdgeSplit split_edges(const SignedGraph& g, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  std::vector<SignedEdge> units;
  for (const auto& e : g.edges())
    if (!g.undirected() || e.src < e.dst) units.push_back(e);
  if (units.size() < 2) throw ConstraintError("cannot split a graph with fewer than 2 edges");

  Rng rng(mix_seed(seed, 0x5b117));
  for (std::size_t i = units.size() - 1; i > 0; --i) std::swap(units[i], units[rng.index(i + 1)]);

  const auto total = units.size();
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
  n_train = std::clamp<std::size_t>(n_train, 1, total - 1);

  // Make sure the training part sees both signs whenever the graph has both.
  for (Sign s : {Sign::Positive, Sign::Negative}) {
    auto has = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t k = lo; k < hi; ++k)
        if (units[k].sign == s) return k;
      return total;
    };
    if (has(0, n_train) != total) continue;
    const std::size_t donor = has(n_train, total);
    if (donor == total) continue;
    // Swap with the last training unit whose sign is overrepresented.
    for (std::size_t k = n_train; k-- > 0;) {
      if (units[k].sign != s) {
        std::swap(units[k], units[donor]);
        break;
      }
    }
  }

  EdgeSplit split;
  split.seed = seed;
  split.ratio = ratio;
  split.undirected = g.undirected();
  split.train.assign(units.begin(), units.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(units.begin() + static_cast<std::ptrdiff_t>(n_train), units.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

SignedGraph training_graph(const SignedGraph& g, const EdgeSplit& split) {
  SignedGraph out(g.num_nodes(), split.train, split.undirected);
  out.set_original_ids(g.original_ids());
  return out;
}

void save_split(const EdgeSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (auto [name, part] : {std::pair{"train.tsv", &split.train}, std::pair{"test.tsv", &split.test}}) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write split file in '" + dir.string() + "'");
    write_edge_list(out, *part);
  }
  nlohmann::ordered_json manifest;
  manifest["seed"] = split.seed;
  manifest["ratio"] = split.ratio;
  manifest["undirected"] = split.undirected;
  manifest["checksum"] = hex64(split.checksum());
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

EdgeSplit load_split(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw IoError("missing split manifest in '" + dir.string() + "'");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(min);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("split manifest: ") + e.what(), 1);
  }
  EdgeSplit split;
  split.seed = manifest.at("seed").get<std::uint64_t>();
  split.ratio = manifest.at("ratio").get<double>();
  split.undirected = manifest.value("undirected", false);
  for (auto [name, part] : {std::pair{"train.tsv", &split.train}, std::pair{"test.tsv", &split.test}}) {
    std::ifstream in(dir / name);
    if (!in) throw IoError(std::string("missing split file ") + name);
    const SignedGraph g = parse_edge_list(in);
    part->assign(g.edges().begin(), g.edges().end());
  }
  if (hex64(split.checksum()) != manifest.at("checksum").get<std::string>())
    throw ConstraintError("split checksum mismatch in '" + dir.string() + "'");
  return split;
}

// ---- synthetic data ---------------------------------------------------------

SignedGraph generate_balanced_graph(const BalancedGraphParams& p) {
  for (double prob : {p.p_intra, p.p_inter, p.flip_noise})
    if (!(prob >= 0.0 && prob <= 1.0)) throw ConfigError("probabilities must lie in [0, 1]");
  if (p.blocks == 0 || p.nodes_per_block == 0) throw ConfigError("generator needs at least one block and node");
  const std::size_t n = p.nodes_per_block * p.blocks;
  Rng rng(mix_seed(p.seed, 0xb10c));
  std::vector<SignedEdge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      const bool same = (u / p.nodes_per_block) == (v / p.nodes_per_block);
      const bool keep = rng.bernoulli(same ? p.p_intra : p.p_inter);
      const bool flip = rng.bernoulli(p.flip_noise);
      if (!keep) continue;
      const bool positive = same != flip;
      edges.push_back({u, v, positive ? Sign::Positive : Sign::Negative});
    }
  }
  return SignedGraph(n, std::move(edges), /*undirected=*/true);
}

}  // namespace sesg
