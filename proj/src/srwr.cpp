#include "sesg/srwr.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sesg {

void SrwrConfig::validate() const {
  if (!(restart > 0 && restart < 1)) throw ConfigError("restart probability must lie in (0, 1)");
  if (!(beta >= 0 && beta <= 1) || !(gamma >= 0 && gamma <= 1)) throw ConfigError("beta and gamma must lie in [0, 1]");
  if (!(tol > 0)) throw ConfigError("SRWR tolerance must be positive");
  if (max_iters == 0) throw ConfigError("SRWR needs at least one iteration");
  if (!(threshold_n < 0 && threshold_p > 0)) throw ConfigError("thresholds must satisfy n < 0 < p");
}

std::uint64_t SrwrConfig::hash() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "c=%.17g;beta=%.17g;gamma=%.17g;tol=%.17g;max_iters=%zu;p=%.17g;n=%.17g", restart,
                beta, gamma, tol, max_iters, threshold_p, threshold_n);
  return fnv1a(buf);
}

SemiRowNormalized semi_row_normalize(const SignedGraph& g) {
  SemiRowNormalized s;
  s.num_nodes = g.num_nodes();
  s.plus.resize(s.num_nodes);
  s.minus.resize(s.num_nodes);
  s.dangling.assign(s.num_nodes, false);
  for (NodeId u = 0; u < s.num_nodes; ++u) {
    const auto out = g.out_neighbors(u);
    if (out.empty()) {
      s.dangling[u] = true;
      continue;
    }
    const double w = 1.0 / static_cast<double>(out.size());
    for (const auto& nb : out) (nb.sign == Sign::Positive ? s.plus : s.minus)[u].push_back({nb.node, w});
  }
  return s;
}

SrwrResult srwr_rank(const SemiRowNormalized& norm, NodeId seed, const SrwrConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(norm.num_nodes);
  if (seed >= norm.num_nodes) throw ConstraintError("SRWR seed out of range");
  const double c = cfg.restart;
  const double keep = 1.0 - c;

  SrwrResult res;
  res.r_plus = Vector<double>::Zero(n);
  res.r_minus = Vector<double>::Zero(n);
  res.r_plus(seed) = 1.0;
  Vector<double> next_p(n), next_m(n);
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    next_p.setZero();
    next_m.setZero();
    double lost = 0.0;
    for (NodeId u = 0; u < norm.num_nodes; ++u) {
      const double rp = res.r_plus(u);
      const double rm = res.r_minus(u);
      if (rp == 0.0 && rm == 0.0) continue;
      if (norm.dangling[u]) {
        lost += rp + rm;
        continue;
      }
      for (const auto& e : norm.plus[u]) {
        next_p(e.dst) += e.weight * (rp + (1.0 - cfg.gamma) * rm);
        next_m(e.dst) += e.weight * cfg.gamma * rm;
      }
      for (const auto& e : norm.minus[u]) {
        next_p(e.dst) += e.weight * cfg.beta * rm;
        next_m(e.dst) += e.weight * (rp + (1.0 - cfg.beta) * rm);
      }
    }
    next_p *= keep;
    next_m *= keep;
    next_p(seed) += c + keep * lost;
    const double residual = (next_p - res.r_plus).lpNorm<1>() + (next_m - res.r_minus).lpNorm<1>();
    res.r_plus.swap(next_p);
    res.r_minus.swap(next_m);
    res.residuals.push_back(residual);
    if (residual < cfg.tol) return res;
  }
  throw SrwrNotConverged(seed, res.residuals.back());
}

// ---- diffusion matrix ----------------------------------------------------------

int DiffusionMatrix::sign(NodeId i, NodeId j) const {
  const auto& r = rows_.at(i);
  auto it = std::lower_bound(r.begin(), r.end(), j, [](const Entry& e, NodeId id) { return e.node < id; });
  return it != r.end() && it->node == j ? it->sign : 0;
}

std::vector<NodeId> DiffusionMatrix::negatives(NodeId i) const {
  std::vector<NodeId> out;
  for (const auto& e : rows_.at(i))
    if (e.sign < 0) out.push_back(e.node);
  return out;
}

std::vector<NodeId> DiffusionMatrix::positives(NodeId i) const {
  std::vector<NodeId> out;
  for (const auto& e : rows_.at(i))
    if (e.sign > 0) out.push_back(e.node);
  return out;
}

std::size_t DiffusionMatrix::count(int sign) const {
  std::size_t total = 0;
  for (const auto& r : rows_)
    total += static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [sign](const Entry& e) { return e.sign == sign; }));
  return total;
}

void DiffusionMatrix::set(NodeId i, NodeId j, int sign, double score) {
  if (i == j || i >= rows_.size() || j >= rows_.size()) throw ConstraintError("invalid diffusion entry");
  if (sign != 1 && sign != -1) throw ConstraintError("diffusion sign must be +1 or -1");
  rows_[i].push_back({j, sign, score});
  rows_[j].push_back({i, sign, score});
}

void DiffusionMatrix::finalize() {
  for (auto& r : rows_) std::sort(r.begin(), r.end(), [](const Entry& a, const Entry& b) { return a.node < b.node; });
}

bool operator==(const DiffusionMatrix& a, const DiffusionMatrix& b) {
  if (a.rows_.size() != b.rows_.size()) return false;
  for (std::size_t i = 0; i < a.rows_.size(); ++i) {
    const auto& x = a.rows_[i];
    const auto& y = b.rows_[i];
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (x[k].node != y[k].node || x[k].sign != y[k].sign || x[k].score != y[k].score) return false;
  }
  return true;
}

DiffusionMatrix build_diffusion_matrix(const SignedGraph& g, const SrwrConfig& cfg, unsigned threads) {
  cfg.validate();
  const auto norm = semi_row_normalize(g);
  const std::size_t n = g.num_nodes();
  std::vector<SrwrResult> ranks(n);
  parallel_for(n, threads, [&](std::size_t u) { ranks[u] = srwr_rank(norm, static_cast<NodeId>(u), cfg); });

  DiffusionMatrix s(n);
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      const double pmax = std::max(ranks[u].r_plus(v), ranks[v].r_plus(u));
      const double nmax = std::max(ranks[u].r_minus(v), ranks[v].r_minus(u));
      const double rd = pmax - nmax;
      if (rd >= cfg.threshold_p)
        s.set(u, v, 1, rd);
      else if (rd <= cfg.threshold_n)
        s.set(u, v, -1, rd);
    }
  }
  s.finalize();
  return s;
}

void save_diffusion_matrix(const DiffusionMatrix& s, const std::filesystem::path& path, std::uint64_t config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write diffusion matrix '" + path.string() + "'");
  out << "# nodes=" << s.num_nodes() << " config_hash=" << hex64(config_hash) << '\n';
  char buf[96];
  for (NodeId i = 0; i < s.num_nodes(); ++i)
    for (const auto& e : s.row(i)) {
      if (e.node <= i) continue;
      std::snprintf(buf, sizeof(buf), "%u\t%u\t%d\t%.17g\n", i, e.node, e.sign, e.score);
      out << buf;
    }
  if (!out) throw IoError("failed writing diffusion matrix '" + path.string() + "'");
}

DiffusionMatrix load_diffusion_matrix(const std::filesystem::path& path, std::uint64_t* config_hash) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open diffusion matrix '" + path.string() + "'");
  std::string header;
  std::getline(in, header);
  std::size_t nodes = 0;
  char hash[32] = {0};
  if (std::sscanf(header.c_str(), "# nodes=%zu config_hash=%31s", &nodes, hash) != 2)
    throw ParseError("malformed diffusion matrix header", 1);
  if (config_hash) *config_hash = std::stoull(hash, nullptr, 16);
  DiffusionMatrix s(nodes);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    NodeId i, j;
    int sign;
    double score;
    if (!(ls >> i >> j >> sign >> score)) throw ParseError("malformed diffusion entry", lineno);
    s.set(i, j, sign, score);
  }
  s.finalize();
  return s;
}

}  // namespace sesg
