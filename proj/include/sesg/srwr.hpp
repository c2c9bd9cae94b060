#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sesg/common.hpp"
#include "sesg/graph.hpp"

namespace sesg {

struct SrwrConfig {
  double restart = 0.15;  // c
  double beta = 0.5;
  double gamma = 0.5;
  double tol = 1e-9;
  std::size_t max_iters = 1000;
  double threshold_p = 1e-4;
  double threshold_n = -1e-4;

  void validate() const;
  std::uint64_t hash() const;
};

/// D^-1 A split into its nonnegative parts, stored row-major by source node.
/// D is the out-degree |A| row sum; dangling rows stay empty.
struct SemiRowNormalized {
  struct Entry {
    NodeId dst;
    double weight;
  };
  std::size_t num_nodes = 0;
  std::vector<std::vector<Entry>> plus;
  std::vector<std::vector<Entry>> minus;
  std::vector<bool> dangling;
};

SemiRowNormalized semi_row_normalize(const SignedGraph& g);

struct SrwrResult {
  Vector<double> r_plus;
  Vector<double> r_minus;
  std::vector<double> residuals;  // L1 change after each iteration
};

class SrwrNotConverged : public NumericError {
 public:
  SrwrNotConverged(NodeId seed, double residual)
      : NumericError("SRWR from node " + std::to_string(seed) + " did not converge (residual " +
                     std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Power iteration from r+ = q, r- = 0:
///   r+ <- (1-c)(A+' r+ + beta A-' r- + (1-gamma) A+' r-) + c q
///   r- <- (1-c)(A-' r+ + gamma A+' r- + (1-beta) A-' r-)
/// Mass that would leave through dangling nodes is returned to the seed.
/// Stops once the combined L1 change drops below tol.
SrwrResult srwr_rank(const SemiRowNormalized& norm, NodeId seed, const SrwrConfig& cfg);

/// Symmetric {-1, 0, +1} matrix with its r_d scores, stored sparsely by row.
class DiffusionMatrix {
 public:
  struct Entry {
    NodeId node;
    int sign;
    double score;
  };

  DiffusionMatrix() = default;
  explicit DiffusionMatrix(std::size_t num_nodes) : rows_(num_nodes) {}

  std::size_t num_nodes() const noexcept { return rows_.size(); }
  std::span<const Entry> row(NodeId i) const { return rows_.at(i); }
  int sign(NodeId i, NodeId j) const;
  std::vector<NodeId> negatives(NodeId i) const;
  std::vector<NodeId> positives(NodeId i) const;
  std::size_t count(int sign) const;

  /// Adds (i, j) and (j, i). Rows must be filled in ascending column order.
  void set(NodeId i, NodeId j, int sign, double score);
  void finalize();

  friend bool operator==(const DiffusionMatrix& a, const DiffusionMatrix& b);

 private:
  std::vector<std::vector<Entry>> rows_;
};

/// Runs SRWR from every seed, max-symmetrises r+ and r- separately, sets
/// r_d = r_pmax - r_nmax and thresholds it at p and n. The diagonal is zero.
DiffusionMatrix build_diffusion_matrix(const SignedGraph& g, const SrwrConfig& cfg, unsigned threads = 1);

/// Text triplets "i j sign score" (i < j) under a "# config_hash=<hex>" header.
void save_diffusion_matrix(const DiffusionMatrix& s, const std::filesystem::path& path, std::uint64_t config_hash);
DiffusionMatrix load_diffusion_matrix(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

}  // namespace sesg
