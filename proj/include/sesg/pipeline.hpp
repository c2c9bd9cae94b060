#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sesg/config.hpp"
#include "sesg/explain.hpp"
#include "sesg/graph.hpp"

namespace sesg {

enum class Stage { Ingest, Split, Walks, Srwr, Train, Explain, Eval };

const char* to_string(Stage s) noexcept;
Stage parse_stage(const std::string& name);
/// Comma-separated stage names; "all" selects every stage.
std::set<Stage> parse_stages(const std::string& list);
std::set<Stage> all_stages();

/// Raised when a stage fails; wraps the original message.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& what)
      : Error(std::string("stage '") + to_string(stage) + "' failed: " + what), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

struct ClassStats {
  std::size_t count = 0;
  std::size_t correct = 0;
  double recall() const { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

struct EvalReport {
  double accuracy = 0.0;
  double precision_at_k = 0.0;
  std::size_t k = 0;
  std::size_t test_edges = 0;
  ClassStats positive;
  ClassStats negative;
  std::size_t degenerate = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::optional<double> wall_time_s;

  std::string to_json() const;
  std::string to_text() const;
};

using SignDecoder = std::function<int(const SignedEdge&)>;

/// Accuracy and per-class counts of `decoder` over the test edges. Throws
/// ConstraintError on an empty test set.
EvalReport evaluate(std::span<const SignedEdge> test, const SignDecoder& decoder);

/// Accuracy from precomputed predictions (same order as `test`) plus
/// precision@K of the selected neighbours against `truth` over the distinct
/// source nodes of the test edges.
EvalReport evaluate(std::span<const SignedEdge> test, std::span<const ExplainedPrediction> predictions,
                    std::span<const ExplanationSets> truth, std::size_t k);

/// Sign held by the majority of the edges; +1 on ties.
int majority_sign(std::span<const SignedEdge> edges);

struct PipelineArtifacts {
  static constexpr const char* kSplitDir = "split";
  static constexpr const char* kWalks = "walks.bin";
  static constexpr const char* kDiffusion = "diffusion.tsv";
  static constexpr const char* kCheckpoint = "model.ckpt";
  static constexpr const char* kLossTrace = "loss.csv";
  static constexpr const char* kExplanations = "explanations.jsonl";
  static constexpr const char* kReport = "report.json";
  static constexpr const char* kReportText = "report.txt";
  static constexpr const char* kConfig = "config.txt";
};

struct PipelineResult {
  std::vector<Stage> persisted;
  std::optional<EvalReport> report;
  std::vector<double> loss_trace;
};

using LogFn = std::function<void(const std::string&)>;

/// Runs the pipeline into `out_dir`. Stages outside `stages` still run in
/// memory when a selected stage needs their output, but only selected stages
/// write artifacts. A checkpoint or diffusion file already in `out_dir` with
/// the same config hash is reused instead of recomputed. Walks are cached
/// under $SESG_CACHE_DIR when it is set.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::set<Stage>& stages,
                            const std::filesystem::path& out_dir, const LogFn& log = {});

/// Trains (or reuses the checkpoint in `out_dir`) and decodes arbitrary node
/// pairs against the training graph. Pair signs are ignored.
std::vector<ExplainedPrediction> predict_pairs(const PipelineConfig& cfg, const std::filesystem::path& out_dir,
                                               std::span<const SignedEdge> pairs, const LogFn& log = {});

}  // namespace sesg
