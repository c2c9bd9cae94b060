#include "sesg/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "sesg/encodings.hpp"
#include "sesg/srwr.hpp"
#include "sesg/training.hpp"

namespace sesg {

namespace fs = std::filesystem;

namespace {

constexpr std::pair<Stage, const char*> kStageNames[] = {
    {Stage::Ingest, "ingest"}, {Stage::Split, "split"},     {Stage::Walks, "walks"}, {Stage::Srwr, "srwr"},
    {Stage::Train, "train"},   {Stage::Explain, "explain"}, {Stage::Eval, "eval"},
};

}  // namespace

const char* to_string(Stage s) noexcept {
  for (const auto& [stage, name] : kStageNames)
    if (stage == s) return name;
  return "?";
}

Stage parse_stage(const std::string& name) {
  for (const auto& [stage, n] : kStageNames)
    if (name == n) return stage;
  throw ConfigError("unknown stage '" + name + "'");
}

std::set<Stage> all_stages() {
  std::set<Stage> out;
  for (const auto& [stage, name] : kStageNames) out.insert(stage);
  return out;
}

std::set<Stage> parse_stages(const std::string& list) {
  std::set<Stage> out;
  std::istringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    if (item == "all") return all_stages();
    out.insert(parse_stage(item));
  }
  if (out.empty()) throw ConfigError("no stages selected");
  return out;
}

// ---- evaluation ------------------------------------------------------------------

int majority_sign(std::span<const SignedEdge> edges) {
  std::size_t pos = 0;
  for (const auto& e : edges) pos += e.sign == Sign::Positive;
  return 2 * pos >= edges.size() ? 1 : -1;
}

EvalReport evaluate(std::span<const SignedEdge> test, const SignDecoder& decoder) {
  if (test.empty()) throw ConstraintError("empty test set");
  EvalReport r;
  r.test_edges = test.size();
  for (const auto& e : test) {
    auto& cls = e.sign == Sign::Positive ? r.positive : r.negative;
    ++cls.count;
    if (decoder(e) == to_int(e.sign)) ++cls.correct;
  }
  r.accuracy = static_cast<double>(r.positive.correct + r.negative.correct) / static_cast<double>(test.size());
  return r;
}

EvalReport evaluate(std::span<const SignedEdge> test, std::span<const ExplainedPrediction> predictions,
                    std::span<const ExplanationSets> truth, std::size_t k) {
  if (predictions.size() != test.size()) throw ConstraintError("one prediction per test edge is required");
  std::size_t idx = 0;
  auto r = evaluate(test, [&](const SignedEdge&) { return predictions[idx++].predicted_sign; });
  r.k = k;
  std::vector<ExplanationSets> selected(truth.size());
  std::vector<NodeId> nodes;
  std::unordered_set<NodeId> seen;
  for (const auto& p : predictions) {
    r.degenerate += p.degenerate;
    if (seen.insert(p.i).second) {
      nodes.push_back(p.i);
      selected[p.i] = context_sets(p.context);
    }
  }
  r.precision_at_k = precision_at_k(selected, truth, nodes, k);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["precision_at_k"] = precision_at_k;
  j["k"] = k;
  j["test_edges"] = test_edges;
  auto cls = [](const ClassStats& c) {
    return nlohmann::ordered_json{{"count", c.count}, {"correct", c.correct}, {"recall", c.recall()}};
  };
  j["positive"] = cls(positive);
  j["negative"] = cls(negative);
  j["degenerate_contexts"] = degenerate;
  j["config_hash"] = hex64(config_hash);
  j["seed"] = seed;
  if (wall_time_s) j["wall_time_s"] = *wall_time_s;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_text() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%-14s %10s %10s %12s %12s\n"
                "%-14s %10.4f %10.4f %12.4f %12.4f\n",
                "metric", "accuracy", "prec@K", "recall(+)", "recall(-)", "value", accuracy, precision_at_k,
                positive.recall(), negative.recall());
  std::string out = buf;
  std::snprintf(buf, sizeof(buf), "test edges %zu (+%zu / -%zu), K=%zu, degenerate=%zu, config %s\n", test_edges,
                positive.count, negative.count, k, degenerate, hex64(config_hash).c_str());
  return out + buf;
}

// ---- pipeline --------------------------------------------------------------------

namespace {

constexpr std::uint64_t kWalkStream = 0x3a1c;
constexpr std::uint64_t kDecoderStream = 0xdec0;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

class Runner {
 public:
  Runner(const PipelineConfig& cfg, const std::set<Stage>& stages, fs::path out, const LogFn& log)
      : cfg_(cfg), stages_(stages), out_(std::move(out)), log_(log), hash_(cfg.hash()) {}

  PipelineResult run() {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_);
    save_config(cfg_, out_ / PipelineArtifacts::kConfig);
    for (Stage s : stages_) {
      switch (s) {
        case Stage::Ingest: guarded(s, [&] { graph(); }); break;
        case Stage::Split: guarded(s, [&] { split(); }); break;
        case Stage::Walks: guarded(s, [&] { walks(); }); break;
        case Stage::Srwr: guarded(s, [&] { diffusion(); }); break;
        case Stage::Train: guarded(s, [&] { model(); }); break;
        case Stage::Explain: guarded(s, [&] { predictions(); }); break;
        case Stage::Eval:
          guarded(s, [&] {
            report(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
          });
          break;
      }
    }
    return std::move(result_);
  }

  std::vector<ExplainedPrediction> predict(std::span<const SignedEdge> pairs) {
    fs::create_directories(out_);
    return decode(pairs);
  }

 private:
  template <typename F>
  void guarded(Stage s, F&& body) {
    current_ = s;
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(current_, e.what());
    }
  }

  // Each getter computes its product once, under the stage it belongs to.
  template <typename F>
  auto within(Stage s, F&& body) {
    const Stage outer = current_;
    current_ = s;
    auto restore = [&] { current_ = outer; };
    try {
      auto value = body();
      restore();
      return value;
    } catch (const StageError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(s, e.what());
    }
  }

  bool selected(Stage s) const { return stages_.count(s) > 0; }
  void note(const std::string& msg) const {
    if (log_) log_(msg);
  }
  void persisted(Stage s) { result_.persisted.push_back(s); }

  const SignedGraph& graph() {
    if (!graph_) {
      graph_ = within(Stage::Ingest, [&] {
        if (cfg_.dataset.empty()) throw IoError("no dataset configured");
        LoadReport rep;
        auto g = load_edge_list(cfg_.dataset, {cfg_.undirected, cfg_.compact_ids}, &rep);
        note("ingest: " + std::to_string(g.num_nodes()) + " nodes, " + std::to_string(g.num_edges()) + " edges");
        return std::optional<SignedGraph>(std::move(g));
      });
    }
    return *graph_;
  }

  const EdgeSplit& split() {
    if (!split_) {
      const auto& g = graph();
      split_ = within(Stage::Split, [&] {
        auto sp = split_edges(g, cfg_.ratio, cfg_.seed);
        if (selected(Stage::Split)) {
          save_split(sp, out_ / PipelineArtifacts::kSplitDir);
          persisted(Stage::Split);
        }
        return std::optional<EdgeSplit>(std::move(sp));
      });
      train_graph_ = training_graph(g, *split_);
    }
    return *split_;
  }

  const SignedGraph& train_graph() {
    split();
    return *train_graph_;
  }

  const WalkSet& walks() {
    if (!walks_) {
      const auto& g = train_graph();
      walks_ = within(Stage::Walks, [&] {
        const auto& m = cfg_.train.model;
        const auto seed = mix_seed(cfg_.seed, kWalkStream);
        std::optional<fs::path> cached;
        if (const char* dir = std::getenv("SESG_CACHE_DIR"); dir && *dir) {
          Fnv1a key;
          for (std::uint64_t v : {split_->checksum(), std::uint64_t(m.num_walks),
                                  std::uint64_t(cfg_.train.walk_length), seed})
            key.update(&v, sizeof(v));
          cached = fs::path(dir) / ("walks-" + hex64(key.digest()) + ".bin");
        }
        WalkSet ws;
        if (cached && fs::exists(*cached)) {
          ws = load_walk_set(*cached);
          note("walks: loaded from cache " + cached->string());
        } else {
          ws = sample_signed_walks(g, m.num_walks, cfg_.train.walk_length, seed, cfg_.threads);
          if (cached) {
            fs::create_directories(cached->parent_path());
            save_walk_set(ws, *cached);
          }
        }
        if (selected(Stage::Walks)) {
          save_walk_set(ws, out_ / PipelineArtifacts::kWalks);
          persisted(Stage::Walks);
        }
        return std::optional<WalkSet>(std::move(ws));
      });
    }
    return *walks_;
  }

  const DiffusionMatrix* diffusion() {
    if (!cfg_.use_diffusion && !selected(Stage::Srwr)) return nullptr;
    if (!diffusion_) {
      const auto& g = train_graph();
      diffusion_ = within(Stage::Srwr, [&] {
        const auto path = out_ / PipelineArtifacts::kDiffusion;
        std::uint64_t stored = 0;
        if (!selected(Stage::Srwr) && fs::exists(path)) {
          auto s = load_diffusion_matrix(path, &stored);
          if (stored == hash_) {
            note("srwr: reusing " + path.string());
            return std::optional<DiffusionMatrix>(std::move(s));
          }
        }
        auto s = build_diffusion_matrix(g, cfg_.srwr, cfg_.threads);
        note("srwr: " + std::to_string(s.count(1) / 2) + " positive, " + std::to_string(s.count(-1) / 2) +
             " negative inferred pairs");
        if (selected(Stage::Srwr)) {
          save_diffusion_matrix(s, path, hash_);
          persisted(Stage::Srwr);
        }
        return std::optional<DiffusionMatrix>(std::move(s));
      });
    }
    return cfg_.use_diffusion ? &*diffusion_ : nullptr;
  }

  const Matrix<double>& model() {
    if (!embeddings_) {
      const auto& g = train_graph();
      const auto& ws = walks();
      embeddings_ = within(Stage::Train, [&] {
        const auto path = out_ / PipelineArtifacts::kCheckpoint;
        const auto inputs = prepare_inputs(g, cfg_.train.model, ws, cfg_.train.max_path_length);
        if (!selected(Stage::Train) && fs::exists(path)) {
          auto ckpt = load_checkpoint(path);
          if (ckpt.config_hash == hash_) {
            note("train: reusing " + path.string());
            return std::optional<Matrix<double>>(encode(ckpt.params, inputs, cfg_.train.model).z);
          }
        }
        auto res = train(g, *split_, cfg_.train, cfg_.seed, &ws, [&](std::size_t epoch, double loss) {
          if (epoch % 10 == 0) note("train: epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
        });
        result_.loss_trace = res.loss_trace;
        if (selected(Stage::Train)) {
          save_checkpoint(path, {cfg_.train.model, hash_, res.params});
          std::string csv = "epoch,loss\n";
          char line[64];
          for (std::size_t e = 0; e < res.loss_trace.size(); ++e) {
            std::snprintf(line, sizeof(line), "%zu,%.17g\n", e, res.loss_trace[e]);
            csv += line;
          }
          write_text(out_ / PipelineArtifacts::kLossTrace, csv);
          persisted(Stage::Train);
        }
        return std::optional<Matrix<double>>(std::move(res.embeddings));
      });
    }
    return *embeddings_;
  }

  const std::vector<ExplainedPrediction>& predictions() {
    if (!predictions_) {
      const auto& sp = split();
      const auto& g = train_graph();
      const auto& z = model();
      const auto* s = diffusion();
      predictions_ = within(Stage::Explain, [&] {
        if (sp.test.empty()) throw ConstraintError("empty test set");
        auto preds = explain_edges(sp.test, z, g, s, cfg_.decoder, mix_seed(cfg_.seed, kDecoderStream),
                                   majority_sign(sp.train), cfg_.threads);
        if (selected(Stage::Explain)) {
          std::ofstream out(out_ / PipelineArtifacts::kExplanations, std::ios::binary);
          if (!out) throw IoError("cannot write explanations");
          write_explanations(out, preds, graph_->original_ids());
          persisted(Stage::Explain);
        }
        return std::optional<std::vector<ExplainedPrediction>>(std::move(preds));
      });
    }
    return *predictions_;
  }

  std::vector<ExplainedPrediction> decode(std::span<const SignedEdge> pairs) {
    const auto& sp = split();
    const auto& g = train_graph();
    const auto& z = model();
    const auto* s = diffusion();
    return within(Stage::Explain, [&] {
      for (const auto& e : pairs)
        if (e.src >= g.num_nodes() || e.dst >= g.num_nodes()) throw ConstraintError("query node out of range");
      return explain_edges(pairs, z, g, s, cfg_.decoder, mix_seed(cfg_.seed, kDecoderStream), majority_sign(sp.train),
                           cfg_.threads);
    });
  }

  void report(double elapsed) {
    const auto& preds = predictions();
    const auto& g = train_graph();
    within(Stage::Eval, [&] {
      const auto truth = generate_ground_truth_explanations(spectral_init(g, cfg_.train.model.dim), cfg_.decoder.k);
      auto rep = evaluate(split_->test, preds, truth, cfg_.decoder.k);
      rep.config_hash = hash_;
      rep.seed = cfg_.seed;
      if (cfg_.include_wall_time) rep.wall_time_s = elapsed;
      write_text(out_ / PipelineArtifacts::kReport, rep.to_json());
      if (cfg_.text_report) write_text(out_ / PipelineArtifacts::kReportText, rep.to_text());
      persisted(Stage::Eval);
      result_.report = rep;
      return 0;
    });
  }

  const PipelineConfig& cfg_;
  const std::set<Stage>& stages_;
  fs::path out_;
  const LogFn& log_;
  std::uint64_t hash_;
  Stage current_ = Stage::Ingest;

  std::optional<SignedGraph> graph_;
  std::optional<EdgeSplit> split_;
  std::optional<SignedGraph> train_graph_;
  std::optional<WalkSet> walks_;
  std::optional<DiffusionMatrix> diffusion_;
  std::optional<Matrix<double>> embeddings_;
  std::optional<std::vector<ExplainedPrediction>> predictions_;
  PipelineResult result_;
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::set<Stage>& stages, const fs::path& out_dir,
                            const LogFn& log) {
  cfg.validate();
  return Runner(cfg, stages, out_dir, log).run();
}

std::vector<ExplainedPrediction> predict_pairs(const PipelineConfig& cfg, const fs::path& out_dir,
                                               std::span<const SignedEdge> pairs, const LogFn& log) {
  cfg.validate();
  const std::set<Stage> none;
  return Runner(cfg, none, out_dir, log).predict(pairs);
}

}  // namespace sesg
