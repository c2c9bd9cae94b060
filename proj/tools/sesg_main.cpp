#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sesg/config.hpp"
#include "sesg/expressivity.hpp"
#include "sesg/graph.hpp"
#include "sesg/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct CommonOptions {
  std::string config;
  std::string out = "out";
  std::string dataset;
  std::vector<std::string> overrides;
  unsigned threads = 0;
  long long walks = -1;
  long long walk_len = -1;
  long long seed = -1;
  bool text_report = false;
  bool wall_time = false;
  bool quiet = false;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("-c,--config", o.config, "Config file (key = value lines)");
  app->add_option("-o,--out", o.out, "Output directory for artifacts");
  app->add_option("--dataset", o.dataset, "Edge list path (overrides the config)");
  app->add_option("--set", o.overrides, "Override a config key, e.g. --set d=64")->take_all();
  app->add_option("--threads", o.threads, "Worker threads for walks, SRWR and decoding");
  app->add_option("--walks", o.walks, "Walks per node (r)");
  app->add_option("--walk-len", o.walk_len, "Steps per walk (l)");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_flag("--text-report", o.text_report, "Also write report.txt");
  app->add_flag("--wall-time", o.wall_time, "Record wall time in the report");
  app->add_flag("-q,--quiet", o.quiet, "Suppress progress output");
}

sesg::PipelineConfig resolve(const CommonOptions& o) {
  auto cfg = o.config.empty() ? sesg::PipelineConfig{} : sesg::load_config(o.config);
  if (!o.dataset.empty()) cfg.dataset = o.dataset;
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sesg::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.threads) cfg.threads = o.threads;
  if (o.walks >= 0) cfg.set("r", std::to_string(o.walks));
  if (o.walk_len >= 0) cfg.set("l", std::to_string(o.walk_len));
  if (o.seed >= 0) cfg.set("seed", std::to_string(o.seed));
  if (o.text_report) cfg.text_report = true;
  if (o.wall_time) cfg.include_wall_time = true;
  cfg.validate();
  sesg::set_default_threads(cfg.threads);
  return cfg;
}

sesg::LogFn logger(const CommonOptions& o) {
  if (o.quiet) return {};
  return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

int run_stages(const CommonOptions& o, const std::set<sesg::Stage>& stages) {
  const auto cfg = resolve(o);
  const auto res = sesg::run_pipeline(cfg, stages, o.out, logger(o));
  if (res.report) std::cout << res.report->to_json();
  return 0;
}

std::vector<sesg::SignedEdge> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sesg::IoError("cannot open pairs file '" + path + "'");
  std::vector<sesg::SignedEdge> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    long long i = -1, j = -1;
    if (!(ls >> i >> j) || i < 0 || j < 0) throw sesg::ParseError("expected two node ids", lineno);
    pairs.push_back({static_cast<sesg::NodeId>(i), static_cast<sesg::NodeId>(j), sesg::Sign::Positive});
  }
  return pairs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-explainable signed graph transformer: training, link sign prediction and explanations"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* train = app.add_subcommand("train", "Ingest, split, sample walks and train; writes model.ckpt");
  add_common(train, common);

  auto* predict = app.add_subcommand("predict", "Predict signs for node pairs listed one per line");
  add_common(predict, common);
  std::string pairs_file, predict_out;
  predict->add_option("--pairs", pairs_file, "File of 'i j' lines")->required();
  predict->add_option("--output", predict_out, "JSON-lines destination (default stdout)");

  auto* explain = app.add_subcommand("explain", "Decode the test edges; writes explanations.jsonl");
  add_common(explain, common);

  auto* eval = app.add_subcommand("eval", "Evaluate accuracy and precision@K; writes report.json");
  add_common(eval, common);

  auto* srwr = app.add_subcommand("srwr", "Build the SRWR diffusion matrix; writes diffusion.tsv");
  add_common(srwr, common);
  std::optional<double> c, beta, gamma, tol, p, n;
  std::optional<std::size_t> max_iters;
  srwr->add_option("--restart", c, "Restart probability c");
  srwr->add_option("--beta", beta, "Balance attenuation beta");
  srwr->add_option("--gamma", gamma, "Balance attenuation gamma");
  srwr->add_option("--tol", tol, "L1 convergence tolerance");
  srwr->add_option("--max-iters", max_iters, "Iteration cap");
  srwr->add_option("--threshold-p", p, "Positive threshold p");
  srwr->add_option("--threshold-n", n, "Negative threshold n");

  auto* run = app.add_subcommand("run", "Run selected pipeline stages");
  add_common(run, common);
  std::string stage_list = "all";
  run->add_option("--stages", stage_list, "Comma-separated: ingest,split,walks,srwr,train,explain,eval or all");

  auto* expr = app.add_subcommand("expressivity-check", "Compare encodings on a pair of signed graphs");
  std::vector<std::string> pair;
  std::size_t steps = 6;
  bool expr_undirected = true;
  expr->add_option("--pair", pair, "Two edge-list files")->expected(2)->required();
  expr->add_option("--steps", steps, "Walk enumeration depth");
  expr->add_option("--undirected", expr_undirected, "Treat the edge lists as undirected (default true)");

  auto* gen = app.add_subcommand("gen-synthetic", "Write a balanced block-structured signed graph");
  sesg::BalancedGraphParams gp;
  std::string gen_out;
  gen->add_option("--nodes-per-block", gp.nodes_per_block);
  gen->add_option("--blocks", gp.blocks);
  gen->add_option("--p-intra", gp.p_intra);
  gen->add_option("--p-inter", gp.p_inter);
  gen->add_option("--noise", gp.flip_noise, "Probability of flipping each edge sign");
  gen->add_option("--seed", gp.seed);
  gen->add_option("-o,--output", gen_out, "Edge list destination")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return run_stages(common, {sesg::Stage::Ingest, sesg::Stage::Split, sesg::Stage::Walks, sesg::Stage::Train});
    if (*explain) return run_stages(common, {sesg::Stage::Explain});
    if (*eval) return run_stages(common, {sesg::Stage::Explain, sesg::Stage::Eval});
    if (*run) return run_stages(common, sesg::parse_stages(stage_list));
    if (*srwr) {
      auto push = [&](const char* key, const std::optional<double>& v) {
        if (v) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%s=%.17g", key, *v);
          common.overrides.emplace_back(buf);
        }
      };
      push("srwr_c", c);
      push("srwr_beta", beta);
      push("srwr_gamma", gamma);
      push("srwr_tol", tol);
      push("srwr_p", p);
      push("srwr_n", n);
      if (max_iters) common.overrides.push_back("srwr_max_iters=" + std::to_string(*max_iters));
      return run_stages(common, {sesg::Stage::Srwr});
    }
    if (*predict) {
      const auto cfg = resolve(common);
      const auto preds = sesg::predict_pairs(cfg, common.out, read_pairs(pairs_file), logger(common));
      if (predict_out.empty()) {
        sesg::write_explanations(std::cout, preds);
      } else {
        std::ofstream out(predict_out);
        if (!out) throw sesg::IoError("cannot write '" + predict_out + "'");
        sesg::write_explanations(out, preds);
      }
      return 0;
    }
    if (*expr) {
      const sesg::LoadOptions opts{expr_undirected, false};
      const auto a = sesg::load_edge_list(pair[0], opts);
      const auto b = sesg::load_edge_list(pair[1], opts);
      std::cout << sesg::compare_encodings(a, b, steps).to_json() << '\n';
      return 0;
    }
    if (*gen) {
      sesg::save_edge_list(sesg::generate_balanced_graph(gp), gen_out);
      return 0;
    }
  } catch (const sesg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}
