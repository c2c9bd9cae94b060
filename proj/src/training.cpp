#include "sesg/training.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace sesg {

TrainBatch sample_batch(const EdgeSplit& split, const SignedGraph& g, const LossConfig& cfg, std::uint64_t seed) {
  if (cfg.no_link_ratio < 0) throw ConfigError("no-link ratio must be non-negative");
  TrainBatch batch;
  batch.pairs.reserve(split.train.size());
  for (const auto& e : split.train)
    batch.pairs.push_back({e.src, e.dst, e.sign == Sign::Positive ? PairLabel::Positive : PairLabel::Negative});
  if (cfg.no_link_ratio == 0 || g.num_nodes() < 2) return batch;

  Rng rng(mix_seed(seed, 0x9a17));
  const std::size_t n = g.num_nodes();
  const std::size_t budget = 100 * std::max<std::size_t>(split.train.size(), 1);
  std::size_t attempts = 0;
  auto non_edge = [&](NodeId i) {
    while (attempts < budget) {
      ++attempts;
      const auto k = static_cast<NodeId>(rng.index(n));
      if (k != i && !g.has_edge(i, k) && !g.has_edge(k, i)) return k;
    }
    throw ConstraintError("graph too dense to sample no-link pairs within " + std::to_string(budget) + " attempts");
  };

  const auto wanted = static_cast<std::size_t>(std::llround(cfg.no_link_ratio * static_cast<double>(split.train.size())));
  for (std::size_t s = 0; s < wanted; ++s) {
    const auto i = static_cast<NodeId>(rng.index(n));
    batch.pairs.push_back({i, non_edge(i), PairLabel::NoLink});
  }
  for (const auto& e : split.train) {
    (e.sign == Sign::Positive ? batch.pos_triplets : batch.neg_triplets).push_back({e.src, e.dst, non_edge(e.src)});
  }
  return batch;
}

std::array<double, 3> resolve_class_weights(const TrainBatch& batch, const LossConfig& cfg) {
  if (cfg.class_weights) return *cfg.class_weights;
  std::array<std::size_t, 3> count{};
  for (const auto& p : batch.pairs) ++count[static_cast<std::size_t>(p.label)];
  const auto present = static_cast<double>(std::count_if(count.begin(), count.end(), [](auto c) { return c > 0; }));
  std::array<double, 3> w{1.0, 1.0, 1.0};
  for (std::size_t s = 0; s < 3; ++s)
    if (count[s] > 0) w[s] = static_cast<double>(batch.pairs.size()) / (present * static_cast<double>(count[s]));
  return w;
}

// ---- optimiser state -----------------------------------------------------------

namespace {

constexpr char kAdamMagic[8] = {'S', 'E', 'S', 'G', 'A', 'D', 'A', 'M'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated optimiser state");
  return v;
}

}  // namespace

void write_optimizer_state(std::ostream& out, const OptimizerState<double>& state) {
  out.write(kAdamMagic, sizeof(kAdamMagic));
  const auto& c = state.config;
  for (double v : {c.lr, c.beta1, c.beta2, c.eps, c.decoupled_weight_decay}) put<double>(out, v);
  put<std::uint64_t>(out, state.step);
  write_params(out, state.m);
  write_params(out, state.v);
  if (!out) throw IoError("failed writing optimiser state");
}

void read_optimizer_state(std::istream& in, OptimizerState<double>& state) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kAdamMagic, sizeof(magic)) != 0) throw IoError("not an optimiser state");
  auto& c = state.config;
  for (double* v : {&c.lr, &c.beta1, &c.beta2, &c.eps, &c.decoupled_weight_decay}) *v = get<double>(in);
  state.step = get<std::uint64_t>(in);
  read_params(in, state.m);
  read_params(in, state.v);
}

// ---- training loop -------------------------------------------------------------

TrainResult train(const SignedGraph& g, const EdgeSplit& split, const TrainConfig& cfg, std::uint64_t seed,
                  const WalkSet* walks, const EpochCallback& on_epoch) {
  cfg.model.validate();
  if (g.num_nodes() > cfg.max_nodes && !cfg.allow_large)
    throw ConfigError("graph has " + std::to_string(g.num_nodes()) + " nodes, above the dense attention limit of " +
                      std::to_string(cfg.max_nodes));
  if (split.train.empty()) throw ConstraintError("no training edges");

  WalkSet sampled;
  if (!walks) {
    sampled = sample_signed_walks(g, cfg.model.num_walks, cfg.walk_length, mix_seed(seed, 0x3a1c), default_threads());
    walks = &sampled;
  }

  TrainResult result;
  result.inputs = prepare_inputs(g, cfg.model, *walks, cfg.max_path_length);
  result.params = init_params(cfg.model, seed);
  const TrainBatch batch = sample_batch(split, g, cfg.loss, seed);
  auto state = OptimizerState<double>::init(result.params, cfg.adam);

  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  ModelParams<double> grads;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double loss = loss_and_gradient(result.params, result.inputs, batch, cfg.model, cfg.loss, &grads);
    if (!std::isfinite(loss) || !grads.all_finite())
      throw TrainingDiverged(epoch, result.params, result.loss_trace);
    result.loss_trace.push_back(loss);
    if (on_epoch) on_epoch(epoch, loss);
    if (loss < best - cfg.tolerance * std::abs(best) || !std::isfinite(best)) {
      best = loss;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      result.converged = true;
      break;
    }
    optimizer_step(result.params, grads, state);
  }
  result.embeddings = encode(result.params, result.inputs, cfg.model).z;
  return result;
}

}  // namespace sesg
