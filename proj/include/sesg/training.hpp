#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sesg/common.hpp"
#include "sesg/graph.hpp"
#include "sesg/transformer.hpp"

namespace sesg {

enum class PairLabel : std::uint8_t { Positive = 0, Negative = 1, NoLink = 2 };

struct LabeledPair {
  NodeId i = 0;
  NodeId j = 0;
  PairLabel label = PairLabel::Positive;
};

/// (i, j) carries the triplet's sign, (i, k) is a verified non-edge.
struct Triplet {
  NodeId i = 0;
  NodeId j = 0;
  NodeId k = 0;
};

struct TrainBatch {
  std::vector<LabeledPair> pairs;       // M
  std::vector<Triplet> pos_triplets;    // M(+,?)
  std::vector<Triplet> neg_triplets;    // M(-,?)
};

struct LossConfig {
  /// Per-class weights for (+, -, ?). Empty means inverse class frequency.
  std::optional<std::array<double, 3>> class_weights;
  double lambda = 5.0;
  double weight_decay = 5e-4;
  double no_link_ratio = 1.0;
};

/// Every training edge becomes a labelled pair; no_link_ratio * |train| pairs
/// absent from `g` are added with label '?', and when that ratio is positive
/// each training edge gets one no-link partner k for the triplet terms.
/// Throws ConstraintError when 100 * |train| draws do not yield enough
/// non-edges.
TrainBatch sample_batch(const EdgeSplit& split, const SignedGraph& g, const LossConfig& cfg, std::uint64_t seed);

/// omega_s = |M| / (classes present * count_s); absent classes get 1.
std::array<double, 3> resolve_class_weights(const TrainBatch& batch, const LossConfig& cfg);

template <typename Scalar>
struct LossResult {
  Scalar total = 0;
  Scalar cross_entropy = 0;
  Scalar hinge_pos = 0;
  Scalar hinge_neg = 0;
  Scalar regularizer = 0;
  Matrix<Scalar> dz;          // dL/dz
  Matrix<Scalar> dclassifier; // dL/dtheta_MLG without the regulariser
};

/// Weighted 3-class cross-entropy on softmax([z_i, z_j] theta) averaged over M,
/// plus lambda times the mean positive and mean negative triplet hinges, plus
/// weight_decay / 2 times the squared norm of every parameter.
template <typename Scalar>
LossResult<Scalar> loss_forward(const Matrix<Scalar>& z, const TrainBatch& batch, const ModelParams<Scalar>& params,
                                const LossConfig& cfg) {
  using std::exp;
  using std::log;
  if (batch.pairs.empty()) throw ConstraintError("loss needs at least one labelled pair");
  const auto d = z.cols();
  const Matrix<Scalar>& theta = params.classifier;
  if (theta.rows() != 2 * d || theta.cols() != 3) throw ConstraintError("classifier must be 2d x 3");
  const auto weights = resolve_class_weights(batch, cfg);

  LossResult<Scalar> r;
  r.dz = Matrix<Scalar>::Zero(z.rows(), d);
  r.dclassifier = Matrix<Scalar>::Zero(theta.rows(), 3);
  const Scalar inv_m = Scalar(1) / Scalar(batch.pairs.size());
  Vector<Scalar> feat(2 * d);
  for (const auto& pr : batch.pairs) {
    feat.head(d) = z.row(pr.i).transpose();
    feat.tail(d) = z.row(pr.j).transpose();
    Vector<Scalar> logits = theta.transpose() * feat;
    const Scalar mx = logits.maxCoeff();
    Vector<Scalar> prob = (logits.array() - mx).exp().matrix();
    const Scalar denom = prob.sum();
    prob /= denom;
    const auto s = static_cast<Eigen::Index>(pr.label);
    const Scalar w = Scalar(weights[static_cast<std::size_t>(s)]);
    r.cross_entropy -= w * inv_m * (logits(s) - mx - log(denom));
    Vector<Scalar> dlogits = prob;
    dlogits(s) -= Scalar(1);
    dlogits *= w * inv_m;
    r.dclassifier += feat * dlogits.transpose();
    const Vector<Scalar> dfeat = theta * dlogits;
    r.dz.row(pr.i) += dfeat.head(d).transpose();
    r.dz.row(pr.j) += dfeat.tail(d).transpose();
  }

  auto hinge = [&](const std::vector<Triplet>& set, bool positive, Scalar& term) {
    if (set.empty()) return;
    const Scalar coeff = Scalar(cfg.lambda) / Scalar(set.size());
    for (const auto& t : set) {
      const auto dij = (z.row(t.i) - z.row(t.j)).eval();
      const auto dik = (z.row(t.i) - z.row(t.k)).eval();
      const Scalar gap = positive ? dij.squaredNorm() - dik.squaredNorm() : dik.squaredNorm() - dij.squaredNorm();
      if (!(gap > Scalar(0))) continue;
      term += coeff * gap;
      const Scalar sgn = positive ? Scalar(1) : Scalar(-1);
      r.dz.row(t.i) += sgn * coeff * Scalar(2) * (dij - dik);
      r.dz.row(t.j) -= sgn * coeff * Scalar(2) * dij;
      r.dz.row(t.k) += sgn * coeff * Scalar(2) * dik;
    }
  };
  hinge(batch.pos_triplets, true, r.hinge_pos);
  hinge(batch.neg_triplets, false, r.hinge_neg);

  if (cfg.weight_decay > 0) {
    Scalar sq = 0;
    params.visit([&](const std::string&, const auto& t) { sq += t.squaredNorm(); });
    r.regularizer = Scalar(0.5 * cfg.weight_decay) * sq;
  }
  r.total = r.cross_entropy + r.hinge_pos + r.hinge_neg + r.regularizer;
  return r;
}

/// grads += weight_decay * params.
template <typename Scalar>
void add_weight_decay_gradient(const ModelParams<Scalar>& params, ModelParams<Scalar>& grads, double weight_decay) {
  if (weight_decay <= 0) return;
  std::vector<const Scalar*> src;
  params.visit([&](const std::string&, const auto& t) { src.push_back(t.data()); });
  std::size_t idx = 0;
  grads.visit([&](const std::string&, auto& t) {
    const Scalar* p = src[idx++];
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] += Scalar(weight_decay) * p[k];
  });
}

/// Full objective and its gradient for every parameter.
template <typename Scalar>
Scalar loss_and_gradient(const ModelParams<Scalar>& params, const EncoderInputs<Scalar>& in, const TrainBatch& batch,
                         const ModelConfig& mcfg, const LossConfig& lcfg, ModelParams<Scalar>* grads) {
  const auto tape = encode(params, in, mcfg);
  auto loss = loss_forward(tape.z, batch, params, lcfg);
  if (grads) {
    *grads = backward(params, in, tape, loss.dz, mcfg);
    grads->classifier = loss.dclassifier;
    add_weight_decay_gradient(params, *grads, lcfg.weight_decay);
  }
  return loss.total;
}

// ---- optimiser ---------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decoupled_weight_decay = 0.0;
};

/// One bias-corrected Adam update of a single tensor. `step` is the 1-based
/// step count after increment.
template <typename Derived, typename StateDerived>
void adam_update(Eigen::MatrixBase<Derived>& param, const Eigen::MatrixBase<Derived>& grad,
                 Eigen::MatrixBase<StateDerived>& m, Eigen::MatrixBase<StateDerived>& v, std::uint64_t step,
                 const AdamConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  using std::pow;
  using std::sqrt;
  const Scalar c1 = Scalar(1) - pow(Scalar(cfg.beta1), Scalar(step));
  const Scalar c2 = Scalar(1) - pow(Scalar(cfg.beta2), Scalar(step));
  m = Scalar(cfg.beta1) * m + Scalar(1 - cfg.beta1) * grad;
  v = Scalar(cfg.beta2) * v + Scalar(1 - cfg.beta2) * grad.cwiseAbs2();
  if (cfg.decoupled_weight_decay > 0) param *= Scalar(1) - Scalar(cfg.lr * cfg.decoupled_weight_decay);
  param -= (Scalar(cfg.lr) * (m / c1).array() / ((v / c2).array().sqrt() + Scalar(cfg.eps))).matrix();
}

template <typename Scalar>
struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  ModelParams<Scalar> m;
  ModelParams<Scalar> v;

  static OptimizerState init(const ModelParams<Scalar>& params, const AdamConfig& cfg) {
    return {cfg, 0, params.zeros_like(), params.zeros_like()};
  }
};

/// Adam step over every tensor. Throws NumericError on non-finite gradients
/// before touching any parameter.
template <typename Scalar>
void optimizer_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, OptimizerState<Scalar>& state) {
  if (!grads.all_finite()) throw NumericError("non-finite gradient");
  ++state.step;
  std::vector<Matrix<Scalar>*> pm, gm, mm, vm;
  std::vector<Vector<Scalar>*> pv, gv, mv, vv;
  auto collect = [](auto& mats, auto& vecs) {
    return [&mats, &vecs](const std::string&, auto& t) {
      if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Matrix<Scalar>>)
        mats.push_back(&t);
      else
        vecs.push_back(&t);
    };
  };
  params.visit(collect(pm, pv));
  const_cast<ModelParams<Scalar>&>(grads).visit(collect(gm, gv));
  state.m.visit(collect(mm, mv));
  state.v.visit(collect(vm, vv));
  for (std::size_t k = 0; k < pm.size(); ++k) adam_update(*pm[k], *gm[k], *mm[k], *vm[k], state.step, state.config);
  for (std::size_t k = 0; k < pv.size(); ++k) adam_update(*pv[k], *gv[k], *mv[k], *vv[k], state.step, state.config);
}

void write_optimizer_state(std::ostream& out, const OptimizerState<double>& state);
void read_optimizer_state(std::istream& in, OptimizerState<double>& state);

// ---- training loop -------------------------------------------------------------

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  AdamConfig adam;
  std::size_t walk_length = 20;      // l
  std::size_t max_path_length = 20;  // m
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double tolerance = 1e-4;           // relative improvement counted as progress
  std::size_t max_nodes = 5000;      // dense attention guard
  bool allow_large = false;
};

struct TrainResult {
  ModelParams<double> params;
  EncoderInputs<double> inputs;
  std::vector<double> loss_trace;  // one entry per epoch, loss before the update
  Matrix<double> embeddings;       // z under the final parameters
  bool converged = false;
};

/// Raised when the loss turns non-finite. Carries the last finite parameters.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(std::size_t epoch, ModelParams<double> last_good, std::vector<double> trace)
      : NumericError("training diverged at epoch " + std::to_string(epoch)),
        epoch_(epoch), last_good_(std::move(last_good)), trace_(std::move(trace)) {}
  std::size_t epoch() const noexcept { return epoch_; }
  const ModelParams<double>& last_good() const noexcept { return last_good_; }
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::size_t epoch_;
  ModelParams<double> last_good_;
  std::vector<double> trace_;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Full-batch training: spectral features, centrality, biases, encoder, loss,
/// Adam. Stops after max_epochs or when the best loss has not improved by a
/// relative `tolerance` for `patience` epochs. `g` must be the training graph.
TrainResult train(const SignedGraph& g, const EdgeSplit& split, const TrainConfig& cfg, std::uint64_t seed,
                  const WalkSet* walks = nullptr, const EpochCallback& on_epoch = {});

}  // namespace sesg
