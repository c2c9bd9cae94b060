#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sesg/common.hpp"
#include "sesg/encodings.hpp"

namespace sesg {

enum class Activation : std::uint8_t { Gelu = 0, Relu = 1 };

struct ModelConfig {
  std::size_t dim = 128;        // d
  std::size_t heads = 4;        // a, must divide d
  std::size_t layers = 1;       // L
  std::size_t max_degree = 10;  // D
  std::size_t num_walks = 8;    // r
  Activation activation = Activation::Gelu;
  bool use_centrality = true;
  bool use_adjacency_bias = true;
  bool use_walk_bias = true;
  double ln_eps = 1e-5;

  std::size_t head_dim() const { return dim / heads; }
  void validate() const;
};

template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> wq, wk, wv;  // d x d, head h owns columns [h*dk, (h+1)*dk)
  Matrix<Scalar> wo;          // (a*dv) x d
  Vector<Scalar> ln1_gain, ln1_bias;
  Vector<Scalar> ln2_gain, ln2_bias;
  Matrix<Scalar> w1;  // d x d
  Vector<Scalar> b1;
  Matrix<Scalar> w2;  // d x d
  Vector<Scalar> b2;

  template <typename F>
  void visit(F&& f) {
    f("wq", wq), f("wk", wk), f("wv", wv), f("wo", wo);
    f("ln1_gain", ln1_gain), f("ln1_bias", ln1_bias), f("ln2_gain", ln2_gain), f("ln2_bias", ln2_bias);
    f("w1", w1), f("b1", b1), f("w2", w2), f("b2", b2);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<LayerParams*>(this)->visit([&](std::string_view name, const auto& t) { f(name, t); });
  }
};

/// Every learnable tensor of the encoder plus the pair classifier.
template <typename Scalar>
struct ModelParams {
  std::vector<LayerParams<Scalar>> layers;
  Matrix<Scalar> c_pos, c_neg;   // (D+1) x d
  Vector<Scalar> walk_weights;   // r
  Matrix<Scalar> classifier;     // 2d x 3, columns ordered (+, -, ?)

  /// f(name, tensor) for every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    for (std::size_t l = 0; l < layers.size(); ++l)
      layers[l].visit([&](std::string_view name, auto& t) { f("layer" + std::to_string(l) + "." + std::string(name), t); });
    f(std::string("c_pos"), c_pos);
    f(std::string("c_neg"), c_neg);
    f(std::string("walk_weights"), walk_weights);
    f(std::string("classifier"), classifier);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<ModelParams*>(this)->visit([&](const std::string& name, const auto& t) { f(name, t); });
  }

  ModelParams zeros_like() const {
    ModelParams out = *this;
    out.visit([](const std::string&, auto& t) { t.setZero(); });
    return out;
  }

  std::size_t size() const {
    std::size_t n = 0;
    visit([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; layer-norm gains 1, biases 0,
/// walk weights 1/r.
ModelParams<double> init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Fixed (non-learnable) per-graph inputs of the encoder.
template <typename Scalar>
struct EncoderInputs {
  Matrix<Scalar> features;             // x, n x d
  std::vector<std::size_t> pos_index;  // clipped positive degree per node
  std::vector<std::size_t> neg_index;  // clipped negative degree per node
  Matrix<Scalar> adj_bias;             // n x n
  WalkBiasBasis walk;

  std::size_t num_nodes() const { return static_cast<std::size_t>(features.rows()); }
};

/// Spectral features, clipped degrees, adjacency bias and walk basis for `g`.
EncoderInputs<double> prepare_inputs(const SignedGraph& g, const ModelConfig& cfg, const WalkSet& walks,
                                     std::size_t max_path_length);

/// Activations recorded by one layer for the backward pass.
template <typename Scalar>
struct LayerTape {
  Matrix<Scalar> h_in;
  Matrix<Scalar> ln1_hat;
  Vector<Scalar> ln1_inv_std;
  Matrix<Scalar> x;        // LN1(h_in)
  Matrix<Scalar> q, k, v;  // n x d
  std::vector<Matrix<Scalar>> probs;  // per head, softmax(A~)
  Matrix<Scalar> heads_out;           // concatenated head outputs
  Matrix<Scalar> h_mid;               // h'
  Matrix<Scalar> ln2_hat;
  Vector<Scalar> ln2_inv_std;
  Matrix<Scalar> y;  // LN2(h')
  Matrix<Scalar> u;  // y w1 + b1
  Matrix<Scalar> a;  // act(u)
  Matrix<Scalar> h_out;
};

template <typename Scalar>
struct ForwardTape {
  bool recorded = false;
  Matrix<Scalar> h0;
  Matrix<Scalar> bias;
  std::vector<LayerTape<Scalar>> layers;
  Matrix<Scalar> z;
};

// ---- building blocks ---------------------------------------------------------

namespace detail {

template <typename Scalar>
Scalar activate(Scalar x, Activation act) {
  using std::erf;
  using std::sqrt;
  if (act == Activation::Relu) return x > Scalar(0) ? x : Scalar(0);
  return Scalar(0.5) * x * (Scalar(1) + erf(x / sqrt(Scalar(2))));
}

template <typename Scalar>
Scalar activate_grad(Scalar x, Activation act) {
  using std::erf;
  using std::exp;
  using std::sqrt;
  if (act == Activation::Relu) return x > Scalar(0) ? Scalar(1) : Scalar(0);
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + erf(x / sqrt(Scalar(2))));
  const Scalar pdf = exp(Scalar(-0.5) * x * x) / sqrt(Scalar(2 * M_PI));
  return cdf + x * pdf;
}

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& h, const Vector<Scalar>& gain, const Vector<Scalar>& bias,
                          double eps, Matrix<Scalar>& hat, Vector<Scalar>& inv_std) {
  using std::sqrt;
  const auto n = h.rows();
  const auto d = static_cast<Scalar>(h.cols());
  hat.resize(h.rows(), h.cols());
  inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mean = h.row(i).sum() / d;
    const auto centered = (h.row(i).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / d;
    inv_std(i) = Scalar(1) / sqrt(var + Scalar(eps));
    hat.row(i) = centered * inv_std(i);
  }
  Matrix<Scalar> out = hat * gain.asDiagonal();
  out.rowwise() += bias.transpose();
  return out;
}

/// dL/dh given dL/dout for y = gain * hat + bias.
template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& dout, const Matrix<Scalar>& hat,
                                   const Vector<Scalar>& inv_std, const Vector<Scalar>& gain, Vector<Scalar>& dgain,
                                   Vector<Scalar>& dbias) {
  dgain += (dout.cwiseProduct(hat)).colwise().sum().transpose();
  dbias += dout.colwise().sum().transpose();
  const Matrix<Scalar> dhat = dout * gain.asDiagonal();
  const auto d = static_cast<Scalar>(hat.cols());
  Matrix<Scalar> dh(hat.rows(), hat.cols());
  for (Eigen::Index i = 0; i < hat.rows(); ++i) {
    const Scalar mean_dhat = dhat.row(i).sum() / d;
    const Scalar mean_dhat_hat = dhat.row(i).dot(hat.row(i)) / d;
    dh.row(i) = inv_std(i) * (dhat.row(i).array() - mean_dhat - hat.row(i).array() * mean_dhat_hat).matrix();
  }
  return dh;
}

template <typename Scalar>
void softmax_rows_inplace(Matrix<Scalar>& s) {
  using std::exp;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Scalar m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

}  // namespace detail

template <typename Scalar>
struct AttentionOutput {
  Matrix<Scalar> out;                 // n x d, after the output projection
  Matrix<Scalar> heads_out;           // n x d, concatenated heads
  Matrix<Scalar> q, k, v;
  std::vector<Matrix<Scalar>> probs;  // per head
};

/// Multi-head attention with an additive bias shared by every head:
/// softmax(Q_h K_h^T / sqrt(d_k) + bias) V_h, heads concatenated and
/// projected by wo. Throws NumericError on non-finite input.
template <typename Scalar>
AttentionOutput<Scalar> attention_forward(const Matrix<Scalar>& x, const LayerParams<Scalar>& p,
                                          const Matrix<Scalar>& bias, const ModelConfig& cfg) {
  using std::sqrt;
  const auto n = x.rows();
  if (bias.rows() != n || bias.cols() != n) throw ConstraintError("attention bias must be |V| x |V|");
  if (!x.allFinite() || !bias.allFinite()) throw NumericError("non-finite input to attention");
  const auto dk = static_cast<Eigen::Index>(cfg.head_dim());
  AttentionOutput<Scalar> r;
  r.q = x * p.wq;
  r.k = x * p.wk;
  r.v = x * p.wv;
  r.heads_out.resize(n, static_cast<Eigen::Index>(cfg.heads) * dk);
  const Scalar scale = Scalar(1) / sqrt(Scalar(dk));
  r.probs.reserve(cfg.heads);
  for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(cfg.heads); ++h) {
    Matrix<Scalar> s = (r.q.middleCols(h * dk, dk) * r.k.middleCols(h * dk, dk).transpose()) * scale + bias;
    detail::softmax_rows_inplace(s);
    r.heads_out.middleCols(h * dk, dk) = s * r.v.middleCols(h * dk, dk);
    r.probs.push_back(std::move(s));
  }
  r.out = r.heads_out * p.wo;
  return r;
}

/// Pre-LN layer: h' = MHA(LN1(h)) + h, h_out = FFN(LN2(h')) + h'.
template <typename Scalar>
LayerTape<Scalar> transformer_layer(const Matrix<Scalar>& h, const LayerParams<Scalar>& p, const Matrix<Scalar>& bias,
                                    const ModelConfig& cfg) {
  if (!h.allFinite()) throw NumericError("non-finite layer input");
  LayerTape<Scalar> t;
  t.h_in = h;
  t.x = detail::layer_norm(h, p.ln1_gain, p.ln1_bias, cfg.ln_eps, t.ln1_hat, t.ln1_inv_std);
  auto att = attention_forward(t.x, p, bias, cfg);
  t.q = std::move(att.q);
  t.k = std::move(att.k);
  t.v = std::move(att.v);
  t.probs = std::move(att.probs);
  t.heads_out = std::move(att.heads_out);
  t.h_mid = att.out + h;
  t.y = detail::layer_norm(t.h_mid, p.ln2_gain, p.ln2_bias, cfg.ln_eps, t.ln2_hat, t.ln2_inv_std);
  t.u = t.y * p.w1;
  t.u.rowwise() += p.b1.transpose();
  t.a = t.u.unaryExpr([act = cfg.activation](Scalar v) { return detail::activate(v, act); });
  t.h_out = t.a * p.w2;
  t.h_out.rowwise() += p.b2.transpose();
  t.h_out += t.h_mid;
  return t;
}

/// Attention bias used by every layer: adjacency and walk terms, each
/// switchable for ablations.
template <typename Scalar>
Matrix<Scalar> attention_bias(const ModelParams<Scalar>& params, const EncoderInputs<Scalar>& in,
                              const ModelConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(in.num_nodes());
  Matrix<Scalar> bias = cfg.use_adjacency_bias ? in.adj_bias : Matrix<Scalar>::Zero(n, n);
  if (cfg.use_walk_bias) bias += walk_bias(in.walk, params.walk_weights);
  return bias;
}

/// h0 from features and centrality tables, then L layers. z = tape.z.
template <typename Scalar>
ForwardTape<Scalar> encode(const ModelParams<Scalar>& params, const EncoderInputs<Scalar>& in, const ModelConfig& cfg) {
  if (params.layers.empty()) throw ConfigError("encoder needs at least one layer");
  ForwardTape<Scalar> tape;
  tape.h0 = cfg.use_centrality
                ? centrality_encode<Scalar>(in.features, in.pos_index, in.neg_index, params.c_pos, params.c_neg)
                : in.features;
  tape.bias = attention_bias(params, in, cfg);
  const Matrix<Scalar>* h = &tape.h0;
  tape.layers.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    tape.layers.push_back(transformer_layer(*h, layer, tape.bias, cfg));
    h = &tape.layers.back().h_out;
  }
  tape.z = *h;
  tape.recorded = true;
  return tape;
}

/// Reverse pass of one layer. Accumulates into `g` and `dbias`; returns dL/dh_in.
template <typename Scalar>
Matrix<Scalar> transformer_layer_backward(const LayerTape<Scalar>& t, const LayerParams<Scalar>& p,
                                          const Matrix<Scalar>& dout, const ModelConfig& cfg, LayerParams<Scalar>& g,
                                          Matrix<Scalar>& dbias) {
  using std::sqrt;
  // FFN branch.
  Matrix<Scalar> dh_mid = dout;
  g.w2 += t.a.transpose() * dout;
  g.b2 += dout.colwise().sum().transpose();
  Matrix<Scalar> du = dout * p.w2.transpose();
  for (Eigen::Index i = 0; i < du.rows(); ++i)
    for (Eigen::Index j = 0; j < du.cols(); ++j) du(i, j) *= detail::activate_grad(t.u(i, j), cfg.activation);
  g.w1 += t.y.transpose() * du;
  g.b1 += du.colwise().sum().transpose();
  const Matrix<Scalar> dy = du * p.w1.transpose();
  dh_mid += detail::layer_norm_backward(dy, t.ln2_hat, t.ln2_inv_std, p.ln2_gain, g.ln2_gain, g.ln2_bias);

  // Attention branch.
  Matrix<Scalar> dh_in = dh_mid;
  g.wo += t.heads_out.transpose() * dh_mid;
  const Matrix<Scalar> dheads = dh_mid * p.wo.transpose();
  const auto dk = static_cast<Eigen::Index>(cfg.head_dim());
  const Scalar scale = Scalar(1) / sqrt(Scalar(dk));
  Matrix<Scalar> dq(t.q.rows(), t.q.cols()), dk_(t.k.rows(), t.k.cols()), dv(t.v.rows(), t.v.cols());
  for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(cfg.heads); ++h) {
    const Matrix<Scalar>& prob = t.probs[static_cast<std::size_t>(h)];
    const auto dout_h = dheads.middleCols(h * dk, dk);
    const Matrix<Scalar> dprob = dout_h * t.v.middleCols(h * dk, dk).transpose();
    dv.middleCols(h * dk, dk) = prob.transpose() * dout_h;
    Matrix<Scalar> ds = prob.cwiseProduct(dprob);
    const Vector<Scalar> row_dot = ds.rowwise().sum();
    ds -= prob.cwiseProduct(row_dot.replicate(1, prob.cols()));
    dbias += ds;
    dq.middleCols(h * dk, dk) = ds * t.k.middleCols(h * dk, dk) * scale;
    dk_.middleCols(h * dk, dk) = ds.transpose() * t.q.middleCols(h * dk, dk) * scale;
  }
  g.wq += t.x.transpose() * dq;
  g.wk += t.x.transpose() * dk_;
  g.wv += t.x.transpose() * dv;
  const Matrix<Scalar> dx = dq * p.wq.transpose() + dk_ * p.wk.transpose() + dv * p.wv.transpose();
  dh_in += detail::layer_norm_backward(dx, t.ln1_hat, t.ln1_inv_std, p.ln1_gain, g.ln1_gain, g.ln1_bias);
  return dh_in;
}

/// Exact gradients of a scalar loss w.r.t. every encoder parameter given
/// dL/dz. The classifier gradient is left at zero (the loss owns it).
template <typename Scalar>
ModelParams<Scalar> backward(const ModelParams<Scalar>& params, const EncoderInputs<Scalar>& in,
                             const ForwardTape<Scalar>& tape, const Matrix<Scalar>& dz, const ModelConfig& cfg) {
  if (!tape.recorded) throw ConstraintError("backward called before a recorded forward pass");
  if (dz.rows() != tape.z.rows() || dz.cols() != tape.z.cols()) throw ConstraintError("upstream gradient shape mismatch");
  ModelParams<Scalar> g = params.zeros_like();
  Matrix<Scalar> dbias = Matrix<Scalar>::Zero(tape.bias.rows(), tape.bias.cols());
  Matrix<Scalar> dh = dz;
  for (std::size_t l = params.layers.size(); l-- > 0;)
    dh = transformer_layer_backward(tape.layers[l], params.layers[l], dh, cfg, g.layers[l], dbias);
  if (cfg.use_centrality) {
    for (Eigen::Index i = 0; i < dh.rows(); ++i) {
      g.c_pos.row(static_cast<Eigen::Index>(in.pos_index[static_cast<std::size_t>(i)])) += dh.row(i);
      g.c_neg.row(static_cast<Eigen::Index>(in.neg_index[static_cast<std::size_t>(i)])) += dh.row(i);
    }
  }
  if (cfg.use_walk_bias) g.walk_weights = walk_weight_gradient(in.walk, dbias);
  return g;
}

// ---- checkpoints -------------------------------------------------------------

void write_params(std::ostream& out, const ModelParams<double>& params);
/// Reads tensors into `params`, whose shapes must already match the stream.
void read_params(std::istream& in, ModelParams<double>& params);

struct Checkpoint {
  ModelConfig config;
  std::uint64_t config_hash = 0;
  ModelParams<double> params;
};

/// Versioned binary file; the round trip is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

extern template struct ModelParams<double>;
extern template ForwardTape<double> encode(const ModelParams<double>&, const EncoderInputs<double>&,
                                           const ModelConfig&);
extern template ModelParams<double> backward(const ModelParams<double>&, const EncoderInputs<double>&,
                                             const ForwardTape<double>&, const Matrix<double>&, const ModelConfig&);

}  // namespace sesg
