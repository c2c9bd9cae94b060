#include "sesg/transformer.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace sesg {

void ModelConfig::validate() const {
  if (dim == 0 || heads == 0) throw ConfigError("d and the head count must be positive");
  if (dim % heads != 0) throw ConfigError("head count must divide d");
  if (layers == 0) throw ConfigError("at least one transformer layer is required");
  if (num_walks == 0 && use_walk_bias) throw ConfigError("walk bias needs at least one walk per node");
}

ModelParams<double> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  Rng rng(mix_seed(seed, 0x1417));
  auto uniform = [&](Eigen::Index rows, Eigen::Index cols, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    Matrix<double> m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
    return m;
  };
  const double fan = static_cast<double>(cfg.dim);

  ModelParams<double> p;
  p.layers.resize(cfg.layers);
  for (auto& layer : p.layers) {
    layer.wq = uniform(d, d, fan);
    layer.wk = uniform(d, d, fan);
    layer.wv = uniform(d, d, fan);
    layer.wo = uniform(d, d, fan);
    layer.ln1_gain = Vector<double>::Ones(d);
    layer.ln1_bias = Vector<double>::Zero(d);
    layer.ln2_gain = Vector<double>::Ones(d);
    layer.ln2_bias = Vector<double>::Zero(d);
    layer.w1 = uniform(d, d, fan);
    layer.b1 = uniform(d, 1, fan);
    layer.w2 = uniform(d, d, fan);
    layer.b2 = uniform(d, 1, fan);
  }
  const auto rows = static_cast<Eigen::Index>(cfg.max_degree + 1);
  p.c_pos = uniform(rows, d, fan);
  p.c_neg = uniform(rows, d, fan);
  p.walk_weights = Vector<double>::Constant(static_cast<Eigen::Index>(cfg.num_walks),
                                            cfg.num_walks ? 1.0 / static_cast<double>(cfg.num_walks) : 0.0);
  p.classifier = uniform(2 * d, 3, 2.0 * fan);
  return p;
}

EncoderInputs<double> prepare_inputs(const SignedGraph& g, const ModelConfig& cfg, const WalkSet& walks,
                                     std::size_t max_path_length) {
  cfg.validate();
  if (walks.num_nodes != g.num_nodes() || walks.num_walks != cfg.num_walks)
    throw ConfigError("walk set does not match the graph or the configured walk count");
  EncoderInputs<double> in;
  in.features = spectral_init(g, cfg.dim);
  const auto prof = degree_profile(g);
  in.pos_index = clipped_degrees(prof.pos_degree, cfg.max_degree);
  in.neg_index = clipped_degrees(prof.neg_degree, cfg.max_degree);
  in.adj_bias = adjacency_bias(g);
  in.walk = walk_bias_basis(walks, g, max_path_length);
  return in;
}

// ---- checkpoints -------------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'S', 'E', 'S', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated checkpoint");
  return v;
}

}  // namespace

void write_params(std::ostream& out, const ModelParams<double>& params) {
  params.visit([&](const std::string&, const auto& t) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
}

void read_params(std::istream& in, ModelParams<double>& params) {
  params.visit([&](const std::string& name, auto& t) {
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows != static_cast<std::uint64_t>(t.rows()) || cols != static_cast<std::uint64_t>(t.cols()))
      throw IoError("tensor '" + name + "' has an unexpected shape");
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw IoError("truncated tensor '" + name + "'");
  });
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(kCkptMagic, sizeof(kCkptMagic));
  put<std::uint32_t>(out, kCkptVersion);
  put<std::uint64_t>(out, ckpt.config_hash);
  const auto& c = ckpt.config;
  for (std::size_t v : {c.dim, c.heads, c.layers, c.max_degree, c.num_walks}) put<std::uint64_t>(out, v);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(c.activation));
  put<std::uint8_t>(out, c.use_centrality);
  put<std::uint8_t>(out, c.use_adjacency_bias);
  put<std::uint8_t>(out, c.use_walk_bias);
  put<double>(out, c.ln_eps);
  write_params(out, ckpt.params);
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0) throw IoError("not a checkpoint file");
  if (get<std::uint32_t>(in) != kCkptVersion) throw IoError("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.config_hash = get<std::uint64_t>(in);
  auto& c = ckpt.config;
  for (std::size_t* v : {&c.dim, &c.heads, &c.layers, &c.max_degree, &c.num_walks}) *v = get<std::uint64_t>(in);
  c.activation = static_cast<Activation>(get<std::uint8_t>(in));
  c.use_centrality = get<std::uint8_t>(in) != 0;
  c.use_adjacency_bias = get<std::uint8_t>(in) != 0;
  c.use_walk_bias = get<std::uint8_t>(in) != 0;
  c.ln_eps = get<double>(in);
  ckpt.params = init_params(c, 0);
  read_params(in, ckpt.params);
  return ckpt;
}

template struct ModelParams<double>;
template ForwardTape<double> encode(const ModelParams<double>&, const EncoderInputs<double>&, const ModelConfig&);
template ModelParams<double> backward(const ModelParams<double>&, const EncoderInputs<double>&,
                                      const ForwardTape<double>&, const Matrix<double>&, const ModelConfig&);

}  // namespace sesg
