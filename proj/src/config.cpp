#include "sesg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <vector>

namespace sesg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(std::uint64_t v, int) { return std::to_string(v); }

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

struct Field {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

#define SESG_REAL(name, member)                                                                         \
  {name, {[](const PipelineConfig& c) { return fmt(static_cast<double>(c.member)); },                  \
          [](PipelineConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); }}}
#define SESG_COUNT(name, member)                                                                        \
  {name, {[](const PipelineConfig& c) { return fmt(static_cast<std::size_t>(c.member)); },             \
          [](PipelineConfig& c, const std::string& k, const std::string& v) {                          \
            c.member = static_cast<decltype(c.member)>(parse_uint(k, v));                                \
          }}}
#define SESG_FLAG(name, member)                                                                         \
  {name, {[](const PipelineConfig& c) { return fmt(static_cast<bool>(c.member)); },                    \
          [](PipelineConfig& c, const std::string& k, const std::string& v) { c.member = parse_bool(k, v); }}}

const std::map<std::string, Field>& hashed_fields() {
  static const std::map<std::string, Field> fields = {
      {"dataset", {[](const PipelineConfig& c) { return c.dataset; },
                   [](PipelineConfig& c, const std::string&, const std::string& v) { c.dataset = v; }}},
      SESG_FLAG("undirected", undirected),
      SESG_FLAG("compact_ids", compact_ids),
      SESG_REAL("ratio", ratio),
      {"seed", {[](const PipelineConfig& c) { return fmt(c.seed, 0); },
                [](PipelineConfig& c, const std::string& k, const std::string& v) { c.seed = parse_uint(k, v); }}},
      SESG_COUNT("d", train.model.dim),
      SESG_COUNT("heads", train.model.heads),
      SESG_COUNT("layers", train.model.layers),
      SESG_COUNT("D", train.model.max_degree),
      SESG_COUNT("r", train.model.num_walks),
      {"activation",
       {[](const PipelineConfig& c) { return std::string(c.train.model.activation == Activation::Gelu ? "gelu" : "relu"); },
        [](PipelineConfig& c, const std::string& k, const std::string& v) {
          if (v == "gelu")
            c.train.model.activation = Activation::Gelu;
          else if (v == "relu")
            c.train.model.activation = Activation::Relu;
          else
            throw ConfigError("'" + k + "' expects gelu or relu, got '" + v + "'");
        }}},
      SESG_REAL("ln_eps", train.model.ln_eps),
      SESG_FLAG("use_centrality", train.model.use_centrality),
      SESG_FLAG("use_adjacency_bias", train.model.use_adjacency_bias),
      SESG_FLAG("use_walk_bias", train.model.use_walk_bias),
      SESG_COUNT("l", train.walk_length),
      SESG_COUNT("m_max", train.max_path_length),
      SESG_COUNT("max_epochs", train.max_epochs),
      SESG_COUNT("patience", train.patience),
      SESG_REAL("tol", train.tolerance),
      SESG_COUNT("max_nodes", train.max_nodes),
      SESG_FLAG("allow_large", train.allow_large),
      SESG_REAL("lambda", train.loss.lambda),
      SESG_REAL("weight_decay", train.loss.weight_decay),
      SESG_REAL("no_link_ratio", train.loss.no_link_ratio),
      SESG_REAL("lr", train.adam.lr),
      SESG_REAL("beta1", train.adam.beta1),
      SESG_REAL("beta2", train.adam.beta2),
      SESG_REAL("adam_eps", train.adam.eps),
      SESG_REAL("decoupled_weight_decay", train.adam.decoupled_weight_decay),
      SESG_REAL("srwr_c", srwr.restart),
      SESG_REAL("srwr_beta", srwr.beta),
      SESG_REAL("srwr_gamma", srwr.gamma),
      SESG_REAL("srwr_tol", srwr.tol),
      SESG_COUNT("srwr_max_iters", srwr.max_iters),
      SESG_REAL("srwr_p", srwr.threshold_p),
      SESG_REAL("srwr_n", srwr.threshold_n),
      SESG_COUNT("K", decoder.k),
      SESG_COUNT("n_sample", decoder.n_sample),
      SESG_FLAG("symmetric_decoder", decoder.symmetric),
      SESG_FLAG("use_diffusion", use_diffusion),
  };
  return fields;
}

const std::map<std::string, Field>& execution_fields() {
  static const std::map<std::string, Field> fields = {
      SESG_COUNT("threads", threads),
      SESG_FLAG("include_wall_time", include_wall_time),
      SESG_FLAG("text_report", text_report),
  };
  return fields;
}

#undef SESG_REAL
#undef SESG_COUNT
#undef SESG_FLAG

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (auto it = hashed_fields().find(key); it != hashed_fields().end()) return it->second.set(*this, key, value);
  if (auto it = execution_fields().find(key); it != execution_fields().end()) return it->second.set(*this, key, value);
  throw ConfigError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> PipelineConfig::canonical() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : hashed_fields()) out[k] = f.get(*this);
  return out;
}

std::string PipelineConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : canonical()) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t PipelineConfig::hash() const { return fnv1a(canonical_text()); }

void PipelineConfig::validate() const {
  if (!(ratio > 0 && ratio < 1)) throw ConfigError("ratio must lie in (0, 1)");
  train.model.validate();
  if (train.walk_length < 1) throw ConfigError("walk length must be at least 1");
  if (train.loss.lambda < 0 || train.loss.weight_decay < 0) throw ConfigError("loss weights must be non-negative");
  if (!(train.adam.lr > 0)) throw ConfigError("learning rate must be positive");
  srwr.validate();
  decoder.validate();
}

PipelineConfig parse_config(std::istream& in) {
  PipelineConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      cfg.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config '" + path.string() + "'");
  out << "# config_hash=" << hex64(cfg.hash()) << '\n' << cfg.canonical_text();
  for (const auto& [k, f] : execution_fields()) out << k << '=' << f.get(cfg) << '\n';
}

}  // namespace sesg
