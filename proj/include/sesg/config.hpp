#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "sesg/explain.hpp"
#include "sesg/graph.hpp"
#include "sesg/srwr.hpp"
#include "sesg/training.hpp"

namespace sesg {

/// Everything a run depends on. Read from a flat `key = value` file.
struct PipelineConfig {
  // data
  std::string dataset;
  bool undirected = false;
  bool compact_ids = false;
  double ratio = 0.8;
  std::uint64_t seed = 0;

  TrainConfig train;
  SrwrConfig srwr;
  DecoderConfig decoder;
  bool use_diffusion = true;

  // execution; not part of the hash
  unsigned threads = 1;
  bool include_wall_time = false;
  bool text_report = false;

  /// Sets one key from its textual value. Throws ConfigError on unknown keys
  /// or malformed values.
  void set(const std::string& key, const std::string& value);

  /// Canonical `key=value` lines, sorted by key, covering every key that
  /// influences results.
  std::map<std::string, std::string> canonical() const;
  std::string canonical_text() const;
  std::uint64_t hash() const;

  void validate() const;
};

/// '#' starts a comment; blank lines are ignored.
PipelineConfig parse_config(std::istream& in);
PipelineConfig load_config(const std::filesystem::path& path);

/// Writes canonical_text() plus the execution keys.
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

}  // namespace sesg
