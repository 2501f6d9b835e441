#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "infovaegan/data.hpp"
#include "infovaegan/eval.hpp"
#include "infovaegan/training.hpp"

namespace ivg {

/// Everything an experiment needs, read from one JSON document. Every field is
/// optional and defaults to the value in the corresponding struct.
struct RunConfig {
  TrainConfig train;
  FactorSpec data;
  EvalConfig eval;

  /// Cross-checks (architecture pixels follow the image side) plus the
  /// per-struct validate() calls.
  void validate() const;
};

/// Invalid JSON, an unknown key, a mistyped or out-of-range value. The message
/// names a line/column or a dotted field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON with every field spelled out.
std::string config_to_json(const RunConfig& cfg);

}  // namespace ivg
