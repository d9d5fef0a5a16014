#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dms/data.hpp"
#include "dms/trainer.hpp"

namespace dms {

/// Corruption grid for the robustness sweep, all applied to one modality.
struct SweepGrid {
  std::size_t modality = 0;
  std::vector<double> gaussian{1.0, 2.0, 4.0, 8.0};  // sigma values
  std::vector<double> mask{0.25, 0.5, 0.75, 1.0};    // masked fractions

  [[nodiscard]] std::vector<CorruptionSpec> specs() const;
  friend bool operator==(const SweepGrid&, const SweepGrid&) = default;
};

struct CheckConfig {
  std::size_t trials = 10000;
  std::size_t dim = 8;
  std::size_t min_modalities = 2;
  std::size_t max_modalities = 5;

  friend bool operator==(const CheckConfig&, const CheckConfig&) = default;
};

/// Everything a run needs. A single seed drives data generation, training and
/// evaluation; `data.seed` and `train.seed` always mirror it.
struct RunConfig {
  std::uint64_t seed = 7;
  DatasetConfig data;
  TrainConfig train;
  SweepGrid sweep;
  CorruptionSpec ablation{0, CorruptionKind::Gaussian, 8.0};
  std::optional<CorruptionSpec> eval_corruption;
  CheckConfig check;
  std::string output_dir = "runs";
  bool dump_weights = false;

  void set_seed(std::uint64_t s);
  /// Range checks for every field; throws ParameterError naming the field.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

using Json = nlohmann::json;

Json to_json(const CorruptionSpec& spec);
CorruptionSpec corruption_from_json(const Json& j, const std::string& where);

Json to_json(const RunConfig& cfg);

/// Overlays the keys present in `j` onto `base`. Absent keys keep their value
/// from `base`; unknown keys and wrongly typed values raise ConfigError.
RunConfig config_from_json(const Json& j, RunConfig base = {});

/// Parses `text` as JSON. Syntax errors raise ConfigError with line and column.
Json parse_json(const std::string& text, const std::string& source);

/// Reads a JSON config file over `base`, then validates the result.
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace dms
