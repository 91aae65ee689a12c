#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccx/basis.hpp"
#include "ccx/clr.hpp"
#include "ccx/crossover_design.hpp"
#include "ccx/effects.hpp"
#include "ccx/sampler.hpp"

namespace ccx {

enum class FitMethod { bayes, mle };

/// One analysis, read from a JSON document. Relative paths resolve against
/// `base_dir` (the directory of the config file).
struct AnalysisConfig {
  struct Inputs {
    std::optional<std::filesystem::path> events;
    std::optional<std::filesystem::path> zones;
    std::optional<std::filesystem::path> membership;
    std::optional<std::filesystem::path> temperature_grid;
    std::optional<std::filesystem::path> temperature_field;
    std::optional<std::filesystem::path> pm25_grid;
    std::optional<std::filesystem::path> pm25_field;
    /// Pre-linked series; when given, the grid inputs for that exposure are skipped.
    std::optional<std::filesystem::path> temperature_series;
    std::optional<std::filesystem::path> pm25_series;
  };

  std::string name = "analysis";
  Inputs inputs;
  SeasonSpec season;
  int temperature_days = 1;
  int pm25_days = 3;
  double trim_quantile = 0.95;
  BasisKind interaction = BasisKind::linear_interaction;
  int df_temperature = 3;
  int df_pm25 = 3;
  PriorSpec prior = PriorSpec::defaults_for(BasisKind::linear_interaction);
  FitMethod method = FitMethod::bayes;
  SamplerConfig sampler;
  MleOptions mle;
  std::array<double, 2> contrast_quantiles{0.5, 0.95};
  std::optional<ContrastLevels> levels;
  std::optional<std::filesystem::path> levels_from;
  int curve_points = 50;
  int surface_t = 50;
  int surface_a = 50;
  std::filesystem::path output_dir = "out";
  std::optional<std::uint64_t> seed;

  /// The effective document (after flag overrides), echoed into the manifest.
  nlohmann::json raw;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const;

  /// Parses a config document, or a run manifest (its embedded config).
  static AnalysisConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
  static AnalysisConfig load(const std::filesystem::path& path);
  /// Applies `overrides` (a JSON merge patch) to the raw document and re-parses.
  AnalysisConfig with_overrides(const nlohmann::json& overrides) const;
};

nlohmann::json to_json(const ContrastLevels& levels);
ContrastLevels levels_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BasisSpec& spec);

}  // namespace ccx
