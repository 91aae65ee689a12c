#pragma once

#include <exception>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ccx/config.hpp"
#include "ccx/effects.hpp"

namespace ccx {

inline constexpr const char* kVersion = "0.1.0";

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitEmptyAnalysis = 3;
inline constexpr int kExitNonConvergence = 4;
inline constexpr int kExitSeparation = 5;
inline constexpr int kExitNumerical = 6;

/// Maps a pipeline exception to its exit code.
int exit_code_for(const std::exception& e);

/// How far the pipeline runs: link -> match (and trim) -> fit -> effects.
enum class Stage { link, match, fit, effects };

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

/// Dry-run checks: value ranges and the existence of every input the stage
/// needs. Touches no outputs.
ValidationReport validate(const AnalysisConfig& config, Stage stage);

struct RunOutcome {
  /// kExitOk, or kExitNonConvergence when the fit did not converge cleanly.
  int exit_code = kExitOk;
  std::vector<std::string> warnings;
  std::vector<EffectEstimate> effects;
  std::filesystem::path output_dir;
};

/// Runs the pipeline up to `stage`, writing every artifact of the stages it
/// passes plus manifest.json. Throws on input, empty-analysis, separation and
/// numerical failures (see exit_code_for).
RunOutcome run(const AnalysisConfig& config, Stage stage);

/// Effects of several analyses side by side: a long-format CSV
/// (effect, analysis, point, lo95, hi95) and a text table with one column per
/// analysis, cells formatted "est (lo, hi)".
void write_summary(const std::filesystem::path& csv_path, const std::filesystem::path& text_path,
                   const std::vector<std::pair<std::string, std::vector<EffectEstimate>>>& runs);

}  // namespace ccx
