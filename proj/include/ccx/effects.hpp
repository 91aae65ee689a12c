#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccx/basis.hpp"
#include "ccx/clr.hpp"
#include "ccx/crossover_design.hpp"

namespace ccx {

enum class LevelProvenance { case_day_median_p95, user };

/// Baseline (t0, a0) and elevated (t1, a1) exposure levels for the contrasts.
struct ContrastLevels {
  double t0 = 0.0;
  double t1 = 0.0;
  double a0 = 0.0;
  double a1 = 0.0;
  LevelProvenance provenance = LevelProvenance::user;
};

std::string to_string(LevelProvenance p);

/// Quantiles of case-row exposures only (type-1 rule): `baseline` gives t0/a0
/// and `elevated` gives t1/a1.
ContrastLevels case_day_levels(std::span<const MatchedSet> sets, double baseline = 0.5,
                               double elevated = 0.95);

enum class EffectName { OR10, OR01, OR11, RERI, mult_interaction };

std::string to_string(EffectName name);

struct EffectEstimate {
  EffectName name = EffectName::OR10;
  /// Posterior mean (bayes) or plug-in value at the MLE.
  double point = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
  /// Some contrast level lies outside the fitted boundary knots.
  bool extrapolated = false;
  /// One value per posterior draw (bayes only).
  std::vector<double> per_draw;
};

/// exp of the linear-predictor difference for OR10 (t1 vs t0 at a0), OR01
/// (a1 vs a0 at t0) or OR11 (both raised).
EffectEstimate or_contrast(const FitResult& fit, const ModelBasis& basis, EffectName which,
                           const ContrastLevels& levels);

/// OR11 - OR10 - OR01 + 1, evaluated draw by draw before summarizing.
EffectEstimate reri(const FitResult& fit, const ModelBasis& basis, const ContrastLevels& levels);

/// exp(gamma) for the linear T*A coefficient. Throws UnsupportedModelError for
/// tensor interactions.
EffectEstimate mult_interaction(const FitResult& fit, const ModelBasis& basis);

struct SurfacePoint {
  double t = 0.0;
  double a = 0.0;
  double odds_ratio = 1.0;
  double lo95 = 1.0;
  double hi95 = 1.0;
};

/// OR along a grid of one exposure, the other held at `fixed_level`,
/// relative to `reference` of the varied exposure.
std::vector<SurfacePoint> response_curve(const FitResult& fit, const ModelBasis& basis,
                                         ExposureKind vary, double fixed_level,
                                         std::span<const double> grid, double reference);

/// OR at every (t, a) grid pair relative to (t_ref, a_ref); row-major in t.
std::vector<SurfacePoint> risk_surface(const FitResult& fit, const ModelBasis& basis,
                                       std::span<const double> t_grid,
                                       std::span<const double> a_grid, double t_ref,
                                       double a_ref);

/// `n` equally spaced values from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, int n);

void write_contrasts(const std::filesystem::path& path, std::span<const EffectEstimate> effects);
void write_surface(const std::filesystem::path& path, std::span<const SurfacePoint> points);

}  // namespace ccx
