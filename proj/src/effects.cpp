#include "ccx/effects.hpp"

#include <cmath>

#include "ccx/csv.hpp"
#include "ccx/error.hpp"
#include "ccx/quantile.hpp"

namespace ccx {
namespace {

constexpr double kZ975 = 1.959963984540054;

// Equal-tailed 95% summary of per-draw values; point is the draw mean.
void summarize(EffectEstimate& e) {
  double sum = 0.0;
  for (double v : e.per_draw) sum += v;
  e.point = sum / static_cast<double>(e.per_draw.size());
  std::vector<double> sorted = e.per_draw;
  std::sort(sorted.begin(), sorted.end());
  e.lo95 = quantile_type1_sorted(sorted, 0.025);
  e.hi95 = quantile_type1_sorted(sorted, 0.975);
}

double wald_se(const FitResult& fit, const Eigen::VectorXd& c) {
  return std::sqrt(std::max(0.0, c.dot(fit.covariance * c)));
}

void check_dims(const FitResult& fit, const ModelBasis& basis) {
  if (fit.dimension() != basis.dimension()) {
    throw InputError("fit has " + std::to_string(fit.dimension()) + " coefficients, basis has " +
                     std::to_string(basis.dimension()));
  }
}

struct Contrast {
  Eigen::VectorXd c;
  bool extrapolated = false;
};

Contrast contrast_vector(const ModelBasis& basis, EffectName which, const ContrastLevels& lv) {
  double t1 = lv.t0, a1 = lv.a0;
  switch (which) {
    case EffectName::OR10: t1 = lv.t1; break;
    case EffectName::OR01: a1 = lv.a1; break;
    case EffectName::OR11: t1 = lv.t1; a1 = lv.a1; break;
    default: throw InputError("not an odds-ratio contrast: " + to_string(which));
  }
  Contrast out;
  out.c = basis.row(t1, a1) - basis.row(lv.t0, lv.a0);
  out.extrapolated = !basis.temperature.inside(lv.t0) || !basis.temperature.inside(t1) ||
                     !basis.pm25.inside(lv.a0) || !basis.pm25.inside(a1);
  return out;
}

// exp(c . beta): per draw, or at the MLE with a Wald interval on the log scale.
EffectEstimate exp_linear(const FitResult& fit, const Eigen::VectorXd& c, EffectName name) {
  EffectEstimate e;
  e.name = name;
  if (fit.mode == FitMode::bayes) {
    const Eigen::VectorXd eta = fit.draws * c;
    e.per_draw.resize(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index s = 0; s < eta.size(); ++s) e.per_draw[s] = std::exp(eta[s]);
    summarize(e);
  } else {
    const double eta = c.dot(fit.point);
    const double se = wald_se(fit, c);
    e.point = std::exp(eta);
    e.lo95 = std::exp(eta - kZ975 * se);
    e.hi95 = std::exp(eta + kZ975 * se);
  }
  return e;
}

}  // namespace

std::string to_string(LevelProvenance p) {
  return p == LevelProvenance::case_day_median_p95 ? "case_day_median_p95" : "user";
}

std::string to_string(EffectName name) {
  switch (name) {
    case EffectName::OR10: return "OR10";
    case EffectName::OR01: return "OR01";
    case EffectName::OR11: return "OR11";
    case EffectName::RERI: return "RERI";
    case EffectName::mult_interaction: return "mult_interaction";
  }
  return "unknown";
}

ContrastLevels case_day_levels(std::span<const MatchedSet> sets, double baseline,
                               double elevated) {
  std::vector<double> t, a;
  for (const auto& s : sets) {
    const auto& c = s.case_row();
    t.push_back(c.temperature);
    a.push_back(c.pm25_window);
  }
  if (t.empty()) throw EmptyAnalysisError("no case days to derive contrast levels from");
  return {quantile_type1(t, baseline), quantile_type1(t, elevated), quantile_type1(a, baseline),
          quantile_type1(a, elevated), LevelProvenance::case_day_median_p95};
}

EffectEstimate or_contrast(const FitResult& fit, const ModelBasis& basis, EffectName which,
                           const ContrastLevels& levels) {
  check_dims(fit, basis);
  const auto c = contrast_vector(basis, which, levels);
  auto e = exp_linear(fit, c.c, which);
  e.extrapolated = c.extrapolated;
  return e;
}

EffectEstimate reri(const FitResult& fit, const ModelBasis& basis, const ContrastLevels& levels) {
  check_dims(fit, basis);
  const auto c10 = contrast_vector(basis, EffectName::OR10, levels);
  const auto c01 = contrast_vector(basis, EffectName::OR01, levels);
  const auto c11 = contrast_vector(basis, EffectName::OR11, levels);
  EffectEstimate e;
  e.name = EffectName::RERI;
  e.extrapolated = c10.extrapolated || c01.extrapolated || c11.extrapolated;
  if (fit.mode == FitMode::bayes) {
    const auto or10 = exp_linear(fit, c10.c, EffectName::OR10);
    const auto or01 = exp_linear(fit, c01.c, EffectName::OR01);
    const auto or11 = exp_linear(fit, c11.c, EffectName::OR11);
    e.per_draw.resize(or10.per_draw.size());
    for (std::size_t s = 0; s < e.per_draw.size(); ++s) {
      e.per_draw[s] = or11.per_draw[s] - or10.per_draw[s] - or01.per_draw[s] + 1.0;
    }
    summarize(e);
  } else {
    const double o10 = std::exp(c10.c.dot(fit.point));
    const double o01 = std::exp(c01.c.dot(fit.point));
    const double o11 = std::exp(c11.c.dot(fit.point));
    e.point = o11 - o10 - o01 + 1.0;
    // Delta method on beta.
    const Eigen::VectorXd grad = o11 * c11.c - o10 * c10.c - o01 * c01.c;
    const double se = wald_se(fit, grad);
    e.lo95 = e.point - kZ975 * se;
    e.hi95 = e.point + kZ975 * se;
  }
  return e;
}

EffectEstimate mult_interaction(const FitResult& fit, const ModelBasis& basis) {
  if (basis.interaction != BasisKind::linear_interaction) {
    throw UnsupportedModelError("multiplicative interaction needs the linear T*A model");
  }
  check_dims(fit, basis);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(basis.dimension());
  c[basis.dimension() - 1] = 1.0;
  return exp_linear(fit, c, EffectName::mult_interaction);
}

std::vector<SurfacePoint> response_curve(const FitResult& fit, const ModelBasis& basis,
                                         ExposureKind vary, double fixed_level,
                                         std::span<const double> grid, double reference) {
  check_dims(fit, basis);
  const bool vary_t = vary == ExposureKind::temperature_max;
  const Eigen::VectorXd ref =
      vary_t ? basis.row(reference, fixed_level) : basis.row(fixed_level, reference);
  std::vector<SurfacePoint> out;
  out.reserve(grid.size());
  for (const double x : grid) {
    const double t = vary_t ? x : fixed_level;
    const double a = vary_t ? fixed_level : x;
    const auto e = exp_linear(fit, basis.row(t, a) - ref, EffectName::OR10);
    out.push_back({t, a, e.point, e.lo95, e.hi95});
  }
  return out;
}

std::vector<SurfacePoint> risk_surface(const FitResult& fit, const ModelBasis& basis,
                                       std::span<const double> t_grid,
                                       std::span<const double> a_grid, double t_ref,
                                       double a_ref) {
  check_dims(fit, basis);
  const Eigen::VectorXd ref = basis.row(t_ref, a_ref);
  std::vector<SurfacePoint> out;
  out.reserve(t_grid.size() * a_grid.size());
  for (const double t : t_grid) {
    for (const double a : a_grid) {
      const auto e = exp_linear(fit, basis.row(t, a) - ref, EffectName::OR11);
      out.push_back({t, a, e.point, e.lo95, e.hi95});
    }
  }
  return out;
}

std::vector<double> linear_grid(double lo, double hi, int n) {
  if (n < 1) throw InputError("grid needs at least one point");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  if (n > 1) out.back() = hi;
  return out;
}

void write_contrasts(const std::filesystem::path& path, std::span<const EffectEstimate> effects) {
  csv::Writer w(path, {"name", "point", "lo95", "hi95", "extrapolated"});
  for (const auto& e : effects) w.row(to_string(e.name), e.point, e.lo95, e.hi95, e.extrapolated);
}

void write_surface(const std::filesystem::path& path, std::span<const SurfacePoint> points) {
  csv::Writer w(path, {"t", "a", "or", "lo95", "hi95"});
  for (const auto& p : points) w.row(p.t, p.a, p.odds_ratio, p.lo95, p.hi95);
}

}  // namespace ccx
