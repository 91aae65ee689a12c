#include "ccx/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "ccx/csv.hpp"
#include "ccx/error.hpp"
#include "ccx/exposure_link.hpp"

namespace ccx {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const SeparationError*>(&e)) return kExitSeparation;
  if (dynamic_cast<const EmptyAnalysisError*>(&e)) return kExitEmptyAnalysis;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  return kExitInput;
}

ValidationReport validate(const AnalysisConfig& c, Stage stage) {
  ValidationReport r;
  auto need = [&](const std::optional<fs::path>& p, const std::string& key) {
    if (!p) {
      r.errors.push_back("inputs." + key + " is required");
    } else if (!fs::exists(c.resolve(*p))) {
      r.errors.push_back("inputs." + key + ": no such file " + c.resolve(*p).string());
    }
  };
  auto optional_file = [&](const std::optional<fs::path>& p, const std::string& key) {
    if (p && !fs::exists(c.resolve(*p))) {
      r.errors.push_back("inputs." + key + ": no such file " + c.resolve(*p).string());
    }
  };

  if (c.inputs.temperature_series) {
    need(c.inputs.temperature_series, "temperature_series");
  } else {
    need(c.inputs.temperature_grid, "temperature_grid");
    need(c.inputs.temperature_field, "temperature_field");
    need(c.inputs.zones, "zones");
  }
  if (c.inputs.pm25_series) {
    need(c.inputs.pm25_series, "pm25_series");
  } else {
    need(c.inputs.pm25_field, "pm25_field");
    need(c.inputs.zones, "zones");
    need(c.inputs.membership, "membership");
    optional_file(c.inputs.pm25_grid, "pm25_grid");
  }
  if (stage != Stage::link) need(c.inputs.events, "events");

  if (c.season.first_month < 1 || c.season.last_month > 12 ||
      c.season.first_month > c.season.last_month) {
    r.errors.push_back("season months must satisfy 1 <= first_month <= last_month <= 12");
  }
  if (c.temperature_days < 1) r.errors.push_back("windows.temperature_days must be >= 1");
  if (c.pm25_days < 1) r.errors.push_back("windows.pm25_days must be >= 1");
  if (!(c.trim_quantile > 0.0 && c.trim_quantile <= 1.0)) {
    r.errors.push_back("trim.quantile must lie in (0, 1]");
  }
  if (c.df_temperature < 1 || c.df_pm25 < 1) r.errors.push_back("model df must be >= 1");
  for (const double q : c.contrast_quantiles) {
    if (!(q > 0.0 && q <= 1.0)) r.errors.push_back("contrasts.quantiles must lie in (0, 1]");
  }
  if (c.levels && c.levels_from) {
    r.errors.push_back("contrasts.levels and contrasts.levels_from are mutually exclusive");
  }
  if (c.levels_from && stage == Stage::effects && !fs::exists(c.resolve(*c.levels_from))) {
    r.errors.push_back("contrasts.levels_from: no such file " + c.resolve(*c.levels_from).string());
  }
  if (c.curve_points < 2 || c.surface_t < 2 || c.surface_a < 2) {
    r.errors.push_back("grid sizes must be >= 2");
  }
  try {
    c.prior.validate();
  } catch (const std::exception& e) {
    r.errors.push_back(e.what());
  }
  if (stage == Stage::fit || stage == Stage::effects) {
    if (!c.seed) r.errors.push_back("seed is required for fitting (config 'seed' or --seed)");
    if (c.method == FitMethod::bayes) {
      try {
        c.sampler.validate();
      } catch (const std::exception& e) {
        r.errors.push_back(e.what());
      }
    }
    if (!(c.mle.tolerance > 0.0) || c.mle.max_iter < 1) {
      r.errors.push_back("fit.tolerance must be positive and fit.max_iter >= 1");
    }
  }
  return r;
}

namespace {

std::map<std::string, ExposureSeries> by_zone(std::vector<ExposureSeries> series,
                                              ExposureKind kind) {
  std::map<std::string, ExposureSeries> out;
  for (auto& s : series) {
    if (s.kind == kind) out.emplace(s.zone_id, std::move(s));
  }
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json diagnostics_json(const FitResult& fit) {
  json d;
  if (fit.mode == FitMode::mle) {
    d["mode"] = "mle";
    d["converged"] = fit.mle.converged;
    d["iterations"] = fit.mle.iterations;
    d["gradient_norm"] = fit.mle.gradient_norm;
    d["ridge_used"] = fit.mle.ridge_used;
    json zero = json::array();
    for (int k : fit.mle.zero_information) zero.push_back(fit.labels[static_cast<std::size_t>(k)]);
    d["zero_information"] = zero;
  } else {
    d["mode"] = "bayes";
    d["converged"] = fit.bayes.converged;
    d["acceptance_rate"] = fit.bayes.acceptance_rate;
    d["draws"] = fit.draws.rows();
    json per = json::array();
    for (int k = 0; k < fit.dimension(); ++k) {
      per.push_back({{"label", fit.labels[static_cast<std::size_t>(k)]},
                     {"rhat", fit.bayes.rhat[k]},
                     {"ess", fit.bayes.ess[k]},
                     {"mcse", fit.bayes.mcse[k]}});
    }
    d["coefficients"] = per;
    d["warnings"] = fit.bayes.warnings;
  }
  return d;
}

void write_fit(const fs::path& dir, const FitResult& fit) {
  {
    csv::Writer w(dir / "coefficients.csv", {"label", "estimate", "sd"});
    const auto se = fit.standard_errors();
    for (int k = 0; k < fit.dimension(); ++k) {
      w.row(fit.labels[static_cast<std::size_t>(k)], fit.point[k], se[k]);
    }
  }
  if (fit.mode == FitMode::bayes) {
    csv::Writer w(dir / "draws.csv", fit.labels);
    std::vector<std::string> cells(static_cast<std::size_t>(fit.dimension()));
    for (Eigen::Index s = 0; s < fit.draws.rows(); ++s) {
      for (int k = 0; k < fit.dimension(); ++k) {
        cells[static_cast<std::size_t>(k)] = csv::format(fit.draws(s, k));
      }
      w.row(cells);
    }
  }
  write_json(dir / "diagnostics.json", diagnostics_json(fit));
}

// Grid over [lo, hi] that also contains `ref` exactly, so the reference cell
// of a curve or surface is a true self-contrast.
std::vector<double> grid_with(double lo, double hi, int n, double ref) {
  auto g = linear_grid(lo, hi, n);
  if (std::find(g.begin(), g.end(), ref) == g.end()) {
    g.insert(std::upper_bound(g.begin(), g.end(), ref), ref);
  }
  return g;
}

}  // namespace

RunOutcome run(const AnalysisConfig& c, Stage stage) {
  const auto report = validate(c, stage);
  if (!report.ok()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : report.errors) msg += "\n  " + e;
    throw InputError(msg);
  }
  RunOutcome out;
  out.output_dir = c.resolve(c.output_dir);
  const fs::path dir = out.output_dir;
  fs::create_directories(dir);
  std::vector<std::string> artifacts;

  json manifest;
  manifest["manifest_version"] = 1;
  manifest["tool"] = "ccx";
  manifest["version"] = kVersion;
  manifest["stage"] = stage == Stage::link    ? "link"
                      : stage == Stage::match ? "match"
                      : stage == Stage::fit   ? "fit"
                                              : "effects";
  manifest["config"] = c.raw;
  manifest["config_dir"] = fs::absolute(c.base_dir).lexically_normal().string();
  if (c.seed) manifest["seed"] = *c.seed;
  json resolved;

  // Link.
  std::vector<Zone> zones;
  if (c.inputs.zones) {
    zones = read_zones(c.resolve(*c.inputs.zones),
                       c.inputs.membership ? std::optional(c.resolve(*c.inputs.membership))
                                           : std::nullopt);
  }
  std::vector<ExposureSeries> temperature, pm25;
  if (c.inputs.temperature_series) {
    temperature = read_series(c.resolve(*c.inputs.temperature_series));
  } else {
    temperature = link_temperature(read_grid(c.resolve(*c.inputs.temperature_grid)), zones,
                                   read_field(c.resolve(*c.inputs.temperature_field)));
  }
  if (c.inputs.pm25_series) {
    pm25 = read_series(c.resolve(*c.inputs.pm25_series));
  } else {
    const auto grid = c.inputs.pm25_grid ? read_grid(c.resolve(*c.inputs.pm25_grid))
                                         : std::vector<GridCell>{};
    auto linked = link_pm25(grid, zones, read_field(c.resolve(*c.inputs.pm25_field)));
    for (const auto& z : linked.excluded_zones) {
      out.warnings.push_back("zone '" + z + "' has no PM2.5 member cells; excluded");
    }
    pm25 = std::move(linked.series);
  }
  write_series(dir / "temperature_series.csv", temperature);
  write_series(dir / "pm25_series.csv", pm25);
  artifacts.insert(artifacts.end(), {"temperature_series.csv", "pm25_series.csv"});

  auto finish = [&] {
    manifest["resolved"] = resolved;
    manifest["warnings"] = out.warnings;
    artifacts.push_back("manifest.json");
    manifest["artifacts"] = artifacts;
    write_json(dir / "manifest.json", manifest);
    return out;
  };
  if (stage == Stage::link) return finish();

  // Match and trim.
  const auto events = read_events(c.resolve(*c.inputs.events));
  auto ingested = ingest_events(events, c.season);
  const WindowSpec t_window{ExposureKind::temperature_max, c.temperature_days, Aggregator::mean};
  const WindowSpec a_window{ExposureKind::pm25, c.pm25_days, Aggregator::mean};
  auto matched = build_matched_sets(ingested.events,
                                    by_zone(std::move(temperature), ExposureKind::temperature_max),
                                    by_zone(std::move(pm25), ExposureKind::pm25), t_window,
                                    a_window);
  std::vector<Drop> drops = std::move(ingested.drops);
  drops.insert(drops.end(), matched.drops.begin(), matched.drops.end());
  write_matched_sets(dir / "matched_sets_pretrim.csv", matched.sets);
  artifacts.push_back("matched_sets_pretrim.csv");
  json counts{{"events_in", events.size()}, {"sets_pretrim", matched.sets.size()}};
  auto write_drops = [&] {
    write_drop_log(dir / "drop_log.csv", drops);
    artifacts.push_back("drop_log.csv");
    std::map<std::string, int> by_reason;
    for (const auto& d : drops) ++by_reason[to_string(d.reason)];
    counts["drops"] = by_reason;
    resolved["counts"] = counts;
  };
  if (matched.sets.empty()) {
    write_drops();
    finish();
    throw EmptyAnalysisError("no matched sets survived linkage");
  }
  TrimResult trimmed;
  try {
    trimmed = apply_trimming(matched.sets, TrimPolicy{c.trim_quantile});
  } catch (const EmptyAnalysisError&) {
    write_drops();
    finish();
    throw;
  }
  drops.insert(drops.end(), trimmed.drops.begin(), trimmed.drops.end());
  const auto& sets = trimmed.sets;
  write_matched_sets(dir / "matched_sets.csv", sets);
  artifacts.push_back("matched_sets.csv");
  counts["sets_analysed"] = sets.size();
  write_drops();
  resolved["trim"] = {{"quantile", trimmed.policy.quantile},
                      {"threshold", trimmed.policy.computed_threshold},
                      {"pooled_rows", trimmed.policy.pooled_rows},
                      {"removed_rows", trimmed.policy.removed_rows}};
  if (stage == Stage::match) return finish();

  // Basis and fit.
  std::vector<double> pooled_t, pooled_a;
  for (const auto& s : sets) {
    for (const auto& r : s.rows) {
      pooled_t.push_back(r.temperature);
      pooled_a.push_back(r.pm25_window);
    }
  }
  ModelBasis basis;
  basis.temperature = fit_knots(pooled_t, c.df_temperature);
  basis.pm25 = fit_knots(pooled_a, c.df_pm25);
  basis.interaction = c.interaction;
  resolved["basis"] = {{"temperature", to_json(basis.temperature)},
                       {"pm25", to_json(basis.pm25)},
                       {"interaction", to_string(basis.interaction)},
                       {"labels", basis.labels()}};

  const ConditionalLikelihood lik(build_design(sets, basis));
  FitResult fit;
  if (c.method == FitMethod::mle) {
    fit = fit_mle(lik, c.mle);
    if (!fit.mle.converged) {
      out.exit_code = kExitNonConvergence;
      out.warnings.push_back("Newton iteration did not converge in " +
                             std::to_string(c.mle.max_iter) + " iterations");
    }
    resolved["fit"] = {{"method", "mle"}, {"tolerance", c.mle.tolerance}, {"max_iter", c.mle.max_iter}};
  } else {
    SamplerConfig sc = c.sampler;
    sc.seed = *c.seed;
    fit = fit_bayes(lik, c.prior, sc);
    if (!fit.bayes.converged) {
      out.exit_code = kExitNonConvergence;
      out.warnings.insert(out.warnings.end(), fit.bayes.warnings.begin(), fit.bayes.warnings.end());
    }
    resolved["fit"] = {{"method", "bayes"},
                       {"chains", sc.chains},
                       {"warmup", sc.warmup},
                       {"draws", sc.draws},
                       {"seed", sc.seed},
                       {"rhat_threshold", sc.rhat_threshold},
                       {"sampler", "hmc_dense_metric"}};
  }
  resolved["prior"] = {{"family", "gaussian"}, {"mean", 0.0}, {"sd", c.prior.block_sd}};
  write_fit(dir, fit);
  artifacts.insert(artifacts.end(), {"coefficients.csv", "diagnostics.json"});
  if (fit.mode == FitMode::bayes) artifacts.push_back("draws.csv");
  if (stage == Stage::fit) return finish();

  // Effects.
  ContrastLevels levels;
  if (c.levels) {
    levels = *c.levels;
  } else if (c.levels_from) {
    std::ifstream in(c.resolve(*c.levels_from));
    levels = levels_from_json(json::parse(in));
  } else {
    levels = case_day_levels(sets, c.contrast_quantiles[0], c.contrast_quantiles[1]);
  }
  write_json(dir / "levels.json", to_json(levels));
  artifacts.push_back("levels.json");
  resolved["levels"] = to_json(levels);

  out.effects = {or_contrast(fit, basis, EffectName::OR10, levels),
                 or_contrast(fit, basis, EffectName::OR01, levels),
                 or_contrast(fit, basis, EffectName::OR11, levels), reri(fit, basis, levels)};
  if (basis.interaction == BasisKind::linear_interaction) {
    out.effects.push_back(mult_interaction(fit, basis));
  }
  for (const auto& e : out.effects) {
    if (e.extrapolated) {
      out.warnings.push_back(to_string(e.name) + " uses levels outside the fitted knot range");
    }
  }
  write_contrasts(dir / "contrasts.csv", out.effects);

  const auto [t_min, t_max] = std::minmax_element(pooled_t.begin(), pooled_t.end());
  const auto [a_min, a_max] = std::minmax_element(pooled_a.begin(), pooled_a.end());
  const auto t_curve = grid_with(*t_min, *t_max, c.curve_points, levels.t0);
  const auto a_curve = grid_with(*a_min, *a_max, c.curve_points, levels.a0);
  write_surface(dir / "curve_temperature.csv",
                response_curve(fit, basis, ExposureKind::temperature_max, levels.a0, t_curve,
                               levels.t0));
  write_surface(dir / "curve_pm25.csv",
                response_curve(fit, basis, ExposureKind::pm25, levels.t0, a_curve, levels.a0));
  write_surface(dir / "surface.csv",
                risk_surface(fit, basis, grid_with(*t_min, *t_max, c.surface_t, levels.t0),
                             grid_with(*a_min, *a_max, c.surface_a, levels.a0), levels.t0,
                             levels.a0));
  artifacts.insert(artifacts.end(),
                   {"contrasts.csv", "curve_temperature.csv", "curve_pm25.csv", "surface.csv"});
  return finish();
}

void write_summary(const fs::path& csv_path, const fs::path& text_path,
                   const std::vector<std::pair<std::string, std::vector<EffectEstimate>>>& runs) {
  const std::vector<EffectName> rows{EffectName::OR10, EffectName::OR01, EffectName::OR11,
                                     EffectName::RERI};
  auto find = [](const std::vector<EffectEstimate>& effects, EffectName n) -> const EffectEstimate* {
    for (const auto& e : effects) {
      if (e.name == n) return &e;
    }
    return nullptr;
  };
  {
    csv::Writer w(csv_path, {"effect", "analysis", "point", "lo95", "hi95"});
    for (const auto n : rows) {
      for (const auto& [name, effects] : runs) {
        if (const auto* e = find(effects, n)) w.row(to_string(n), name, e->point, e->lo95, e->hi95);
      }
    }
  }
  std::ofstream txt(text_path);
  if (!txt) throw InputError("cannot write " + text_path.string());
  txt << std::left << std::setw(8) << "";
  for (const auto& [name, effects] : runs) txt << std::setw(22) << name;
  txt << '\n';
  for (const auto n : rows) {
    txt << std::setw(8) << to_string(n);
    for (const auto& [name, effects] : runs) {
      char cell[64] = "-";
      if (const auto* e = find(effects, n)) {
        std::snprintf(cell, sizeof cell, "%.2f (%.2f, %.2f)", e->point, e->lo95, e->hi95);
      }
      txt << std::setw(22) << cell;
    }
    txt << '\n';
  }
}

}  // namespace ccx
