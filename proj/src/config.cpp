#include "ccx/config.hpp"

#include <fstream>
#include <set>

#include "ccx/error.hpp"

namespace ccx {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) throw InputError("config: unknown key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("config: '" + where + key + "' has the wrong type");
  }
}

void read_path(const json& obj, const char* key, std::optional<fs::path>& out) {
  if (!obj.contains(key)) return;
  if (!obj.at(key).is_string()) throw InputError(std::string("config: inputs.") + key + " must be a path");
  out = fs::path(obj.at(key).get<std::string>());
}

}  // namespace

json to_json(const ContrastLevels& lv) {
  return {{"t0", lv.t0}, {"t1", lv.t1}, {"a0", lv.a0}, {"a1", lv.a1},
          {"provenance", to_string(lv.provenance)}};
}

ContrastLevels levels_from_json(const json& j) {
  ContrastLevels lv;
  try {
    lv.t0 = j.at("t0").get<double>();
    lv.t1 = j.at("t1").get<double>();
    lv.a0 = j.at("a0").get<double>();
    lv.a1 = j.at("a1").get<double>();
  } catch (const json::exception&) {
    throw InputError("contrast levels need numeric t0, t1, a0, a1");
  }
  lv.provenance = j.value("provenance", std::string("user")) == "case_day_median_p95"
                      ? LevelProvenance::case_day_median_p95
                      : LevelProvenance::user;
  return lv;
}

json to_json(const BasisSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"df", spec.df},
          {"interior_knots", spec.interior_knots},
          {"boundary_knots", {spec.boundary_knots.first, spec.boundary_knots.second}}};
}

fs::path AnalysisConfig::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

AnalysisConfig AnalysisConfig::from_json(const json& input, const fs::path& base_dir) {
  json doc = input;
  fs::path base = base_dir;
  if (doc.contains("manifest_version")) {
    base = doc.at("config_dir").get<std::string>();
    doc = doc.at("config");
  }
  reject_unknown(doc,
                 {"name", "inputs", "season", "windows", "trim", "model", "prior", "fit",
                  "contrasts", "grid", "output_dir", "seed"},
                 "");
  AnalysisConfig c;
  c.raw = doc;
  c.base_dir = base;
  read(doc, "name", c.name, "");

  if (doc.contains("inputs")) {
    const auto& in = doc.at("inputs");
    reject_unknown(in,
                   {"events", "zones", "membership", "temperature_grid", "temperature_field",
                    "pm25_grid", "pm25_field", "temperature_series", "pm25_series"},
                   "inputs.");
    read_path(in, "events", c.inputs.events);
    read_path(in, "zones", c.inputs.zones);
    read_path(in, "membership", c.inputs.membership);
    read_path(in, "temperature_grid", c.inputs.temperature_grid);
    read_path(in, "temperature_field", c.inputs.temperature_field);
    read_path(in, "pm25_grid", c.inputs.pm25_grid);
    read_path(in, "pm25_field", c.inputs.pm25_field);
    read_path(in, "temperature_series", c.inputs.temperature_series);
    read_path(in, "pm25_series", c.inputs.pm25_series);
  }
  if (doc.contains("season")) {
    const auto& s = doc.at("season");
    reject_unknown(s, {"first_month", "last_month"}, "season.");
    read(s, "first_month", c.season.first_month, "season.");
    read(s, "last_month", c.season.last_month, "season.");
  }
  if (doc.contains("windows")) {
    const auto& w = doc.at("windows");
    reject_unknown(w, {"temperature_days", "pm25_days"}, "windows.");
    read(w, "temperature_days", c.temperature_days, "windows.");
    read(w, "pm25_days", c.pm25_days, "windows.");
  }
  if (doc.contains("trim")) {
    reject_unknown(doc.at("trim"), {"quantile"}, "trim.");
    read(doc.at("trim"), "quantile", c.trim_quantile, "trim.");
  }
  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    reject_unknown(m, {"interaction", "df_temperature", "df_pm25"}, "model.");
    std::string kind = "linear";
    read(m, "interaction", kind, "model.");
    if (kind == "linear") {
      c.interaction = BasisKind::linear_interaction;
    } else if (kind == "tensor") {
      c.interaction = BasisKind::tensor_product;
    } else {
      throw InputError("config: model.interaction must be 'linear' or 'tensor'");
    }
    read(m, "df_temperature", c.df_temperature, "model.");
    read(m, "df_pm25", c.df_pm25, "model.");
  }
  c.prior = PriorSpec::defaults_for(c.interaction);
  if (doc.contains("prior")) {
    const auto& p = doc.at("prior");
    reject_unknown(p, {"f", "g", "h"}, "prior.");
    for (const char* b : {"f", "g", "h"}) read(p, b, c.prior.block_sd[b], "prior.");
  }
  if (doc.contains("fit")) {
    const auto& f = doc.at("fit");
    reject_unknown(f,
                   {"method", "chains", "warmup", "draws", "rhat_threshold", "tolerance",
                    "max_iter"},
                   "fit.");
    std::string method = "bayes";
    read(f, "method", method, "fit.");
    if (method == "bayes") {
      c.method = FitMethod::bayes;
    } else if (method == "mle") {
      c.method = FitMethod::mle;
    } else {
      throw InputError("config: fit.method must be 'bayes' or 'mle'");
    }
    read(f, "chains", c.sampler.chains, "fit.");
    read(f, "warmup", c.sampler.warmup, "fit.");
    read(f, "draws", c.sampler.draws, "fit.");
    read(f, "rhat_threshold", c.sampler.rhat_threshold, "fit.");
    read(f, "tolerance", c.mle.tolerance, "fit.");
    read(f, "max_iter", c.mle.max_iter, "fit.");
  }
  if (doc.contains("contrasts")) {
    const auto& k = doc.at("contrasts");
    reject_unknown(k, {"quantiles", "levels", "levels_from"}, "contrasts.");
    read(k, "quantiles", c.contrast_quantiles, "contrasts.");
    if (k.contains("levels")) c.levels = levels_from_json(k.at("levels"));
    if (k.contains("levels_from")) c.levels_from = fs::path(k.at("levels_from").get<std::string>());
  }
  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    reject_unknown(g, {"curve_points", "surface_t", "surface_a"}, "grid.");
    read(g, "curve_points", c.curve_points, "grid.");
    read(g, "surface_t", c.surface_t, "grid.");
    read(g, "surface_a", c.surface_a, "grid.");
  }
  if (doc.contains("output_dir")) c.output_dir = doc.at("output_dir").get<std::string>();
  if (doc.contains("seed")) {
    const auto& seed = doc.at("seed");
    if (!seed.is_number_integer() || seed.get<std::int64_t>() < 0) {
      throw InputError("config: seed must be a non-negative integer");
    }
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.sampler.seed = *c.seed;
  }
  return c;
}

AnalysisConfig AnalysisConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
  return from_json(doc, fs::absolute(path).parent_path());
}

AnalysisConfig AnalysisConfig::with_overrides(const json& overrides) const {
  json doc = raw;
  doc.merge_patch(overrides);
  return from_json(doc, base_dir);
}

}  // namespace ccx
