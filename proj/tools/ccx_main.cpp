// ccx: case-crossover exposure-interaction pipeline.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ccx/config.hpp"
#include "ccx/error.hpp"
#include "ccx/pipeline.hpp"
#include "ccx/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<double> trim_quantile;
  std::optional<int> temperature_days;
  std::optional<std::string> method;
  std::optional<int> chains;
  std::optional<int> warmup;
  std::optional<int> draws;

  void attach(CLI::App* app) {
    app->add_option("--output", output, "Output directory (overrides output_dir)");
    app->add_option("--seed", seed, "Random seed (overrides seed)");
    app->add_option("--trim-quantile", trim_quantile, "Overrides trim.quantile");
    app->add_option("--temperature-days", temperature_days, "Overrides windows.temperature_days");
    app->add_option("--method", method, "Overrides fit.method")->check(CLI::IsMember({"bayes", "mle"}));
    app->add_option("--chains", chains, "Overrides fit.chains");
    app->add_option("--warmup", warmup, "Overrides fit.warmup");
    app->add_option("--draws", draws, "Overrides fit.draws");
  }

  json patch() const {
    json p = json::object();
    if (output) p["output_dir"] = fs::absolute(*output).string();
    if (seed) p["seed"] = *seed;
    if (trim_quantile) p["trim"]["quantile"] = *trim_quantile;
    if (temperature_days) p["windows"]["temperature_days"] = *temperature_days;
    if (method) p["fit"]["method"] = *method;
    if (chains) p["fit"]["chains"] = *chains;
    if (warmup) p["fit"]["warmup"] = *warmup;
    if (draws) p["fit"]["draws"] = *draws;
    return p;
  }
};

int report(const ccx::RunOutcome& outcome, const std::string& name) {
  for (const auto& w : outcome.warnings) std::cerr << "warning [" << name << "]: " << w << '\n';
  std::cout << name << ": artifacts in " << outcome.output_dir.string() << '\n';
  for (const auto& e : outcome.effects) {
    std::cout << "  " << ccx::to_string(e.name) << " " << e.point << " (" << e.lo95 << ", "
              << e.hi95 << ")" << (e.extrapolated ? " [extrapolated]" : "") << '\n';
  }
  return outcome.exit_code;
}

int run_stage(const std::vector<std::string>& configs, const Overrides& overrides,
              ccx::Stage stage, const std::optional<std::string>& summary_dir) {
  if (overrides.output && configs.size() > 1) {
    throw ccx::InputError("--output needs a single --config");
  }
  int worst = ccx::kExitOk;
  std::vector<std::pair<std::string, std::vector<ccx::EffectEstimate>>> runs;
  for (const auto& path : configs) {
    const auto config = ccx::AnalysisConfig::load(path).with_overrides(overrides.patch());
    auto outcome = ccx::run(config, stage);
    worst = std::max(worst, report(outcome, config.name));
    runs.emplace_back(config.name, std::move(outcome.effects));
  }
  if (summary_dir) {
    fs::create_directories(*summary_dir);
    ccx::write_summary(fs::path(*summary_dir) / "contrast_summary.csv",
                       fs::path(*summary_dir) / "contrast_summary.txt", runs);
    std::cout << "summary written to " << *summary_dir << '\n';
  }
  return worst;
}

json analysis_config(const std::string& name, const json& patch) {
  json c = {{"name", name},
            {"inputs",
             {{"events", "events.csv"},
              {"zones", "zones.csv"},
              {"membership", "membership.csv"},
              {"temperature_grid", "temperature_grid.csv"},
              {"temperature_field", "temperature_field.csv"},
              {"pm25_grid", "pm25_grid.csv"},
              {"pm25_field", "pm25_field.csv"}}},
            {"season", {{"first_month", 6}, {"last_month", 9}}},
            {"windows", {{"temperature_days", 1}, {"pm25_days", 3}}},
            {"trim", {{"quantile", 0.95}}},
            {"model", {{"interaction", "linear"}, {"df_temperature", 3}, {"df_pm25", 3}}},
            {"prior", {{"f", 10.0}, {"g", 10.0}, {"h", 1.0}}},
            {"fit", {{"method", "bayes"}, {"chains", 4}, {"warmup", 1000}, {"draws", 1000}}},
            {"contrasts", {{"quantiles", {0.5, 0.95}}}},
            {"grid", {{"curve_points", 50}, {"surface_t", 50}, {"surface_a", 50}}},
            {"output_dir", "out/" + name},
            {"seed", 20240601}};
  c.merge_patch(patch);
  return c;
}

void write_analysis_configs(const fs::path& dir) {
  const json reuse_main = {{"contrasts", {{"levels_from", "out/main/levels.json"}}}};
  const std::vector<std::pair<std::string, json>> configs{
      {"main", json::object()},
      {"temperature_3day", {{"windows", {{"temperature_days", 3}}}}},
      {"trim_p99", {{"trim", {{"quantile", 0.99}}}}},
      {"tensor", {{"model", {{"interaction", "tensor"}}}, {"prior", {{"h", 10.0}}}}},
  };
  for (const auto& [name, patch] : configs) {
    json p = patch;
    if (name != "main") p.merge_patch(reuse_main);
    std::ofstream(dir / ("config_" + name + ".json")) << analysis_config(name, p).dump(2) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Case-crossover analysis of two interacting exposures"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("ccx ") + ccx::kVersion);

  std::vector<std::string> configs;
  Overrides overrides;
  std::optional<std::string> summary_dir;
  struct StageCommand {
    const char* name;
    const char* help;
    ccx::Stage stage;
  };
  const std::vector<StageCommand> stage_commands{
      {"link", "Link gridded fields to zone exposure series", ccx::Stage::link},
      {"match", "Build and trim matched sets", ccx::Stage::match},
      {"fit", "Fit the conditional logistic model", ccx::Stage::fit},
      {"effects", "Fit and compute OR/RERI contrasts, curves and surface", ccx::Stage::effects},
      {"run-all", "Full pipeline for one or more analysis configs", ccx::Stage::effects},
  };
  std::vector<std::pair<CLI::App*, ccx::Stage>> stage_apps;
  for (const auto& sc : stage_commands) {
    auto* sub = app.add_subcommand(sc.name, sc.help);
    sub->add_option("-c,--config", configs, "Analysis config (or a run manifest)")
        ->required()
        ->check(CLI::ExistingFile);
    overrides.attach(sub);
    if (std::string(sc.name) == "run-all") {
      sub->add_option("--summary-dir", summary_dir, "Write a side-by-side contrast table here");
    }
    stage_apps.emplace_back(sub, sc.stage);
  }

  auto* validate_cmd = app.add_subcommand("validate", "Dry-run configuration and input checks");
  std::string validate_config;
  std::string validate_stage = "effects";
  std::optional<std::uint64_t> validate_seed;
  validate_cmd->add_option("-c,--config", validate_config, "Analysis config")
      ->required()
      ->check(CLI::ExistingFile);
  validate_cmd->add_option("--stage", validate_stage, "Stage the config must support")
      ->check(CLI::IsMember({"link", "match", "fit", "effects"}));
  validate_cmd->add_option("--seed", validate_seed, "Seed override");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with known truth");
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  int n_events = 5000, n_zones = 20, first_year = 2015, last_year = 2016;
  double f_slope = 0.03, g_slope = 0.01, gamma = 0.002, rho = 0.3;
  bool with_configs = false;
  synth_cmd->add_option("-o,--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "Random seed")->required();
  synth_cmd->add_option("--n-events", n_events, "Number of events")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--zones", n_zones, "Number of zones")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--first-year", first_year, "First calendar year");
  synth_cmd->add_option("--last-year", last_year, "Last calendar year");
  synth_cmd->add_option("--f-slope", f_slope, "Log-odds per degree C");
  synth_cmd->add_option("--g-slope", g_slope, "Log-odds per ug/m3");
  synth_cmd->add_option("--gamma", gamma, "Log-odds per (degree C x ug/m3)");
  synth_cmd->add_option("--cross-correlation", rho, "Innovation correlation of T and PM2.5");
  synth_cmd->add_flag("--write-configs", with_configs,
                      "Also write the main and three sensitivity analysis configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ccx::kExitInput;
  }

  try {
    for (const auto& [sub, stage] : stage_apps) {
      if (sub->parsed()) return run_stage(configs, overrides, stage, summary_dir);
    }
    if (validate_cmd->parsed()) {
      auto config = ccx::AnalysisConfig::load(validate_config);
      if (validate_seed) config = config.with_overrides({{"seed", *validate_seed}});
      const ccx::Stage stage = validate_stage == "link"    ? ccx::Stage::link
                               : validate_stage == "match" ? ccx::Stage::match
                               : validate_stage == "fit"   ? ccx::Stage::fit
                                                           : ccx::Stage::effects;
      const auto rep = ccx::validate(config, stage);
      for (const auto& e : rep.errors) std::cout << "error: " << e << '\n';
      std::cout << (rep.ok() ? "config OK\n" : "config has errors\n");
      return rep.ok() ? ccx::kExitOk : ccx::kExitInput;
    }
    if (synth_cmd->parsed()) {
      ccx::synth::TruthSpec truth;
      truth.f = ccx::synth::UnivariateTruth::linear(f_slope, 29.0);
      truth.g = ccx::synth::UnivariateTruth::linear(g_slope, 9.0);
      truth.gamma = gamma;
      truth.zones = n_zones;
      truth.first_year = first_year;
      truth.last_year = last_year;
      truth.process.cross_correlation = rho;
      truth.seed = synth_seed;
      const auto data = ccx::synth::generate(truth, n_events);
      ccx::synth::write_inputs(data, synth_out);
      const json truth_doc = {{"f", {{"kind", "linear"}, {"slope", f_slope}, {"center", 29.0}}},
                              {"g", {{"kind", "linear"}, {"slope", g_slope}, {"center", 9.0}}},
                              {"h", {{"kind", "product"}, {"gamma", gamma}}},
                              {"zones", n_zones},
                              {"years", {first_year, last_year}},
                              {"cross_correlation", rho},
                              {"n_events", n_events},
                              {"seed", synth_seed}};
      std::ofstream(fs::path(synth_out) / "truth.json") << truth_doc.dump(2) << '\n';
      if (with_configs) write_analysis_configs(synth_out);
      std::cout << "wrote " << data.events.size() << " events for " << data.zones.size()
                << " zones to " << synth_out << '\n';
      return ccx::kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ccx::exit_code_for(e);
  }
  return ccx::kExitOk;
}
