#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ccx/crossover_design.hpp"
#include "ccx/exposure_link.hpp"

namespace ccx::synth {

/// A closed-form exposure effect on the log-odds scale.
struct UnivariateTruth {
  enum class Kind { zero, linear, quadratic, tabulated };
  Kind kind = Kind::zero;
  double slope = 0.0;
  double curvature = 0.0;
  double center = 0.0;
  /// Tabulated: piecewise-linear through (xs, ys), flat outside.
  std::vector<double> xs, ys;

  double operator()(double x) const;

  static UnivariateTruth linear(double slope, double center = 0.0);
  static UnivariateTruth quadratic(double slope, double curvature, double center);
};

/// AR(1) warm-season exposure process per zone. Temperature is Gaussian
/// around a seasonal ramp; PM2.5 is log-normal. Innovations are correlated.
struct ExposureProcess {
  double temperature_mean = 29.0;
  double temperature_sd = 4.0;
  double temperature_phi = 0.7;
  double temperature_seasonal_amplitude = 2.5;
  double zone_temperature_sd = 2.0;
  double pm25_log_mean = 2.2;  // exp(2.2) ~ 9 ug/m3
  double pm25_log_sd = 0.35;
  double pm25_phi = 0.6;
  double zone_pm25_log_sd = 0.2;
  double cross_correlation = 0.3;
};

struct TruthSpec {
  UnivariateTruth f;
  UnivariateTruth g;
  /// h(T, A) = gamma * T * A.
  double gamma = 0.0;
  ExposureProcess process;
  int zones = 20;
  int first_year = 2015;
  int last_year = 2016;
  SeasonSpec season;
  WindowSpec temperature_window{ExposureKind::temperature_max, 1, Aggregator::mean};
  WindowSpec pm25_window{ExposureKind::pm25, 3, Aggregator::mean};
  std::uint64_t seed = 1;

  double log_odds(double t, double a) const { return f(t) + g(a) + gamma * t * a; }
  void validate() const;
};

struct Dataset {
  std::vector<Zone> zones;
  std::vector<ExposureSeries> temperature;
  std::vector<ExposureSeries> pm25;
  std::vector<Event> events;
};

/// Simulates zone exposure series, then for each subject picks a
/// month/weekday stratum and draws the case day with probability
/// proportional to exp(f + g + h) over the stratum's days.
Dataset generate(const TruthSpec& truth, int n_events);

/// Convenience: the matched sets the pipeline would build from `data`
/// (no trimming).
std::vector<MatchedSet> matched_sets(const Dataset& data, const TruthSpec& truth);

/// Writes grid geometry, gridded daily fields, zones, membership and events in
/// the pipeline input formats. The temperature cell nearest each zone and the
/// PM2.5 member cells carry that zone's simulated values exactly.
void write_inputs(const Dataset& data, const std::filesystem::path& dir);

/// Naive softmax over the rows of one set (row 0 the case), in extended
/// precision, without max-subtraction. Only meaningful for |x . beta| <= 30.
std::vector<long double> brute_force_set_probability(const Eigen::VectorXd& beta,
                                                     const Eigen::MatrixXd& set);

/// Sum over sets of log P(case), from brute_force_set_probability.
long double brute_force_log_likelihood(const Eigen::VectorXd& beta,
                                       std::span<const Eigen::MatrixXd> sets);

}  // namespace ccx::synth
