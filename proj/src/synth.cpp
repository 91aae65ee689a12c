#include "ccx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "ccx/csv.hpp"
#include "ccx/error.hpp"

namespace ccx::synth {

double UnivariateTruth::operator()(double x) const {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::linear: return slope * (x - center);
    case Kind::quadratic: return slope * (x - center) + curvature * (x - center) * (x - center);
    case Kind::tabulated: {
      if (x <= xs.front()) return ys.front();
      if (x >= xs.back()) return ys.back();
      const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
      const double w = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
      return ys[hi - 1] + w * (ys[hi] - ys[hi - 1]);
    }
  }
  return 0.0;
}

UnivariateTruth UnivariateTruth::linear(double slope, double center) {
  UnivariateTruth u;
  u.kind = Kind::linear;
  u.slope = slope;
  u.center = center;
  return u;
}

UnivariateTruth UnivariateTruth::quadratic(double slope, double curvature, double center) {
  UnivariateTruth u = linear(slope, center);
  u.kind = Kind::quadratic;
  u.curvature = curvature;
  return u;
}

void TruthSpec::validate() const {
  if (!(process.cross_correlation > -1.0 && process.cross_correlation < 1.0)) {
    throw InputError("cross-correlation must lie in (-1, 1)");
  }
  if (std::abs(process.temperature_phi) >= 1.0 || std::abs(process.pm25_phi) >= 1.0) {
    throw InputError("AR(1) coefficients must lie in (-1, 1)");
  }
  if (zones < 1 || last_year < first_year) throw InputError("empty synthetic calendar");
  if (season.first_month < 1 || season.last_month > 12 || season.first_month > season.last_month) {
    throw InputError("invalid season months");
  }
  for (const auto* u : {&f, &g}) {
    if (u->kind == UnivariateTruth::Kind::tabulated &&
        (u->xs.size() < 2 || u->xs.size() != u->ys.size() ||
         !std::is_sorted(u->xs.begin(), u->xs.end()))) {
      throw InputError("tabulated truth needs >= 2 ascending knots with matching values");
    }
  }
}

namespace {

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    purpose};
  return std::mt19937_64(seq);
}

std::string zone_name(int z) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "Z%03d", z + 1);
  return buf;
}

Date month_end(int year, unsigned month) {
  return month == 12 ? Date(year, 12, 31) : Date(year, month + 1, 1).plus_days(-1);
}

}  // namespace

Dataset generate(const TruthSpec& truth, int n_events) {
  truth.validate();
  if (n_events < 0) throw InputError("negative event count");
  const auto& p = truth.process;
  Dataset data;

  // Zones scattered over the contiguous US, kept at least 0.2 degrees apart.
  auto geo = substream(truth.seed, 0, 7);
  std::uniform_real_distribution<double> lat_d(30.0, 45.0), lon_d(-120.0, -75.0);
  while (static_cast<int>(data.zones.size()) < truth.zones) {
    Zone z{zone_name(static_cast<int>(data.zones.size())), lat_d(geo), lon_d(geo), {}};
    const bool clear = std::all_of(data.zones.begin(), data.zones.end(), [&](const Zone& o) {
      return std::abs(o.lat - z.lat) + std::abs(o.lon - z.lon) > 0.2;
    });
    if (clear) data.zones.push_back(std::move(z));
  }

  const long lookback = std::max(truth.temperature_window.window_days,
                                 truth.pm25_window.window_days) + 7;
  for (int zi = 0; zi < truth.zones; ++zi) {
    auto rng = substream(truth.seed, static_cast<std::uint64_t>(zi), 1);
    std::normal_distribution<double> normal;
    const double t_offset = p.zone_temperature_sd * normal(rng);
    const double a_offset = p.zone_pm25_log_sd * normal(rng);
    ExposureSeries ts{data.zones[zi].zone_id, ExposureKind::temperature_max, {}};
    ExposureSeries as{data.zones[zi].zone_id, ExposureKind::pm25, {}};
    const double rho = p.cross_correlation;
    for (int y = truth.first_year; y <= truth.last_year; ++y) {
      const Date start = Date(y, truth.season.first_month, 1).plus_days(-lookback);
      const Date stop = month_end(y, truth.season.last_month);
      const Date mid = start.plus_days((stop.serial() - start.serial()) / 2);
      const double half_span = static_cast<double>(stop.serial() - start.serial()) / 2.0;
      double xt = normal(rng), xa = normal(rng);
      for (Date d = start; d <= stop; d = d.plus_days(1)) {
        const double e1 = normal(rng);
        const double e2 = rho * e1 + std::sqrt(1.0 - rho * rho) * normal(rng);
        xt = p.temperature_phi * xt + std::sqrt(1.0 - p.temperature_phi * p.temperature_phi) * e1;
        xa = p.pm25_phi * xa + std::sqrt(1.0 - p.pm25_phi * p.pm25_phi) * e2;
        const double phase = static_cast<double>(d.serial() - mid.serial()) / half_span;
        const double seasonal = p.temperature_seasonal_amplitude * std::cos(1.5707963267948966 * phase);
        ts.values.emplace(d, p.temperature_mean + t_offset + seasonal + p.temperature_sd * xt);
        as.values.emplace(d, std::exp(p.pm25_log_mean + a_offset + p.pm25_log_sd * xa));
      }
    }
    data.temperature.push_back(std::move(ts));
    data.pm25.push_back(std::move(as));
  }

  const int n_months = static_cast<int>(truth.season.last_month - truth.season.first_month) + 1;
  const int n_years = truth.last_year - truth.first_year + 1;
  data.events.reserve(static_cast<std::size_t>(n_events));
  for (int i = 0; i < n_events; ++i) {
    auto rng = substream(truth.seed, static_cast<std::uint64_t>(i), 2);
    std::uniform_int_distribution<int> zone_d(0, truth.zones - 1), year_d(0, n_years - 1),
        month_d(0, n_months - 1), first_d(1, 7);
    const int zi = zone_d(rng);
    const int year = truth.first_year + year_d(rng);
    const unsigned month = truth.season.first_month + static_cast<unsigned>(month_d(rng));
    // Stratum: every date in the month sharing the weekday of `first`.
    const Date first(year, month, static_cast<unsigned>(first_d(rng)));
    std::vector<Date> stratum;
    for (Date d = first; d.month() == month; d = d.plus_days(7)) stratum.push_back(d);

    std::vector<double> eta(stratum.size());
    for (std::size_t k = 0; k < stratum.size(); ++k) {
      eta[k] = truth.log_odds(windowed_exposure(data.temperature[zi], stratum[k], truth.temperature_window),
                              windowed_exposure(data.pm25[zi], stratum[k], truth.pm25_window));
    }
    const double m = *std::max_element(eta.begin(), eta.end());
    std::vector<double> w(eta.size());
    for (std::size_t k = 0; k < eta.size(); ++k) w[k] = std::exp(eta[k] - m);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    char id[24];
    std::snprintf(id, sizeof id, "S%07d", i + 1);
    data.events.push_back({id, data.zones[zi].zone_id, stratum[pick(rng)]});
  }
  return data;
}

std::vector<MatchedSet> matched_sets(const Dataset& data, const TruthSpec& truth) {
  std::map<std::string, ExposureSeries> t, a;
  for (const auto& s : data.temperature) t.emplace(s.zone_id, s);
  for (const auto& s : data.pm25) a.emplace(s.zone_id, s);
  auto result = build_matched_sets(data.events, t, a, truth.temperature_window, truth.pm25_window);
  return std::move(result.sets);
}

void write_inputs(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    csv::Writer zones(dir / "zones.csv", {"zone_id", "lat", "lon"});
    for (const auto& z : data.zones) zones.row(z.zone_id, z.lat, z.lon);
  }
  {
    // One temperature cell just off each zone centroid, plus a coarse decoy
    // lattice far enough away never to be nearest.
    csv::Writer grid(dir / "temperature_grid.csv", {"cell_id", "lat", "lon"});
    csv::Writer field(dir / "temperature_field.csv", {"cell_id", "date", "value"});
    for (std::size_t i = 0; i < data.zones.size(); ++i) {
      const auto& z = data.zones[i];
      const std::string cell = "T_" + z.zone_id;
      grid.row(cell, z.lat + 0.01, z.lon - 0.01);
      for (const auto& [d, v] : data.temperature[i].values) field.row(cell, d.iso(), *v);
    }
    for (int la = 25; la <= 50; la += 5) {
      for (int lo = -125; lo <= -70; lo += 5) {
        const double lat = la + 0.5, lon = lo + 0.5;
        const bool far = std::all_of(data.zones.begin(), data.zones.end(), [&](const Zone& z) {
          return great_circle_km(z.lat, z.lon, lat, lon) > 20.0;
        });
        if (far) grid.row("D_" + std::to_string(la) + "_" + std::to_string(-lo), lat, lon);
      }
    }
  }
  {
    csv::Writer grid(dir / "pm25_grid.csv", {"cell_id", "lat", "lon"});
    csv::Writer field(dir / "pm25_field.csv", {"cell_id", "date", "value"});
    csv::Writer member(dir / "membership.csv", {"zone_id", "cell_id"});
    for (std::size_t i = 0; i < data.zones.size(); ++i) {
      const auto& z = data.zones[i];
      for (int k = 0; k < 2; ++k) {
        const std::string cell = "P_" + z.zone_id + "_" + std::to_string(k);
        grid.row(cell, z.lat + 0.005 * k, z.lon + 0.005 * k);
        member.row(z.zone_id, cell);
        // Two identical member values: (v + v) / 2 reproduces v bit for bit.
        for (const auto& [d, v] : data.pm25[i].values) field.row(cell, d.iso(), *v);
      }
    }
  }
  {
    csv::Writer events(dir / "events.csv", {"subject_id", "zone_id", "case_date"});
    for (const auto& e : data.events) events.row(e.subject_id, e.zone_id, e.case_date.iso());
  }
}

std::vector<long double> brute_force_set_probability(const Eigen::VectorXd& beta,
                                                     const Eigen::MatrixXd& set) {
  std::vector<long double> e(static_cast<std::size_t>(set.rows()));
  long double total = 0.0L;
  for (Eigen::Index j = 0; j < set.rows(); ++j) {
    long double dot = 0.0L;
    for (Eigen::Index k = 0; k < set.cols(); ++k) {
      dot += static_cast<long double>(set(j, k)) * static_cast<long double>(beta[k]);
    }
    e[static_cast<std::size_t>(j)] = std::exp(dot);
    total += e[static_cast<std::size_t>(j)];
  }
  for (auto& v : e) v /= total;
  return e;
}

long double brute_force_log_likelihood(const Eigen::VectorXd& beta,
                                       std::span<const Eigen::MatrixXd> sets) {
  long double ll = 0.0L;
  for (const auto& s : sets) {
    const auto prob = brute_force_set_probability(beta, s);
    // log p_case taken as log1p(-(sum of control probabilities)) when the
    // case dominates, so tiny log-probabilities keep their relative accuracy.
    long double others = 0.0L;
    for (std::size_t j = 1; j < prob.size(); ++j) others += prob[j];
    ll += prob[0] > 0.5L ? std::log1p(-others) : std::log(prob[0]);
  }
  return ll;
}

}  // namespace ccx::synth
