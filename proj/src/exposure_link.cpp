#include "ccx/exposure_link.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "ccx/csv.hpp"
#include "ccx/error.hpp"

namespace ccx {
namespace {

constexpr double kEarthRadiusKm = 6371.0088;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

void check_coordinates(double lat, double lon, const std::string& id) {
  if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0 ||
      lon < -180.0 || lon > 180.0) {
    throw InputError("coordinates of '" + id + "' out of range");
  }
}

void check_grid(std::span<const GridCell> grid) {
  std::unordered_set<std::string> seen;
  for (const auto& c : grid) {
    check_coordinates(c.lat, c.lon, c.cell_id);
    if (!seen.insert(c.cell_id).second) {
      throw InputError("duplicate cell_id '" + c.cell_id + "' in grid");
    }
  }
}

}  // namespace

std::string to_string(ExposureKind kind) {
  return kind == ExposureKind::temperature_max ? "temperature_max" : "pm25";
}

ExposureKind exposure_kind_from_string(const std::string& s) {
  if (s == "temperature_max") return ExposureKind::temperature_max;
  if (s == "pm25") return ExposureKind::pm25;
  throw InputError("unknown exposure kind '" + s + "'");
}

void DailyField::set(const std::string& cell_id, Date date, double value) {
  if (!std::isfinite(value)) {
    throw InputError("non-finite field value for cell '" + cell_id + "' on " + date.iso());
  }
  auto [it, inserted] = cells_[cell_id].emplace(date, value);
  if (!inserted) {
    throw InputError("duplicate field value for cell '" + cell_id + "' on " + date.iso());
  }
}

const double* DailyField::find(const std::string& cell_id, Date date) const {
  const auto c = cells_.find(cell_id);
  if (c == cells_.end()) return nullptr;
  const auto d = c->second.find(date);
  return d == c->second.end() ? nullptr : &d->second;
}

std::vector<Date> DailyField::dates() const {
  std::set<Date> all;
  for (const auto& [id, values] : cells_) {
    for (const auto& [date, v] : values) all.insert(date);
  }
  return {all.begin(), all.end()};
}

std::size_t DailyField::size() const {
  std::size_t n = 0;
  for (const auto& [id, values] : cells_) n += values.size();
  return n;
}

double great_circle_km(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = lat1 * kDegToRad;
  const double p2 = lat2 * kDegToRad;
  const double dp = (lat2 - lat1) * kDegToRad;
  const double dl = (lon2 - lon1) * kDegToRad;
  const double s = std::sin(dp / 2.0);
  const double t = std::sin(dl / 2.0);
  const double h = std::min(1.0, s * s + std::cos(p1) * std::cos(p2) * t * t);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

namespace {

// Latitude-sorted view of a grid. The meridional separation R*|dlat| is a lower
// bound on great-circle distance, so a scan outward from the query latitude can
// stop once that bound exceeds the best distance found.
class LatitudeIndex {
 public:
  explicit LatitudeIndex(std::span<const GridCell> grid) : grid_(grid), order_(grid.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::sort(order_.begin(), order_.end(),
              [&](std::size_t a, std::size_t b) { return grid_[a].lat < grid_[b].lat; });
  }

  std::size_t nearest(double lat, double lon) const {
    const auto start = std::lower_bound(order_.begin(), order_.end(), lat,
                                        [&](std::size_t i, double v) { return grid_[i].lat < v; }) -
                       order_.begin();
    std::size_t best = grid_.size();
    double best_d = INFINITY;
    auto consider = [&](std::size_t idx) {
      const double d = great_circle_km(lat, lon, grid_[idx].lat, grid_[idx].lon);
      if (d < best_d || (d == best_d && grid_[idx].cell_id < grid_[best].cell_id)) {
        best = idx;
        best_d = d;
      }
    };
    auto bound = [&](std::size_t idx) {
      return kEarthRadiusKm * std::abs(grid_[idx].lat - lat) * kDegToRad * (1.0 - 1e-12);
    };
    std::ptrdiff_t up = start;
    std::ptrdiff_t down = start - 1;
    const auto n = static_cast<std::ptrdiff_t>(order_.size());
    while (up < n || down >= 0) {
      bool progressed = false;
      if (up < n && bound(order_[up]) <= best_d) {
        consider(order_[up++]);
        progressed = true;
      }
      if (down >= 0 && bound(order_[down]) <= best_d) {
        consider(order_[down--]);
        progressed = true;
      }
      if (!progressed) break;
    }
    return best;
  }

 private:
  std::span<const GridCell> grid_;
  std::vector<std::size_t> order_;
};

}  // namespace

std::size_t nearest_cell(std::span<const GridCell> grid, double lat, double lon) {
  if (grid.empty()) throw InputError("empty grid: no cells to assign");
  return LatitudeIndex(grid).nearest(lat, lon);
}

std::vector<ExposureSeries> link_temperature(std::span<const GridCell> grid,
                                             std::span<const Zone> zones,
                                             const DailyField& daily_field) {
  if (grid.empty()) throw InputError("empty grid: no cells to assign");
  check_grid(grid);
  const LatitudeIndex index(grid);
  const auto dates = daily_field.dates();

  std::vector<ExposureSeries> out;
  out.reserve(zones.size());
  for (const auto& zone : zones) {
    check_coordinates(zone.lat, zone.lon, zone.zone_id);
    const auto& cell = grid[index.nearest(zone.lat, zone.lon)];
    ExposureSeries s{zone.zone_id, ExposureKind::temperature_max, {}};
    for (const Date d : dates) {
      const double* v = daily_field.find(cell.cell_id, d);
      s.values.emplace(d, v ? std::optional<double>(*v) : std::nullopt);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Pm25Linkage link_pm25(std::span<const GridCell> grid, std::span<const Zone> zones,
                      const DailyField& daily_field) {
  std::unordered_set<std::string> known;
  if (!grid.empty()) {
    check_grid(grid);
    for (const auto& c : grid) known.insert(c.cell_id);
  }
  const auto dates = daily_field.dates();

  Pm25Linkage out;
  for (const auto& zone : zones) {
    if (zone.member_cells.empty()) {
      out.excluded_zones.push_back(zone.zone_id);
      continue;
    }
    // Sorted membership makes the summation order, and so the result bits,
    // independent of how the membership file was ordered.
    std::vector<std::string> members = zone.member_cells;
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (!known.empty()) {
      for (const auto& m : members) {
        if (!known.count(m)) {
          throw InputError("zone '" + zone.zone_id + "' references unknown cell '" + m + "'");
        }
      }
    }
    ExposureSeries s{zone.zone_id, ExposureKind::pm25, {}};
    for (const Date d : dates) {
      double sum = 0.0;
      int n = 0;
      for (const auto& m : members) {
        if (const double* v = daily_field.find(m, d)) {
          sum += *v;
          ++n;
        }
      }
      s.values.emplace(d, n > 0 ? std::optional<double>(sum / n) : std::nullopt);
    }
    out.series.push_back(std::move(s));
  }
  return out;
}

double windowed_exposure(const ExposureSeries& series, Date date, const WindowSpec& spec) {
  if (spec.window_days < 1) throw InputError("window_days must be >= 1");
  double sum = 0.0;
  double best = -INFINITY;
  for (int k = spec.window_days - 1; k >= 0; --k) {
    const Date d = date.plus_days(-k);
    const auto it = series.values.find(d);
    if (it == series.values.end() || !it->second) {
      throw MissingDataError("zone '" + series.zone_id + "' has no " + to_string(series.kind) +
                                 " value on " + d.iso(),
                             d.iso());
    }
    sum += *it->second;
    best = std::max(best, *it->second);
  }
  return spec.aggregator == Aggregator::mean ? sum / spec.window_days : best;
}

std::vector<GridCell> read_grid(const std::filesystem::path& path) {
  const auto t = csv::Table::read(path);
  const auto id = t.column("cell_id"), lat = t.column("lat"), lon = t.column("lon");
  std::vector<GridCell> grid;
  grid.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    grid.push_back({t.at(r, id), t.number(r, lat), t.number(r, lon)});
  }
  check_grid(grid);
  return grid;
}

std::vector<Zone> read_zones(const std::filesystem::path& zones_path,
                             const std::optional<std::filesystem::path>& membership_path) {
  const auto t = csv::Table::read(zones_path);
  const auto id = t.column("zone_id"), lat = t.column("lat"), lon = t.column("lon");
  std::vector<Zone> zones;
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Zone z{t.at(r, id), t.number(r, lat), t.number(r, lon), {}};
    check_coordinates(z.lat, z.lon, z.zone_id);
    if (!where.emplace(z.zone_id, zones.size()).second) {
      throw InputError(t.source() + ": duplicate zone_id '" + z.zone_id + "'");
    }
    zones.push_back(std::move(z));
  }
  if (membership_path) {
    const auto m = csv::Table::read(*membership_path);
    const auto zc = m.column("zone_id"), cc = m.column("cell_id");
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto it = where.find(m.at(r, zc));
      if (it == where.end()) {
        throw InputError(m.source() + ": line " + std::to_string(m.line(r)) + ": unknown zone '" +
                         m.at(r, zc) + "'");
      }
      zones[it->second].member_cells.push_back(m.at(r, cc));
    }
  }
  return zones;
}

DailyField read_field(const std::filesystem::path& path) {
  const auto t = csv::Table::read(path);
  const auto id = t.column("cell_id"), date = t.column("date"), value = t.column("value");
  DailyField f;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double v = t.number(r, value);
    // Explicit NA rows leave the cell/date uncovered.
    if (std::isnan(v)) continue;
    f.set(t.at(r, id), Date::parse(t.at(r, date)), v);
  }
  return f;
}

void write_series(const std::filesystem::path& path, std::span<const ExposureSeries> series) {
  csv::Writer w(path, {"zone_id", "date", "exposure_kind", "value"});
  for (const auto& s : series) {
    for (const auto& [d, v] : s.values) {
      w.row(s.zone_id, d.iso(), to_string(s.kind), v ? *v : std::nan(""));
    }
  }
}

std::vector<ExposureSeries> read_series(const std::filesystem::path& path) {
  const auto t = csv::Table::read(path);
  const auto zc = t.column("zone_id"), dc = t.column("date"), kc = t.column("exposure_kind"),
             vc = t.column("value");
  std::vector<ExposureSeries> out;
  std::map<std::pair<std::string, ExposureKind>, std::size_t> where;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto kind = exposure_kind_from_string(t.at(r, kc));
    const auto key = std::make_pair(t.at(r, zc), kind);
    auto it = where.find(key);
    if (it == where.end()) {
      it = where.emplace(key, out.size()).first;
      out.push_back({key.first, kind, {}});
    }
    const double v = t.number(r, vc);
    if (!std::isnan(v) && kind == ExposureKind::pm25 && v < 0.0) {
      throw InputError(t.source() + ": line " + std::to_string(t.line(r)) + ": negative PM2.5");
    }
    const bool fresh = out[it->second]
                           .values.emplace(Date::parse(t.at(r, dc)),
                                           std::isnan(v) ? std::nullopt : std::optional<double>(v))
                           .second;
    if (!fresh) {
      throw InputError(t.source() + ": line " + std::to_string(t.line(r)) + ": duplicate date");
    }
  }
  return out;
}

}  // namespace ccx
