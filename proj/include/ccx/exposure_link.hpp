#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccx/date.hpp"

namespace ccx {

struct GridCell {
  std::string cell_id;
  double lat = 0.0;
  double lon = 0.0;
};

struct Zone {
  std::string zone_id;
  double lat = 0.0;
  double lon = 0.0;
  /// Cells whose centroids fall inside the zone (precomputed containment).
  std::vector<std::string> member_cells;
};

enum class ExposureKind { temperature_max, pm25 };

std::string to_string(ExposureKind kind);
ExposureKind exposure_kind_from_string(const std::string& s);

/// Daily values for one zone. A date mapped to nullopt is an explicit
/// missing-data marker; a date absent from the map is simply not covered.
struct ExposureSeries {
  std::string zone_id;
  ExposureKind kind = ExposureKind::temperature_max;
  std::map<Date, std::optional<double>> values;
};

/// Gridded daily field keyed by cell, then date.
class DailyField {
 public:
  void set(const std::string& cell_id, Date date, double value);
  const double* find(const std::string& cell_id, Date date) const;
  /// Union of all dates present in any cell, ascending.
  std::vector<Date> dates() const;
  bool has_cell(const std::string& cell_id) const { return cells_.count(cell_id) > 0; }
  std::size_t size() const;

 private:
  std::unordered_map<std::string, std::map<Date, double>> cells_;
};

enum class Aggregator { mean, max };

struct WindowSpec {
  ExposureKind kind = ExposureKind::temperature_max;
  /// 1 = same day; 3 = the day plus the two preceding days.
  int window_days = 1;
  Aggregator aggregator = Aggregator::mean;
};

/// Great-circle distance in km (haversine, mean Earth radius).
double great_circle_km(double lat1, double lon1, double lat2, double lon2);

/// Index into `grid` of the cell nearest to (lat, lon); exact ties go to the
/// lexicographically smallest cell_id.
std::size_t nearest_cell(std::span<const GridCell> grid, double lat, double lon);

/// Each zone takes the series of its nearest grid cell. The assignment is
/// computed once per zone; dates missing for that cell become missing markers.
std::vector<ExposureSeries> link_temperature(std::span<const GridCell> grid,
                                             std::span<const Zone> zones,
                                             const DailyField& daily_field);

struct Pm25Linkage {
  std::vector<ExposureSeries> series;
  /// Zones with no member cells; left out of `series`.
  std::vector<std::string> excluded_zones;
};

/// Zonal mean over member cells present on each date.
Pm25Linkage link_pm25(std::span<const GridCell> grid, std::span<const Zone> zones,
                      const DailyField& daily_field);

/// Aggregate over {date - window_days + 1, ..., date}. Throws
/// MissingDataError naming the first gap.
double windowed_exposure(const ExposureSeries& series, Date date, const WindowSpec& spec);

// File formats.
std::vector<GridCell> read_grid(const std::filesystem::path& path);
std::vector<Zone> read_zones(const std::filesystem::path& zones_path,
                             const std::optional<std::filesystem::path>& membership_path);
DailyField read_field(const std::filesystem::path& path);
void write_series(const std::filesystem::path& path, std::span<const ExposureSeries> series);
std::vector<ExposureSeries> read_series(const std::filesystem::path& path);

}  // namespace ccx
