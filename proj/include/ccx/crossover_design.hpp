#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ccx/date.hpp"
#include "ccx/exposure_link.hpp"

namespace ccx {

struct Event {
  std::string subject_id;
  std::string zone_id;
  Date case_date;
};

struct DayRecord {
  Date date;
  bool is_case = false;
  double temperature = 0.0;
  double pm25_window = 0.0;
};

/// One stratum of the conditional likelihood: the case day and its referents.
struct MatchedSet {
  std::string subject_id;
  std::vector<DayRecord> rows;

  const DayRecord& case_row() const;
  std::size_t control_count() const { return rows.size() - 1; }
};

/// Reason codes written to the drop log.
enum class DropReason {
  out_of_season,
  subsequent_event,
  unknown_zone,
  missing_exposure,
  trimmed_case,
  no_controls_after_trim,
};

std::string to_string(DropReason r);

struct Drop {
  std::string subject_id;
  DropReason reason;
};

struct SeasonSpec {
  unsigned first_month = 6;
  unsigned last_month = 9;
  bool contains(unsigned month) const { return month >= first_month && month <= last_month; }
};

/// Keeps each subject's earliest event and drops events outside the season.
/// Input count == kept + drops.
struct Ingested {
  std::vector<Event> events;
  std::vector<Drop> drops;
};
Ingested ingest_events(std::span<const Event> events, const SeasonSpec& season);

/// Same month/year/weekday dates, case date excluded. Always 3 or 4 dates.
std::vector<Date> select_referents(Date case_date);

struct MatchResult {
  std::vector<MatchedSet> sets;
  std::vector<Drop> drops;
};

/// Joins events with windowed exposures. `temperature` and `pm25` are keyed
/// by zone_id.
MatchResult build_matched_sets(std::span<const Event> events,
                               const std::map<std::string, ExposureSeries>& temperature,
                               const std::map<std::string, ExposureSeries>& pm25,
                               const WindowSpec& temperature_window,
                               const WindowSpec& pm25_window);

struct TrimPolicy {
  double quantile = 0.95;
  /// Set by apply_trimming.
  double computed_threshold = 0.0;
  std::size_t pooled_rows = 0;
  std::size_t removed_rows = 0;
};

struct TrimResult {
  std::vector<MatchedSet> sets;
  TrimPolicy policy;
  std::vector<Drop> drops;
};

/// Pooled type-1 quantile of pm25_window over every row, then removal of rows
/// strictly above it. A set that loses its case row, or all its controls, is
/// discarded. Throws EmptyAnalysisError if nothing survives.
TrimResult apply_trimming(std::span<const MatchedSet> sets, TrimPolicy policy);

/// Asserts the MatchedSet invariants; throws InputError describing a violation.
void validate_matched_set(const MatchedSet& set, bool require_full_referents = true);

std::vector<Event> read_events(const std::filesystem::path& path);
void write_matched_sets(const std::filesystem::path& path, std::span<const MatchedSet> sets);
std::vector<MatchedSet> read_matched_sets(const std::filesystem::path& path);
void write_drop_log(const std::filesystem::path& path, std::span<const Drop> drops);

}  // namespace ccx
