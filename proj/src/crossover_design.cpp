#include "ccx/crossover_design.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ccx/csv.hpp"
#include "ccx/error.hpp"
#include "ccx/quantile.hpp"

namespace ccx {

const DayRecord& MatchedSet::case_row() const {
  for (const auto& r : rows) {
    if (r.is_case) return r;
  }
  throw InputError("matched set for '" + subject_id + "' has no case row");
}

std::string to_string(DropReason r) {
  switch (r) {
    case DropReason::out_of_season: return "out_of_season";
    case DropReason::subsequent_event: return "subsequent_event";
    case DropReason::unknown_zone: return "unknown_zone";
    case DropReason::missing_exposure: return "missing_exposure";
    case DropReason::trimmed_case: return "trimmed_case";
    case DropReason::no_controls_after_trim: return "no_controls_after_trim";
  }
  return "unknown";
}

Ingested ingest_events(std::span<const Event> events, const SeasonSpec& season) {
  // Earliest event per subject; ties on date keep the first listed.
  std::unordered_map<std::string, std::size_t> first;
  for (std::size_t i = 0; i < events.size(); ++i) {
    auto [it, fresh] = first.emplace(events[i].subject_id, i);
    if (!fresh && events[i].case_date < events[it->second].case_date) it->second = i;
  }
  Ingested out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (first.at(e.subject_id) != i) {
      out.drops.push_back({e.subject_id, DropReason::subsequent_event});
    } else if (!season.contains(e.case_date.month())) {
      out.drops.push_back({e.subject_id, DropReason::out_of_season});
    } else {
      out.events.push_back(e);
    }
  }
  return out;
}

std::vector<Date> select_referents(Date case_date) {
  std::vector<Date> out;
  const unsigned m = case_date.month();
  // Walk to the first same-weekday date of the month, then step by weeks.
  Date d = case_date.plus_days(-7L * ((case_date.day() - 1) / 7));
  for (; d.month() == m; d = d.plus_days(7)) {
    if (d != case_date) out.push_back(d);
  }
  return out;
}

MatchResult build_matched_sets(std::span<const Event> events,
                               const std::map<std::string, ExposureSeries>& temperature,
                               const std::map<std::string, ExposureSeries>& pm25,
                               const WindowSpec& temperature_window,
                               const WindowSpec& pm25_window) {
  MatchResult out;
  out.sets.reserve(events.size());
  for (const auto& e : events) {
    const auto t = temperature.find(e.zone_id);
    const auto a = pm25.find(e.zone_id);
    if (t == temperature.end() || a == pm25.end()) {
      out.drops.push_back({e.subject_id, DropReason::unknown_zone});
      continue;
    }
    std::vector<Date> days{e.case_date};
    const auto refs = select_referents(e.case_date);
    days.insert(days.end(), refs.begin(), refs.end());

    MatchedSet set{e.subject_id, {}};
    try {
      for (const Date d : days) {
        set.rows.push_back({d, d == e.case_date,
                            windowed_exposure(t->second, d, temperature_window),
                            windowed_exposure(a->second, d, pm25_window)});
      }
    } catch (const MissingDataError&) {
      out.drops.push_back({e.subject_id, DropReason::missing_exposure});
      continue;
    }
    std::sort(set.rows.begin(), set.rows.end(),
              [](const DayRecord& x, const DayRecord& y) { return x.date < y.date; });
    out.sets.push_back(std::move(set));
  }
  return out;
}

TrimResult apply_trimming(std::span<const MatchedSet> sets, TrimPolicy policy) {
  if (!(policy.quantile > 0.0 && policy.quantile <= 1.0)) {
    throw InputError("trim quantile must lie in (0, 1]");
  }
  if (sets.empty()) throw EmptyAnalysisError("no matched sets to trim");

  std::vector<double> pooled;
  for (const auto& s : sets) {
    for (const auto& r : s.rows) pooled.push_back(r.pm25_window);
  }
  policy.pooled_rows = pooled.size();
  policy.computed_threshold = quantile_type1(pooled, policy.quantile);
  policy.removed_rows = 0;

  TrimResult out;
  for (const auto& s : sets) {
    MatchedSet kept{s.subject_id, {}};
    bool case_removed = false;
    for (const auto& r : s.rows) {
      if (r.pm25_window > policy.computed_threshold) {
        ++policy.removed_rows;
        case_removed = case_removed || r.is_case;
      } else {
        kept.rows.push_back(r);
      }
    }
    if (case_removed) {
      out.drops.push_back({s.subject_id, DropReason::trimmed_case});
    } else if (kept.rows.size() < 2) {
      out.drops.push_back({s.subject_id, DropReason::no_controls_after_trim});
    } else {
      out.sets.push_back(std::move(kept));
    }
  }
  out.policy = policy;
  if (out.sets.empty()) {
    throw EmptyAnalysisError("every matched set was discarded by trimming at " +
                             csv::format(policy.computed_threshold));
  }
  return out;
}

void validate_matched_set(const MatchedSet& set, bool require_full_referents) {
  const auto fail = [&](const std::string& why) {
    throw InputError("matched set '" + set.subject_id + "': " + why);
  };
  const auto cases = std::count_if(set.rows.begin(), set.rows.end(),
                                   [](const DayRecord& r) { return r.is_case; });
  if (cases != 1) fail("expected exactly one case row");
  const Date c = set.case_row().date;
  for (std::size_t i = 0; i < set.rows.size(); ++i) {
    const auto& r = set.rows[i];
    if (r.date.year() != c.year() || r.date.month() != c.month() ||
        r.date.iso_weekday() != c.iso_weekday()) {
      fail("row " + r.date.iso() + " not in the case stratum");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (set.rows[j].date == r.date) fail("duplicate date " + r.date.iso());
    }
    if (!std::isfinite(r.temperature) || !std::isfinite(r.pm25_window)) {
      fail("non-finite exposure on " + r.date.iso());
    }
  }
  const std::size_t controls = set.control_count();
  if (controls < 1 || controls > 4) fail("control count out of range");
  if (require_full_referents && controls != select_referents(c).size()) {
    fail("referent days incomplete");
  }
}

std::vector<Event> read_events(const std::filesystem::path& path) {
  const auto t = csv::Table::read(path);
  const auto s = t.column("subject_id"), z = t.column("zone_id"), d = t.column("case_date");
  std::vector<Event> out;
  out.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    out.push_back({t.at(r, s), t.at(r, z), Date::parse(t.at(r, d))});
  }
  return out;
}

void write_matched_sets(const std::filesystem::path& path, std::span<const MatchedSet> sets) {
  csv::Writer w(path, {"subject_id", "date", "is_case", "temperature", "pm25_window"});
  for (const auto& s : sets) {
    for (const auto& r : s.rows) {
      w.row(s.subject_id, r.date.iso(), r.is_case, r.temperature, r.pm25_window);
    }
  }
}

std::vector<MatchedSet> read_matched_sets(const std::filesystem::path& path) {
  const auto t = csv::Table::read(path);
  const auto s = t.column("subject_id"), d = t.column("date"), c = t.column("is_case"),
             tc = t.column("temperature"), ac = t.column("pm25_window");
  std::vector<MatchedSet> out;
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto [it, fresh] = where.emplace(t.at(r, s), out.size());
    if (fresh) out.push_back({t.at(r, s), {}});
    out[it->second].rows.push_back(
        {Date::parse(t.at(r, d)), t.at(r, c) == "1", t.number(r, tc), t.number(r, ac)});
  }
  for (const auto& set : out) validate_matched_set(set, false);
  return out;
}

void write_drop_log(const std::filesystem::path& path, std::span<const Drop> drops) {
  csv::Writer w(path, {"subject_id", "reason"});
  for (const auto& d : drops) w.row(d.subject_id, to_string(d.reason));
}

}  // namespace ccx
