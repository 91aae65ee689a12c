#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "doctest.h"

#include "ccx/crossover_design.hpp"
#include "ccx/error.hpp"
#include "ccx/quantile.hpp"

using namespace ccx;

namespace {

std::vector<std::string> isos(const std::vector<Date>& ds) {
  std::vector<std::string> out;
  for (const auto& d : ds) out.push_back(d.iso());
  return out;
}

ExposureSeries covered(const std::string& zone, ExposureKind kind, Date from, int days,
                       double base, double step) {
  ExposureSeries s{zone, kind, {}};
  for (int d = 0; d < days; ++d) s.values[from.plus_days(d)] = base + step * d;
  return s;
}

MatchedSet make_set(const std::string& id, Date case_date, std::vector<double> pm) {
  MatchedSet s{id, {}};
  std::vector<Date> dates = select_referents(case_date);
  dates.push_back(case_date);
  std::sort(dates.begin(), dates.end());
  for (std::size_t i = 0; i < dates.size() && i < pm.size(); ++i) {
    s.rows.push_back({dates[i], dates[i] == case_date, 30.0, pm[i]});
  }
  return s;
}

}  // namespace

TEST_CASE("referents share month, year and weekday") {
  CHECK(isos(select_referents(Date(2010, 7, 15))) ==
        std::vector<std::string>{"2010-07-01", "2010-07-08", "2010-07-22", "2010-07-29"});
  CHECK(isos(select_referents(Date(2009, 2, 1))) ==
        std::vector<std::string>{"2009-02-08", "2009-02-15", "2009-02-22"});
  const auto r = select_referents(Date(2012, 2, 29));
  CHECK(std::find(r.begin(), r.end(), Date(2012, 2, 29)) == r.end());
}

TEST_CASE("event ingestion keeps first events in season") {
  const std::vector<Event> events{
      {"s1", "z", Date(2012, 7, 20)},
      {"s1", "z", Date(2012, 7, 3)},
      {"s2", "z", Date(2012, 12, 1)},
      {"s3", "z", Date(2012, 6, 1)},
  };
  const auto in = ingest_events(events, SeasonSpec{});
  REQUIRE(in.events.size() == 2);
  CHECK(in.events.size() + in.drops.size() == events.size());
  CHECK(in.events[0].case_date == Date(2012, 7, 3));
  std::multiset<std::string> reasons;
  for (const auto& d : in.drops) reasons.insert(to_string(d.reason));
  CHECK(reasons.count(to_string(DropReason::subsequent_event)) == 1);
  CHECK(reasons.count(to_string(DropReason::out_of_season)) == 1);
}

TEST_CASE("a fully covered event yields one set with 3 or 4 controls") {
  const Date from(2012, 6, 1);
  std::map<std::string, ExposureSeries> t{{"z", covered("z", ExposureKind::temperature_max, from, 60, 20, 0.25)}};
  std::map<std::string, ExposureSeries> a{{"z", covered("z", ExposureKind::pm25, from, 60, 5, 0.5)}};
  const std::vector<Event> events{{"s", "z", Date(2012, 7, 12)}};
  const WindowSpec tw{ExposureKind::temperature_max, 1, Aggregator::mean};
  const WindowSpec aw{ExposureKind::pm25, 3, Aggregator::mean};
  const auto r = build_matched_sets(events, t, a, tw, aw);
  REQUIRE(r.sets.size() == 1);
  CHECK(r.drops.empty());
  const auto& s = r.sets[0];
  CHECK(s.rows.size() == 4);  // July 2012 has four Thursdays
  CHECK(s.case_row().date == Date(2012, 7, 12));
  CHECK_NOTHROW(validate_matched_set(s));
  CHECK(s.case_row().temperature == 20 + 0.25 * 41);
  CHECK(s.case_row().pm25_window == doctest::Approx(5 + 0.5 * 40).epsilon(1e-15));
}

TEST_CASE("events with gaps or unknown zones are dropped with a reason") {
  const Date from(2012, 6, 1);
  auto pm = covered("z", ExposureKind::pm25, from, 60, 5, 0.5);
  pm.values[Date(2012, 7, 11)] = std::nullopt;
  std::map<std::string, ExposureSeries> t{{"z", covered("z", ExposureKind::temperature_max, from, 60, 20, 0.25)}};
  std::map<std::string, ExposureSeries> a{{"z", pm}};
  const std::vector<Event> events{{"gap", "z", Date(2012, 7, 12)}, {"lost", "nowhere", Date(2012, 7, 12)}};
  const auto r = build_matched_sets(events, t, a, {ExposureKind::temperature_max, 1, Aggregator::mean},
                                    {ExposureKind::pm25, 3, Aggregator::mean});
  CHECK(r.sets.empty());
  REQUIRE(r.drops.size() == 2);
  std::map<std::string, DropReason> by_subject;
  for (const auto& d : r.drops) by_subject[d.subject_id] = d.reason;
  CHECK(by_subject.at("gap") == DropReason::missing_exposure);
  CHECK(by_subject.at("lost") == DropReason::unknown_zone);
}

TEST_CASE("matched sets agree with an independent re-join") {
  std::mt19937_64 rng(17);
  const Date from(2011, 5, 1);
  std::map<std::string, ExposureSeries> t, a;
  std::map<std::pair<std::string, long>, double> traw, araw;
  std::uniform_real_distribution<double> tv(18, 40), av(1, 30);
  std::bernoulli_distribution hole(0.01);
  for (int z = 0; z < 5; ++z) {
    const std::string id = "z" + std::to_string(z);
    ExposureSeries ts{id, ExposureKind::temperature_max, {}}, as{id, ExposureKind::pm25, {}};
    for (int d = 0; d < 160; ++d) {
      const Date day = from.plus_days(d);
      const double x = tv(rng), y = av(rng);
      ts.values[day] = x;
      traw[{id, day.serial()}] = x;
      if (hole(rng)) {
        as.values[day] = std::nullopt;
      } else {
        as.values[day] = y;
        araw[{id, day.serial()}] = y;
      }
    }
    t[id] = ts;
    a[id] = as;
  }
  std::vector<Event> events;
  std::uniform_int_distribution<int> zpick(0, 4), dpick(0, 121);
  for (int i = 0; i < 50; ++i) {
    events.push_back({"s" + std::to_string(i), "z" + std::to_string(zpick(rng)),
                      Date(2011, 6, 1).plus_days(dpick(rng))});
  }
  const WindowSpec tw{ExposureKind::temperature_max, 1, Aggregator::mean};
  const WindowSpec aw{ExposureKind::pm25, 3, Aggregator::mean};
  const auto r = build_matched_sets(events, t, a, tw, aw);
  CHECK(r.sets.size() + r.drops.size() == events.size());

  std::size_t expected_rows = 0, expected_sets = 0;
  std::map<std::string, const MatchedSet*> got;
  for (const auto& s : r.sets) got[s.subject_id] = &s;
  for (const auto& e : events) {
    std::vector<Date> days = select_referents(e.case_date);
    days.push_back(e.case_date);
    std::sort(days.begin(), days.end());
    bool ok = true;
    std::vector<std::pair<double, double>> vals;
    for (const auto& d : days) {
      double sum = 0.0;
      for (int k = 0; k < 3; ++k) {
        auto it = araw.find({e.zone_id, d.serial() - k});
        if (it == araw.end()) { ok = false; break; }
        sum += it->second;
      }
      if (!ok) break;
      vals.push_back({traw.at({e.zone_id, d.serial()}), sum / 3});
    }
    if (!ok) {
      CHECK(got.count(e.subject_id) == 0);
      continue;
    }
    ++expected_sets;
    expected_rows += days.size();
    REQUIRE(got.count(e.subject_id) == 1);
    const auto& s = *got.at(e.subject_id);
    REQUIRE(s.rows.size() == days.size());
    for (std::size_t i = 0; i < days.size(); ++i) {
      CHECK(s.rows[i].date == days[i]);
      CHECK(s.rows[i].is_case == (days[i] == e.case_date));
      CHECK(s.rows[i].temperature == vals[i].first);
      CHECK(s.rows[i].pm25_window == doctest::Approx(vals[i].second).epsilon(1e-14));
    }
  }
  std::size_t rows = 0;
  for (const auto& s : r.sets) rows += s.rows.size();
  CHECK(rows == expected_rows);
  CHECK(r.sets.size() == expected_sets);
}

TEST_CASE("trimming at the pooled type-1 quantile") {
  // 20 sets of 5 rows carrying the values 1..100.
  std::vector<MatchedSet> sets;
  double v = 1.0;
  for (int i = 0; i < 20; ++i) {
    MatchedSet s = make_set("s" + std::to_string(i), Date(2010, 7, 15), {});
    for (const auto& d : {1, 8, 15, 22, 29}) s.rows.push_back({Date(2010, 7, d), d == 15, 30.0, v++});
    sets.push_back(s);
  }
  const auto r = apply_trimming(sets, TrimPolicy{0.95});
  CHECK(r.policy.computed_threshold == 95.0);
  CHECK(r.policy.pooled_rows == 100);
  CHECK(r.policy.removed_rows == 5);
  for (const auto& s : r.sets) {
    for (const auto& row : s.rows) CHECK(row.pm25_window <= 95.0);
  }
  // Set 18 holds 91..95 and keeps everything; set 19 (96..100) loses its case.
  CHECK(r.sets.size() == 19);
  REQUIRE(r.drops.size() == 1);
  CHECK(r.drops[0].subject_id == "s19");
  CHECK(r.drops[0].reason == DropReason::trimmed_case);

  const auto all = apply_trimming(sets, TrimPolicy{1.0});
  CHECK(all.policy.removed_rows == 0);
  CHECK(all.sets.size() == sets.size());

  auto reversed = sets;
  std::reverse(reversed.begin(), reversed.end());
  for (auto& s : reversed) std::reverse(s.rows.begin(), s.rows.end());
  CHECK(apply_trimming(reversed, TrimPolicy{0.95}).policy.computed_threshold == 95.0);
  CHECK_THROWS_AS(apply_trimming(sets, TrimPolicy{0.0}), InputError);
}

TEST_CASE("a set whose only remaining control is trimmed is discarded") {
  MatchedSet s{"only", {{Date(2010, 7, 1), false, 30, 50.0}, {Date(2010, 7, 8), true, 30, 1.0}}};
  std::vector<MatchedSet> sets{s};
  for (int i = 0; i < 20; ++i) {
    sets.push_back({"k" + std::to_string(i),
                    {{Date(2010, 7, 1), false, 30, 2.0}, {Date(2010, 7, 8), true, 30, 2.0}}});
  }
  const auto r = apply_trimming(sets, TrimPolicy{0.95});
  CHECK(r.sets.size() == 20);
  REQUIRE(r.drops.size() == 1);
  CHECK(r.drops[0].reason == DropReason::no_controls_after_trim);

  std::vector<MatchedSet> doomed{{"d", {{Date(2010, 7, 1), false, 30, 1.0}, {Date(2010, 7, 8), true, 30, 9.0}}}};
  CHECK_THROWS_AS(apply_trimming(doomed, TrimPolicy{0.5}), EmptyAnalysisError);
}

TEST_CASE("trimming removes at most ceil((1-q)N)+1 rows") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> av(0, 50);
  std::vector<MatchedSet> sets;
  for (int i = 0; i < 300; ++i) {
    sets.push_back(make_set("s" + std::to_string(i), Date(2013, 8, 1).plus_days(i % 31),
                            {av(rng), av(rng), av(rng), av(rng), av(rng)}));
  }
  for (double q : {0.5, 0.9, 0.95, 0.99}) {
    const auto r = apply_trimming(sets, TrimPolicy{q});
    const double bound = std::ceil((1 - q) * r.policy.pooled_rows) + 1;
    CHECK(r.policy.removed_rows <= bound);
  }
}

TEST_CASE("matched-set validation catches broken invariants") {
  MatchedSet bad{"b", {{Date(2010, 7, 1), true, 30, 1}, {Date(2010, 7, 2), false, 30, 1}}};
  CHECK_THROWS_AS(validate_matched_set(bad, false), InputError);
  MatchedSet two_cases{"c", {{Date(2010, 7, 1), true, 30, 1}, {Date(2010, 7, 8), true, 30, 1}}};
  CHECK_THROWS_AS(validate_matched_set(two_cases, false), InputError);
}

TEST_CASE("matched sets round-trip through CSV") {
  const auto dir = std::filesystem::temp_directory_path() / "ccx_test_sets";
  std::filesystem::create_directories(dir);
  std::vector<MatchedSet> sets{make_set("a", Date(2010, 7, 15), {1.5, 2.25, 3.0 / 7.0, 4, 5}),
                               make_set("b", Date(2009, 2, 1), {0.1, 0.2, 0.3, 0.4})};
  write_matched_sets(dir / "sets.csv", sets);
  const auto back = read_matched_sets(dir / "sets.csv");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].subject_id == sets[i].subject_id);
    REQUIRE(back[i].rows.size() == sets[i].rows.size());
    for (std::size_t j = 0; j < sets[i].rows.size(); ++j) {
      CHECK(back[i].rows[j].date == sets[i].rows[j].date);
      CHECK(back[i].rows[j].is_case == sets[i].rows[j].is_case);
      CHECK(back[i].rows[j].pm25_window == sets[i].rows[j].pm25_window);
    }
  }
  std::filesystem::remove_all(dir);
}
