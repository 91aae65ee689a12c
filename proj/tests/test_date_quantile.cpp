#include <numeric>
#include <vector>

#include "doctest.h"

#include "ccx/date.hpp"
#include "ccx/error.hpp"
#include "ccx/quantile.hpp"

using namespace ccx;

TEST_CASE("ISO dates parse, print and know their weekday") {
  const Date d = Date::parse("2010-07-15");
  CHECK(d.iso() == "2010-07-15");
  CHECK(d.year() == 2010);
  CHECK(d.month() == 7u);
  CHECK(d.day() == 15u);
  CHECK(d.iso_weekday() == 4u);  // Thursday
  CHECK(Date::parse("2009-02-01").iso_weekday() == 7u);
  CHECK(d.plus_days(17).iso() == "2010-08-01");
  CHECK(Date::parse("2016-02-29").plus_days(1).iso() == "2016-03-01");
}

TEST_CASE("malformed dates are input errors") {
  CHECK_THROWS_AS(Date::parse("2010-7-15"), InputError);
  CHECK_THROWS_AS(Date::parse("2010-02-30"), InputError);
  CHECK_THROWS_AS(Date::parse("20100715xx"), InputError);
}

TEST_CASE("type-1 quantile is the order statistic at ceil(q N)") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(quantile_type1(v, 0.95) == 95.0);
  CHECK(quantile_type1(v, 0.5) == 50.0);
  CHECK(quantile_type1(v, 1.0) == 100.0);
  CHECK(quantile_type1(v, 0.001) == 1.0);
  CHECK(quantile_type1(v, 0.951) == 96.0);
  CHECK(quantile_rank(1000, 0.95) == 950u);
  CHECK(quantile_rank(3, 1.0 / 3.0) == 1u);
  CHECK(quantile_rank(100, 2.0 / 3.0) == 67u);

  std::vector<double> shuffled{5, 3, 9, 1, 7};
  CHECK(quantile_type1(shuffled, 0.5) == 5.0);
  CHECK_THROWS_AS(quantile_type1(shuffled, 0.0), InputError);
  CHECK_THROWS_AS(quantile_type1(std::vector<double>{}, 0.5), EmptyAnalysisError);
}
