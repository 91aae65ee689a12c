#include "ccx/date.hpp"

#include <cstdio>

#include "ccx/error.hpp"

namespace ccx {

namespace chr = std::chrono;

Date::Date(int y, unsigned m, unsigned d) {
  const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) {
    throw InputError("invalid calendar date " + std::to_string(y) + "-" +
                     std::to_string(m) + "-" + std::to_string(d));
  }
  days_ = chr::sys_days{ymd};
}

Date Date::parse(std::string_view text) {
  auto digits = [&](std::size_t from, std::size_t n) {
    int v = 0;
    for (std::size_t i = from; i < from + n; ++i) {
      const char c = text[i];
      if (c < '0' || c > '9') {
        throw InputError("malformed ISO date '" + std::string(text) + "'");
      }
      v = v * 10 + (c - '0');
    }
    return v;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw InputError("malformed ISO date '" + std::string(text) + "'");
  }
  return Date(digits(0, 4), static_cast<unsigned>(digits(5, 2)),
              static_cast<unsigned>(digits(8, 2)));
}

std::string Date::iso() const {
  const chr::year_month_day ymd{days_};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::year() const { return static_cast<int>(chr::year_month_day{days_}.year()); }
unsigned Date::month() const {
  return static_cast<unsigned>(chr::year_month_day{days_}.month());
}
unsigned Date::day() const {
  return static_cast<unsigned>(chr::year_month_day{days_}.day());
}
unsigned Date::iso_weekday() const { return chr::weekday{days_}.iso_encoding(); }

}  // namespace ccx
