#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace ccx {

/// Proleptic Gregorian calendar day. Ordered and hashable through its day
/// count since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  explicit constexpr Date(std::chrono::sys_days days) : days_(days) {}
  Date(int year, unsigned month, unsigned day);

  /// Parses strict ISO-8601 `YYYY-MM-DD`; throws InputError otherwise.
  static Date parse(std::string_view text);

  std::string iso() const;

  int year() const;
  unsigned month() const;
  unsigned day() const;
  /// ISO-8601 weekday: Monday = 1 ... Sunday = 7.
  unsigned iso_weekday() const;

  long serial() const { return days_.time_since_epoch().count(); }
  std::chrono::sys_days sys() const { return days_; }

  Date plus_days(long n) const { return Date{days_ + std::chrono::days{n}}; }

  friend auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

struct DateHash {
  std::size_t operator()(const Date& d) const noexcept {
    return std::hash<long>{}(d.serial());
  }
};

}  // namespace ccx
