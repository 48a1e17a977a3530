#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace subtyper {

// Calendar date without time-of-day. Intervals are whole days.
class Date {
 public:
  Date() = default;
  Date(int year, unsigned month, unsigned day);

  // Parses strict ISO-8601 YYYY-MM-DD; rejects impossible dates (2015-02-30).
  static std::optional<Date> parse(const std::string& iso);

  std::string to_string() const;  // YYYY-MM-DD

  int year() const { return int(ymd_.year()); }
  unsigned month() const { return unsigned(ymd_.month()); }
  unsigned day() const { return unsigned(ymd_.day()); }

  // Days since the civil epoch 1970-01-01 (negative before).
  std::int64_t day_number() const {
    return std::chrono::sys_days(ymd_).time_since_epoch().count();
  }

  Date plus_days(std::int64_t n) const;

  friend std::int64_t operator-(const Date& a, const Date& b) {
    return a.day_number() - b.day_number();
  }
  friend bool operator==(const Date& a, const Date& b) { return a.ymd_ == b.ymd_; }
  friend std::strong_ordering operator<=>(const Date& a, const Date& b) {
    return a.day_number() <=> b.day_number();
  }

 private:
  std::chrono::year_month_day ymd_{std::chrono::year(1970), std::chrono::month(1),
                                   std::chrono::day(1)};
};

}  // namespace subtyper
