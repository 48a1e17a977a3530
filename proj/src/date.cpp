#include "subtyper/date.hpp"

#include <cstdio>

namespace subtyper {

Date::Date(int year, unsigned month, unsigned day)
    : ymd_(std::chrono::year(year), std::chrono::month(month), std::chrono::day(day)) {}

std::optional<Date> Date::parse(const std::string& iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
  int y = std::stoi(iso.substr(0, 4));
  unsigned m = unsigned(std::stoi(iso.substr(5, 2)));
  unsigned d = unsigned(std::stoi(iso.substr(8, 2)));
  Date out(y, m, d);
  if (!out.ymd_.ok()) return std::nullopt;
  return out;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

Date Date::plus_days(std::int64_t n) const {
  std::chrono::sys_days sd{ymd_};
  Date out;
  out.ymd_ = std::chrono::year_month_day(sd + std::chrono::days(n));
  return out;
}

}  // namespace subtyper
