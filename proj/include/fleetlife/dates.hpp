#pragma once

#include <algorithm>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "fleetlife/errors.hpp"

namespace fleetlife {

// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
struct Date {
  int days = 0;

  friend auto operator<=>(const Date&, const Date&) = default;
};

namespace detail {

// Howard Hinnant's civil-from-days algorithms.
constexpr int days_from_civil(int y, int m, int d) noexcept {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
      static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int>(doe) - 719468;
}

constexpr void civil_from_days(int z, int& y, int& m, int& d) noexcept {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yr = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = yr + (m <= 2);
}

constexpr int days_in_month(int y, int m) noexcept {
  constexpr int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2) {
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return leap ? 29 : 28;
  }
  return lengths[m - 1];
}

}  // namespace detail

inline Date make_date(int year, int month, int day) {
  if (month < 1 || month > 12 || day < 1 ||
      day > detail::days_in_month(year, month)) {
    throw DomainError("invalid calendar date " + std::to_string(year) + "-" +
                      std::to_string(month) + "-" + std::to_string(day));
  }
  return Date{detail::days_from_civil(year, month, day)};
}

// Strict ISO-8601 YYYY-MM-DD.
inline Date parse_date(std::string_view s) {
  auto fail = [&] {
    throw ParseError("expected ISO date YYYY-MM-DD, got \"" + std::string(s) +
                     "\"");
  };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') fail();
  int y = 0, m = 0, d = 0;
  for (int i = 0; i < 4; ++i) {
    if (s[i] < '0' || s[i] > '9') fail();
    y = y * 10 + (s[i] - '0');
  }
  for (int i = 5; i < 7; ++i) {
    if (s[i] < '0' || s[i] > '9') fail();
    m = m * 10 + (s[i] - '0');
  }
  for (int i = 8; i < 10; ++i) {
    if (s[i] < '0' || s[i] > '9') fail();
    d = d * 10 + (s[i] - '0');
  }
  if (m < 1 || m > 12 || d < 1 || d > detail::days_in_month(y, m)) fail();
  return Date{detail::days_from_civil(y, m, d)};
}

inline std::string to_string(Date date) {
  int y = 0, m = 0, d = 0;
  detail::civil_from_days(date.days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

inline int days_between(Date from, Date to) { return to.days - from.days; }

inline Date add_days(Date date, int n) { return Date{date.days + n}; }

// Calendar month arithmetic; the day of month clamps to the target month.
inline Date add_months(Date date, int n) {
  int y = 0, m = 0, d = 0;
  detail::civil_from_days(date.days, y, m, d);
  const int total = (y * 12 + (m - 1)) + n;
  const int ny = (total >= 0 ? total : total - 11) / 12;
  const int nm = total - ny * 12 + 1;
  const int nd = std::min(d, detail::days_in_month(ny, nm));
  return Date{detail::days_from_civil(ny, nm, nd)};
}

}  // namespace fleetlife
