#pragma once

// Hourly UTC time grid helpers. Timestamps are seconds since the Unix epoch.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "ppaval/common.hpp"

namespace ppaval::time {

using Timestamp = std::int64_t;

inline constexpr Timestamp kHour = 3600;
inline constexpr Timestamp kDay = 86400;

struct CivilDate {
  int year = 1970;
  int month = 1;
  int day = 1;
  auto operator<=>(const CivilDate&) const = default;
};

inline std::int64_t days_from_civil(const CivilDate& d) {
  using namespace std::chrono;
  const year_month_day ymd{year{d.year}, month{static_cast<unsigned>(d.month)},
                           day{static_cast<unsigned>(d.day)}};
  if (!ymd.ok()) throw DataError("invalid calendar date");
  return sys_days{ymd}.time_since_epoch().count();
}

inline CivilDate civil_from_days(std::int64_t days) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
          static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

inline std::int64_t day_number(Timestamp t) { return floor_div(t, kDay); }
inline CivilDate date_of(Timestamp t) { return civil_from_days(day_number(t)); }
inline int hour_of_day(Timestamp t) { return static_cast<int>((t - day_number(t) * kDay) / kHour); }

/// 0 = Monday ... 6 = Sunday.
inline int weekday(Timestamp t) {
  const std::int64_t d = day_number(t);  // 1970-01-01 was a Thursday
  return static_cast<int>(((d + 3) % 7 + 7) % 7);
}

inline Timestamp make_timestamp(int year, int month, int day, int hour = 0) {
  return days_from_civil({year, month, day}) * kDay + static_cast<Timestamp>(hour) * kHour;
}

/// Parses "YYYY-MM-DDTHH:MM[:SS][Z|+00:00]" (a space may replace the T).
inline Timestamp parse_iso8601(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char sep = 0;
  int consumed = 0;
  const int got = std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  if (got < 6 || (sep != 'T' && sep != ' ')) throw DataError("malformed timestamp '" + s + "'");
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < s.size() && s[pos] == ':') {
    int more = 0;
    if (std::sscanf(s.c_str() + pos, ":%2d%n", &sec, &more) != 1)
      throw DataError("malformed timestamp '" + s + "'");
    pos += static_cast<std::size_t>(more);
  }
  const std::string tail = s.substr(pos);
  if (!(tail.empty() || tail == "Z" || tail == "+00:00" || tail == "+0000"))
    throw DataError("timestamp '" + s + "' is not UTC");
  if (h > 23 || mi > 59 || sec > 59) throw DataError("malformed timestamp '" + s + "'");
  return days_from_civil({y, mo, d}) * kDay + h * kHour + mi * 60 + sec;
}

inline std::string format_iso8601(Timestamp t) {
  const CivilDate d = date_of(t);
  const Timestamp rem = t - day_number(t) * kDay;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", d.year, d.month, d.day,
                static_cast<int>(rem / 3600), static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
  return buf;
}

inline std::vector<Timestamp> hourly_grid(Timestamp start, int hours) {
  std::vector<Timestamp> out(static_cast<std::size_t>(hours));
  for (int h = 0; h < hours; ++h) out[static_cast<std::size_t>(h)] = start + h * kHour;
  return out;
}

inline bool is_leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }
inline int hours_in_year(int y) { return (is_leap_year(y) ? 366 : 365) * 24; }

}  // namespace ppaval::time
