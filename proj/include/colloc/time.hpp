#ifndef COLLOC_TIME_HPP
#define COLLOC_TIME_HPP

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "colloc/errors.hpp"

// Minimal UTC civil-time arithmetic. Timestamps are seconds since the Unix
// epoch; local time is a fixed minute offset (no tz database by design).

namespace colloc::timeutil {

constexpr std::int64_t kSecondsPerHour = 3600;
constexpr std::int64_t kSecondsPerDay = 86400;

// Floor division/modulo that stay correct for instants before the epoch.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}
constexpr std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
  return a - floor_div(a, b) * b;
}

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
// Howard Hinnant's algorithm, http://howardhinnant.github.io/date_algorithms.html
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  int year;
  unsigned month;
  unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), m, d};
}

constexpr bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Parses an ISO-8601 timestamp with second precision:
//   YYYY-MM-DDTHH:MM:SS[Z|+HH:MM|-HH:MM]
// 'T' may be a space; a missing designator means UTC. Fractional seconds are
// not accepted (the inputs are second-resolution by contract).
inline std::int64_t parse_iso8601(std::string_view s) {
  auto fail = [&]() -> std::int64_t {
    throw ValidationError("bad timestamp: '" + std::string(s) + "'");
  };
  auto num = [&](std::size_t pos, std::size_t len) -> int {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (i >= s.size() || !is_digit(s[i])) fail();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 19) fail();
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    fail();
  const int year = num(0, 4);
  const int month = num(5, 2);
  const int day = num(8, 2);
  const int hour = num(11, 2);
  const int minute = num(14, 2);
  const int second = num(17, 2);
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 ||
      minute > 59 || second > 60)
    fail();

  std::int64_t offset = 0;
  if (s.size() > 19) {
    const char c = s[19];
    if (c == 'Z') {
      if (s.size() != 20) fail();
    } else if (c == '+' || c == '-') {
      if (s.size() != 25 || s[22] != ':') fail();
      const int oh = num(20, 2);
      const int om = num(23, 2);
      offset = (oh * 60 + om) * 60;
      if (c == '-') offset = -offset;
    } else {
      fail();
    }
  }
  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month),
                                            static_cast<unsigned>(day));
  return days * kSecondsPerDay + hour * 3600 + minute * 60 + second - offset;
}

inline std::string format_iso8601(std::int64_t t) {
  const std::int64_t days = floor_div(t, kSecondsPerDay);
  const std::int64_t sod = floor_mod(t, kSecondsPerDay);
  const CivilDate d = civil_from_days(days);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", d.year,
                d.month, d.day, static_cast<int>(sod / 3600),
                static_cast<int>((sod / 60) % 60), static_cast<int>(sod % 60));
  return buf;
}

// Period start of the hour containing t.
constexpr std::int64_t floor_hour(std::int64_t t) {
  return floor_div(t, kSecondsPerHour) * kSecondsPerHour;
}

// Hour of day (0..23) at a fixed local offset in minutes.
constexpr int local_hour_of_day(std::int64_t t, int offset_minutes) {
  const std::int64_t local = t + static_cast<std::int64_t>(offset_minutes) * 60;
  return static_cast<int>(floor_mod(floor_div(local, kSecondsPerHour), 24));
}

// Local calendar day index (days since epoch in local time).
constexpr std::int64_t local_day_index(std::int64_t t, int offset_minutes) {
  const std::int64_t local = t + static_cast<std::int64_t>(offset_minutes) * 60;
  return floor_div(local, kSecondsPerDay);
}

// UTC instant at which the given local day starts.
constexpr std::int64_t day_start_utc(std::int64_t local_day, int offset_minutes) {
  return local_day * kSecondsPerDay -
         static_cast<std::int64_t>(offset_minutes) * 60;
}

// "YYYY-MM" month key in local time.
inline std::string local_month_key(std::int64_t t, int offset_minutes) {
  const CivilDate d = civil_from_days(local_day_index(t, offset_minutes));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%04d-%02u", d.year, d.month);
  return buf;
}

} // namespace colloc::timeutil

#endif
