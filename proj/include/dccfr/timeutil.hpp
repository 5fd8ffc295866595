#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace dccfr {

using Timestamp = std::chrono::sys_seconds;

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  auto res = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return res.ec == std::errc{};
}

}  // namespace detail

/// Parses `YYYY-MM-DDTHH:MM[:SS](Z|+00:00)`. Only UTC is accepted.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
  if (!detail::parse_fixed_int(s, 0, 4, y) || s.size() < 16 || s[4] != '-' ||
      !detail::parse_fixed_int(s, 5, 2, mo) || s[7] != '-' ||
      !detail::parse_fixed_int(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') ||
      !detail::parse_fixed_int(s, 11, 2, hh) || s[13] != ':' ||
      !detail::parse_fixed_int(s, 14, 2, mm)) {
    return std::nullopt;
  }
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (!detail::parse_fixed_int(s, pos + 1, 2, ss)) return std::nullopt;
    pos += 3;
  }
  std::string_view zone = s.substr(pos);
  if (zone != "Z" && zone != "+00:00") return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;

  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss tod{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

/// Fractional hour of day in [0, 24).
inline double hour_of_day(Timestamp t) {
  using namespace std::chrono;
  const auto since_midnight = t - floor<days>(t);
  return static_cast<double>(since_midnight.count()) / 3600.0;
}

/// Zero-based day of year (Jan 1 = 0).
inline int day_of_year(Timestamp t) {
  using namespace std::chrono;
  const auto d = floor<days>(t);
  const year_month_day ymd{d};
  return static_cast<int>((d - sys_days{ymd.year() / January / 1}).count());
}

inline bool is_weekend(Timestamp t) {
  using namespace std::chrono;
  const weekday wd{floor<days>(t)};
  return wd == Saturday || wd == Sunday;
}

}  // namespace dccfr
