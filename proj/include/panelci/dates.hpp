#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "panelci/errors.hpp"

namespace panelci {

/// A UTC calendar day.
using Day = std::chrono::sys_days;

namespace detail {

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses `YYYY-MM-DD`, optionally followed by `Thh:mm[:ss[.fff]]` and a
/// `Z` or `+hh:mm` / `-hh:mm` offset. Timestamps are converted to UTC before
/// the day is taken. Returns false on malformed input.
inline bool try_parse_day(std::string_view text, Day& out) {
  using namespace std::chrono;
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return false;
  int y = 0, m = 0, d = 0;
  if (!detail::parse_int(text.substr(0, 4), y) || !detail::parse_int(text.substr(5, 2), m) ||
      !detail::parse_int(text.substr(8, 2), d))
    return false;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return false;
  Day result{ymd};
  if (text.size() == 10) {
    out = result;
    return true;
  }
  if (text[10] != 'T' && text[10] != ' ') return false;
  std::string_view rest = text.substr(11);
  if (rest.size() < 5 || rest[2] != ':') return false;
  int hh = 0, mm = 0, ss = 0;
  if (!detail::parse_int(rest.substr(0, 2), hh) || !detail::parse_int(rest.substr(3, 2), mm)) return false;
  rest.remove_prefix(5);
  if (!rest.empty() && rest[0] == ':') {
    if (rest.size() < 3 || !detail::parse_int(rest.substr(1, 2), ss)) return false;
    rest.remove_prefix(3);
    if (!rest.empty() && rest[0] == '.') {
      std::size_t k = 1;
      while (k < rest.size() && rest[k] >= '0' && rest[k] <= '9') ++k;
      rest.remove_prefix(k);
    }
  }
  if (hh > 23 || mm > 59 || ss > 60) return false;
  int offset_minutes = 0;
  if (rest == "Z" || rest.empty()) {
    offset_minutes = 0;
  } else if ((rest[0] == '+' || rest[0] == '-') && rest.size() == 6 && rest[3] == ':') {
    int oh = 0, om = 0;
    if (!detail::parse_int(rest.substr(1, 2), oh) || !detail::parse_int(rest.substr(4, 2), om)) return false;
    offset_minutes = (rest[0] == '+' ? 1 : -1) * (oh * 60 + om);
  } else {
    return false;
  }
  const auto local = sys_time<minutes>{result} + hours{hh} + minutes{mm};
  out = floor<days>(local - minutes{offset_minutes});
  return true;
}

inline Day parse_day(std::string_view text) {
  Day d;
  if (!try_parse_day(text, d)) throw ValidationError("unparseable date '" + std::string(text) + "'");
  return d;
}

inline std::string format_day(Day d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Inclusive range of days.
struct DateWindow {
  Day first;
  Day last;

  bool contains(Day d) const { return d >= first && d <= last; }
  std::size_t length() const { return static_cast<std::size_t>((last - first).count() + 1); }
};

}  // namespace panelci
