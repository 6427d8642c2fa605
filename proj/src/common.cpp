#include "deepalm/common.hpp"

#include <array>
#include <cctype>
#include <cstdio>

namespace deepalm {

namespace {

int read_digits(std::string_view text, std::size_t& pos, int count) {
  int value = 0;
  for (int i = 0; i < count; ++i) {
    if (pos >= text.size()
        || !std::isdigit(static_cast<unsigned char>(text[pos])))
      throw ParseError(pos, "expected digit in timestamp");
    value = value * 10 + (text[pos] - '0');
    ++pos;
  }
  return value;
}

void expect_char(std::string_view text, std::size_t& pos, char c) {
  if (pos >= text.size() || text[pos] != c)
    throw ParseError(pos, std::string("expected '") + c + "' in timestamp");
  ++pos;
}

} // namespace

std::string format_rfc3339(UtcTime t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss tod{t - day};
  const auto ms = tod.subseconds().count();
  std::array<char, 40> buf{};
  if (ms == 0) {
    std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02uT%02d:%02d:%02dZ",
                  static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()),
                  static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()));
  } else {
    std::snprintf(buf.data(), buf.size(),
                  "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                  static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()),
                  static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()),
                  static_cast<int>(ms));
  }
  return buf.data();
}

UtcTime parse_rfc3339(std::string_view text) {
  using namespace std::chrono;
  std::size_t pos = 0;
  const int y = read_digits(text, pos, 4);
  expect_char(text, pos, '-');
  const int mo = read_digits(text, pos, 2);
  expect_char(text, pos, '-');
  const int d = read_digits(text, pos, 2);
  if (pos >= text.size() || (text[pos] != 'T' && text[pos] != 't'))
    throw ParseError(pos, "expected 'T' in timestamp");
  ++pos;
  const int hh = read_digits(text, pos, 2);
  expect_char(text, pos, ':');
  const int mm = read_digits(text, pos, 2);
  expect_char(text, pos, ':');
  const int ss = read_digits(text, pos, 2);
  int millis = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < text.size()
           && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      if (digits < 3)
        millis = millis * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0)
      throw ParseError(pos, "empty fraction in timestamp");
    for (int i = digits; i < 3; ++i)
      millis *= 10;
  }
  int offset_min = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    const int sign = text[pos] == '+' ? 1 : -1;
    ++pos;
    const int oh = read_digits(text, pos, 2);
    expect_char(text, pos, ':');
    const int om = read_digits(text, pos, 2);
    offset_min = sign * (oh * 60 + om);
  } else {
    throw ParseError(pos, "expected timezone designator");
  }
  if (pos != text.size())
    throw ParseError(pos, "trailing characters after timestamp");
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60)
    throw ParseError(0, "timestamp out of range");
  const auto tp = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss}
                  + milliseconds{millis} - minutes{offset_min};
  return time_point_cast<milliseconds>(tp);
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::critical:
      return "critical";
    case Severity::major:
      return "major";
    case Severity::minor:
      return "minor";
    case Severity::info:
      return "info";
  }
  return "info";
}

Severity severity_from_string(std::string_view s) {
  if (s == "critical")
    return Severity::critical;
  if (s == "major")
    return Severity::major;
  if (s == "minor")
    return Severity::minor;
  if (s == "info")
    return Severity::info;
  throw Error(Errc::invalid_argument,
              "unknown severity '" + std::string(s) + "'");
}

} // namespace deepalm
