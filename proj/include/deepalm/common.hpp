#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace deepalm {

enum class Errc {
  invalid_argument,
  parse_error,
  not_found,
  conflict,
  config_error,
};

/// Base error for everything this library throws. The code maps onto the
/// HTTP status used by the API (400 / 404 / 409).
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& message)
    : std::runtime_error(message), code_{code} {
  }

  Errc code() const noexcept {
    return code_;
  }

private:
  Errc code_;
};

/// Parse failure at a byte offset of the offending input.
class ParseError : public Error {
public:
  ParseError(std::size_t offset, const std::string& message)
    : Error(Errc::parse_error,
            message + " at offset " + std::to_string(offset)),
      offset_{offset} {
  }

  std::size_t offset() const noexcept {
    return offset_;
  }

private:
  std::size_t offset_;
};

using UtcTime = std::chrono::sys_time<std::chrono::milliseconds>;

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`, adding `.mmm` only when the
/// millisecond part is non-zero.
std::string format_rfc3339(UtcTime t);

/// Accepts `YYYY-MM-DDTHH:MM:SS[.frac](Z|+hh:mm|-hh:mm)`; the fraction is
/// truncated to milliseconds.
UtcTime parse_rfc3339(std::string_view text);

inline UtcTime from_unix_seconds(double s) {
  return UtcTime{std::chrono::milliseconds{
    static_cast<std::int64_t>(std::llround(s * 1000.0))}};
}

inline double to_unix_seconds(UtcTime t) {
  return static_cast<double>(t.time_since_epoch().count()) / 1000.0;
}

inline double seconds_between(UtcTime from, UtcTime to) {
  return static_cast<double>((to - from).count()) / 1000.0;
}

inline UtcTime add_seconds(UtcTime t, double s) {
  return t + std::chrono::milliseconds{
           static_cast<std::int64_t>(std::llround(s * 1000.0))};
}

enum class Severity { critical, major, minor, info };

std::string_view to_string(Severity s);
Severity severity_from_string(std::string_view s);

/// Lower number means more urgent.
inline int severity_rank(Severity s) {
  return static_cast<int>(s);
}

} // namespace deepalm
