#include "deepalm/alert.hpp"

#include <array>

namespace deepalm::service {

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::fiber:
      return "fiber";
    case Domain::hardware:
      return "hardware";
    case Domain::security:
      return "security";
  }
  return "fiber";
}

Domain domain_from_string(std::string_view s) {
  for (auto d : {Domain::fiber, Domain::hardware, Domain::security})
    if (to_string(d) == s)
      return d;
  throw Error(Errc::invalid_argument, "unknown domain '" + std::string(s) + "'");
}

std::string_view to_string(AlertStatus s) {
  switch (s) {
    case AlertStatus::open:
      return "open";
    case AlertStatus::acknowledged:
      return "acknowledged";
    case AlertStatus::resolved:
      return "resolved";
  }
  return "open";
}

AlertStatus status_from_string(std::string_view s) {
  for (auto v :
       {AlertStatus::open, AlertStatus::acknowledged, AlertStatus::resolved})
    if (to_string(v) == s)
      return v;
  throw Error(Errc::invalid_argument, "unknown status '" + std::string(s) + "'");
}

AlertAction action_from_string(std::string_view s) {
  if (s == "acknowledge")
    return AlertAction::acknowledge;
  if (s == "resolve")
    return AlertAction::resolve;
  throw Error(Errc::invalid_argument, "unknown action '" + std::string(s) + "'");
}

bool transition_allowed(AlertStatus from, AlertAction action) noexcept {
  switch (action) {
    case AlertAction::acknowledge:
      return from == AlertStatus::open;
    case AlertAction::resolve:
      return from == AlertStatus::open || from == AlertStatus::acknowledged;
  }
  return false;
}

std::string make_ulid(UtcTime t, std::uint64_t entropy_hi,
                      std::uint64_t entropy_lo) {
  static constexpr std::string_view alphabet =
    "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
  const auto ms = static_cast<std::uint64_t>(t.time_since_epoch().count())
                  & 0xFFFFFFFFFFFFull;
  // 128 bits: 48 time | 16 high entropy | 64 low entropy.
  const std::uint64_t hi = (ms << 16) | (entropy_hi & 0xFFFF);
  const std::uint64_t lo = entropy_lo;
  std::string out(26, '0');
  // 26 chars * 5 bits = 130 bits; the top two bits are zero.
  for (int i = 25; i >= 0; --i) {
    const int bit = (25 - i) * 5; // bit offset from the least significant end
    std::uint64_t v;
    if (bit + 5 <= 64) {
      v = lo >> bit;
    } else if (bit >= 64) {
      v = bit - 64 < 64 ? hi >> (bit - 64) : 0;
    } else {
      v = (lo >> bit) | (hi << (64 - bit));
    }
    out[static_cast<std::size_t>(i)] = alphabet[v & 31];
  }
  return out;
}

} // namespace deepalm::service
