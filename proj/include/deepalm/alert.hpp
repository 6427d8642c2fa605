#pragma once

#include "deepalm/common.hpp"
#include "deepalm/geo_mapper.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace deepalm::service {

enum class Domain { fiber, hardware, security };
enum class AlertStatus { open, acknowledged, resolved };
enum class AlertAction { acknowledge, resolve };

std::string_view to_string(Domain d);
Domain domain_from_string(std::string_view s);
std::string_view to_string(AlertStatus s);
AlertStatus status_from_string(std::string_view s);
AlertAction action_from_string(std::string_view s);

/// Unified operator-facing incident record.
struct Alert {
  std::string alert_id;
  Domain source_domain = Domain::fiber;
  /// Fault kind, maintenance flag, or rule/detector id.
  std::string kind;
  Severity severity = Severity::info;
  /// Route id, device id, or the security group key.
  std::string route_or_device;
  std::optional<double> position_m;
  std::optional<geo::GeoPoint> geo;
  std::string summary;
  /// What produced the alert: trace timestamp, telemetry time or log window.
  std::string evidence;
  AlertStatus status = AlertStatus::open;
  std::int64_t occurrence_count = 1;
  UtcTime created_at{};
  UtcTime updated_at{};
  std::set<std::string> tags;

  bool is_active() const noexcept {
    return status != AlertStatus::resolved;
  }

  friend bool operator==(const Alert&, const Alert&) = default;
};

/// Whether `action` is legal from `from`: open -> acknowledged -> resolved,
/// or open -> resolved.
bool transition_allowed(AlertStatus from, AlertAction action) noexcept;

/// 26-character Crockford base32 id: 48-bit millisecond timestamp followed
/// by 80 bits of entropy, so ids sort by creation time.
std::string make_ulid(UtcTime t, std::uint64_t entropy_hi,
                      std::uint64_t entropy_lo);

} // namespace deepalm::service
