#pragma once

// Fiber plant and OTDR instrument simulator. Traces are in one-way display
// dB: the backscatter line falls by the attenuation per km, a splice drops
// the line by its loss, and a reflective event adds a rectangular peak of
// (reflectance - backscatter coefficient) / 2 dB on top of the line just
// before it.

#include "deepalm/common.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deepalm::fiber {

inline constexpr double speed_of_light_m_per_s = 2.99792458e8;

enum class EventKind { connector, splice, bend, cut, sensor_trigger, fiber_end };

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

inline bool is_terminal(EventKind k) {
  return k == EventKind::cut || k == EventKind::fiber_end;
}

struct FiberEventSpec {
  double position_m = 0.0;
  EventKind kind = EventKind::splice;
  double loss_db = 0.0;
  /// Absent means non-reflective.
  std::optional<double> reflectance_db;

  friend bool operator==(const FiberEventSpec&, const FiberEventSpec&)
    = default;
};

struct Waypoint {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double cumulative_fiber_m = 0.0;

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

struct FiberRoute {
  std::string route_id;
  double length_m = 0.0;
  double attenuation_db_per_km = 0.2;
  double group_index = 1.468;
  std::vector<Waypoint> waypoints;
  /// Installed events. A `sensor_trigger` entry registers a passive sensor
  /// location; with zero loss it is invisible in the trace.
  std::vector<FiberEventSpec> baseline_events;

  /// Throws Errc::invalid_argument listing the first violation.
  void validate() const;
  /// All violations, empty when valid.
  std::vector<std::string> violations() const;
};

struct OtdrParams {
  double sample_spacing_m = 10.0;
  /// Also the dead-zone width of reflective events.
  double pulse_width_m = 20.0;
  double launch_level_db = 30.0;
  double backscatter_coeff_db = -73.0;
  double noise_std_db_linear_equiv = 0.05;
  double noise_floor_db = -25.0;
  std::optional<double> saturation_db; // launch_level_db + 5 when absent
  std::uint64_t seed = 1;

  double saturation() const noexcept {
    return saturation_db.value_or(launch_level_db + 5.0);
  }
  std::vector<std::string> violations() const;
  void validate() const;

  friend bool operator==(const OtdrParams&, const OtdrParams&) = default;
};

struct OtdrTrace {
  std::string route_id;
  UtcTime captured_at{};
  OtdrParams params;
  std::vector<double> samples;
  std::optional<std::vector<FiberEventSpec>> ground_truth;

  double position_of(std::size_t index) const noexcept {
    return static_cast<double>(index) * params.sample_spacing_m;
  }
  double span_m() const noexcept {
    return samples.empty() ? 0.0 : position_of(samples.size() - 1);
  }

  friend bool operator==(const OtdrTrace&, const OtdrTrace&) = default;
};

enum class IncidentKind {
  fiber_cut,
  fiber_bend,
  connector_degradation,
  sensor_trigger,
  device_overheat,
  login_burst,
};

std::string_view to_string(IncidentKind k);
IncidentKind incident_kind_from_string(std::string_view s);

inline bool is_fiber_incident(IncidentKind k) {
  return k == IncidentKind::fiber_cut || k == IncidentKind::fiber_bend
         || k == IncidentKind::connector_degradation
         || k == IncidentKind::sensor_trigger;
}

struct IncidentSpec {
  std::string incident_id;
  IncidentKind kind = IncidentKind::fiber_cut;
  /// route_id, device_id or log_source depending on `kind`.
  std::string target;
  std::optional<double> position_m;
  double magnitude = 0.0;
  UtcTime injected_at{};
};

/// Samples of an OTDR trace for the route. `events` must be sorted by
/// position, lie within the route and contain nothing past a terminal
/// event.
OtdrTrace synthesize_trace(const FiberRoute& route,
                           std::span<const FiberEventSpec> events,
                           const OtdrParams& params,
                           UtcTime captured_at = UtcTime{});

/// Distance resolution for a sampling interval: c * dt / (2 * n_g).
double sample_spacing_from_time(double sample_interval_s, double group_index);

/// Applies a fiber incident to `events` (the route's current event list)
/// and returns the updated, position-sorted list.
std::vector<FiberEventSpec> apply_incident(
  const FiberRoute& route, std::span<const FiberEventSpec> events,
  const IncidentSpec& incident);

inline std::vector<FiberEventSpec> apply_incident(const FiberRoute& route,
                                                  const IncidentSpec& incident) {
  return apply_incident(route, route.baseline_events, incident);
}

} // namespace deepalm::fiber
