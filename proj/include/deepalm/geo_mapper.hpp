#pragma once

#include "deepalm/fiber_sim.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace deepalm::service {
struct Alert;
}

namespace deepalm::geo {

struct GeoPoint {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Position `distance_m` of fiber along the route, by linear interpolation
/// of latitude and longitude between the surrounding waypoints. A distance
/// that hits a waypoint returns that waypoint exactly.
GeoPoint locate_on_route(const fiber::FiberRoute& route, double distance_m);

struct GeoJsonExport {
  nlohmann::json document;
  /// One entry per alert that had a location but could not be placed.
  std::vector<std::string> warnings;
};

/// FeatureCollection with one LineString per route and one Point per
/// unresolved fiber alert.
GeoJsonExport route_to_geojson(std::span<const fiber::FiberRoute> routes,
                               std::span<const service::Alert> alerts);

} // namespace deepalm::geo
