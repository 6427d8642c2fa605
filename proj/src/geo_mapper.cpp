#include "deepalm/geo_mapper.hpp"

#include "deepalm/alert.hpp"

#include <algorithm>

namespace deepalm::geo {

GeoPoint locate_on_route(const fiber::FiberRoute& route, double distance_m) {
  const auto& w = route.waypoints;
  if (w.size() < 2)
    throw Error(Errc::invalid_argument, "route has fewer than two waypoints");
  if (!(distance_m >= 0.0 && distance_m <= route.length_m))
    throw Error(Errc::invalid_argument, "distance outside route");
  // First waypoint whose distance is >= the query.
  auto it = std::lower_bound(
    w.begin(), w.end(), distance_m,
    [](const fiber::Waypoint& p, double d) { return p.cumulative_fiber_m < d; });
  if (it == w.end())
    it = std::prev(w.end());
  if (it->cumulative_fiber_m == distance_m || it == w.begin())
    return {it->latitude_deg, it->longitude_deg};
  const auto& a = *std::prev(it);
  const auto& b = *it;
  const double f = (distance_m - a.cumulative_fiber_m)
                   / (b.cumulative_fiber_m - a.cumulative_fiber_m);
  return {a.latitude_deg + f * (b.latitude_deg - a.latitude_deg),
          a.longitude_deg + f * (b.longitude_deg - a.longitude_deg)};
}

GeoJsonExport route_to_geojson(std::span<const fiber::FiberRoute> routes,
                               std::span<const service::Alert> alerts) {
  using nlohmann::json;
  GeoJsonExport out;
  json features = json::array();
  for (const auto& r : routes) {
    json coords = json::array();
    for (const auto& p : r.waypoints)
      coords.push_back({p.longitude_deg, p.latitude_deg});
    features.push_back(
      {{"type", "Feature"},
       {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
       {"properties",
        {{"route_id", r.route_id}, {"length_m", r.length_m}}}});
  }
  for (const auto& a : alerts) {
    if (!a.is_active() || a.source_domain != service::Domain::fiber)
      continue;
    if (!a.position_m) {
      out.warnings.push_back("alert " + a.alert_id + " has no position");
      continue;
    }
    auto route = std::find_if(routes.begin(), routes.end(),
                              [&a](const fiber::FiberRoute& r) {
                                return r.route_id == a.route_or_device;
                              });
    if (route == routes.end()) {
      out.warnings.push_back("alert " + a.alert_id + " references unknown route '"
                             + a.route_or_device + "'");
      continue;
    }
    GeoPoint p;
    try {
      p = locate_on_route(*route, *a.position_m);
    } catch (const Error& e) {
      out.warnings.push_back("alert " + a.alert_id + ": " + e.what());
      continue;
    }
    features.push_back(
      {{"type", "Feature"},
       {"geometry",
        {{"type", "Point"},
         {"coordinates", {p.longitude_deg, p.latitude_deg}}}},
       {"properties",
        {{"alert_id", a.alert_id},
         {"severity", to_string(a.severity)},
         {"kind", a.kind},
         {"position_m", *a.position_m}}}});
  }
  out.document = {{"type", "FeatureCollection"}, {"features", features}};
  return out;
}

} // namespace deepalm::geo
