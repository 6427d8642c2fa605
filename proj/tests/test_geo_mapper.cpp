#include "deepalm/alert.hpp"
#include "deepalm/geo_mapper.hpp"
#include "deepalm/rng.hpp"

#include <doctest.h>

using namespace deepalm;

namespace {

fiber::FiberRoute two_point() {
  return {"poz-ber", 280000, 0.2, 1.468,
          {{52.4064, 16.9252, 0}, {52.5200, 13.4050, 280000}}, {}};
}

fiber::FiberRoute bent() {
  return {"bent", 30000, 0.2, 1.468,
          {{52.0, 13.0, 0}, {52.1, 13.2, 10000}, {52.3, 13.1, 25000}, {52.35, 13.0, 30000}},
          {}};
}

service::Alert fiber_alert(std::string id, std::string route, std::optional<double> pos) {
  service::Alert a;
  a.alert_id = std::move(id);
  a.source_domain = service::Domain::fiber;
  a.kind = "fiber_cut";
  a.severity = Severity::critical;
  a.route_or_device = std::move(route);
  a.position_m = pos;
  return a;
}

} // namespace

TEST_CASE("midpoint of a two-waypoint route") {
  const auto p = geo::locate_on_route(two_point(), 140000);
  CHECK(p.latitude_deg == doctest::Approx(52.4632).epsilon(1e-6));
  CHECK(p.longitude_deg == doctest::Approx(15.1651).epsilon(1e-6));
}

TEST_CASE("waypoints are returned exactly") {
  const auto r = bent();
  for (const auto& w : r.waypoints) {
    const auto p = geo::locate_on_route(r, w.cumulative_fiber_m);
    CHECK(p.latitude_deg == w.latitude_deg);
    CHECK(p.longitude_deg == w.longitude_deg);
  }
}

TEST_CASE("out-of-range distances are rejected") {
  CHECK_THROWS_AS(geo::locate_on_route(bent(), -1), Error);
  CHECK_THROWS_AS(geo::locate_on_route(bent(), 30000.5), Error);
  auto r = bent();
  r.waypoints.resize(1);
  CHECK_THROWS_AS(geo::locate_on_route(r, 0), Error);
}

TEST_CASE("interpolation is continuous and stays on its segment") {
  const auto r = bent();
  Xorshift64Star rng{3};
  for (int i = 0; i < 2000; ++i) {
    const double d = rng.uniform() * r.length_m;
    const auto p = geo::locate_on_route(r, d);
    const auto q = geo::locate_on_route(r, std::min(r.length_m, d + 0.01));
    CHECK(std::abs(p.latitude_deg - q.latitude_deg) < 1e-6);
    CHECK(std::abs(p.longitude_deg - q.longitude_deg) < 1e-6);
    std::size_t seg = 1;
    while (r.waypoints[seg].cumulative_fiber_m < d)
      ++seg;
    const auto& a = r.waypoints[seg - 1];
    const auto& b = r.waypoints[seg];
    CHECK(p.latitude_deg >= std::min(a.latitude_deg, b.latitude_deg) - 1e-12);
    CHECK(p.latitude_deg <= std::max(a.latitude_deg, b.latitude_deg) + 1e-12);
    CHECK(p.longitude_deg >= std::min(a.longitude_deg, b.longitude_deg) - 1e-12);
    CHECK(p.longitude_deg <= std::max(a.longitude_deg, b.longitude_deg) + 1e-12);
  }
}

TEST_CASE("geojson: one line per route, one point per active fiber alert") {
  const std::vector<fiber::FiberRoute> routes{two_point(), bent()};
  std::vector<service::Alert> alerts{fiber_alert("a1", "poz-ber", 140000)};
  auto out = geo::route_to_geojson(routes, alerts);
  const auto& doc = out.document;
  CHECK(doc["type"] == "FeatureCollection");
  REQUIRE(doc["features"].size() == 3);
  CHECK(doc["features"][0]["geometry"]["type"] == "LineString");
  CHECK(doc["features"][0]["geometry"]["coordinates"].size() == 2);
  CHECK(doc["features"][1]["geometry"]["coordinates"].size() == 4);
  const auto& pt = doc["features"][2];
  CHECK(pt["geometry"]["type"] == "Point");
  CHECK(pt["geometry"]["coordinates"][0].get<double>() == doctest::Approx(15.1651).epsilon(1e-6));
  CHECK(pt["geometry"]["coordinates"][1].get<double>() == doctest::Approx(52.4632).epsilon(1e-6));
  CHECK(pt["properties"]["alert_id"] == "a1");
  CHECK(out.warnings.empty());
  // [lon, lat] order on the line too.
  CHECK(doc["features"][0]["geometry"]["coordinates"][0][0] == 16.9252);
}

TEST_CASE("geojson skips resolved and non-fiber alerts and warns on bad locations") {
  const std::vector<fiber::FiberRoute> routes{bent()};
  auto resolved = fiber_alert("r", "bent", 100);
  resolved.status = service::AlertStatus::resolved;
  auto acked = fiber_alert("k", "bent", 100);
  acked.status = service::AlertStatus::acknowledged;
  auto hw = fiber_alert("h", "dev", std::nullopt);
  hw.source_domain = service::Domain::hardware;
  std::vector<service::Alert> alerts{resolved, acked, hw, fiber_alert("u", "nowhere", 5),
                                     fiber_alert("o", "bent", 99999),
                                     fiber_alert("n", "bent", std::nullopt)};
  auto out = geo::route_to_geojson(routes, alerts);
  CHECK(out.document["features"].size() == 2);
  CHECK(out.warnings.size() == 3);
}

TEST_CASE("geojson only uses the allowed geometry types") {
  const std::vector<fiber::FiberRoute> routes{two_point(), bent()};
  std::vector<service::Alert> alerts;
  Xorshift64Star rng{9};
  for (int i = 0; i < 50; ++i)
    alerts.push_back(fiber_alert("a" + std::to_string(i), i % 2 ? "bent" : "poz-ber",
                                 rng.uniform() * 30000));
  const auto doc = geo::route_to_geojson(routes, alerts).document;
  CHECK(doc.size() == 2);
  CHECK(doc["features"].size() == 52);
  for (const auto& f : doc["features"]) {
    CHECK(f["type"] == "Feature");
    CHECK(f.contains("properties"));
    const auto type = f["geometry"]["type"].get<std::string>();
    CHECK((type == "Point" || type == "LineString"));
    const auto& c = f["geometry"]["coordinates"];
    if (type == "Point") {
      CHECK(c.size() == 2);
    } else {
      CHECK(c.size() >= 2);
      for (const auto& p : c)
        CHECK(p.size() == 2);
    }
  }
}
