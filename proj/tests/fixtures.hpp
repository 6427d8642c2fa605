#pragma once

#include "deepalm/json_io.hpp"
#include "deepalm/monitor.hpp"

#include <filesystem>
#include <string>
#include <unistd.h>

namespace fixtures {

inline const deepalm::UtcTime t0 = deepalm::parse_rfc3339("2026-01-01T00:00:00Z");

inline std::string data_path(const std::string& name) {
  return std::string(DEEPALM_TEST_DATA) + "/" + name;
}

inline deepalm::fiber::FiberRoute route_25km() {
  return deepalm::route_from_document(deepalm::read_json_file(data_path("route_25km.json")));
}

inline deepalm::fiber::FiberRoute shifted_route(const std::string& id, double dlat) {
  auto r = route_25km();
  r.route_id = id;
  for (auto& w : r.waypoints)
    w.latitude_deg += dlat;
  return r;
}

inline deepalm::pm::DeviceProfile laser(const std::string& id, std::uint64_t seed) {
  return {id, "laser_bias_ma", 50.0, 80.0, 0.0, 0.2, seed};
}

inline deepalm::pm::DeviceProfile amp_gain(const std::string& id, std::uint64_t seed) {
  return {id, "gain_db", 20.0, 14.0, 0.0, 0.05, seed};
}

/// Three routes, three devices, two log hosts, starting at t0.
inline deepalm::service::MonitorConfig demo_config(std::uint64_t seed = 1) {
  deepalm::service::MonitorConfig c;
  c.routes = {route_25km(), shifted_route("route-b", 0.1), shifted_route("route-c", -0.1)};
  c.devices = {laser("amp-1", 11), laser("amp-2", 12), amp_gain("edfa-1", 13)};
  c.otdr.saturation_db = 60.0;
  c.siem.quiet.hosts = {"fsp3000-1", "fsp3000-2"};
  c.seed = seed;
  c.start_time = t0;
  return c;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int n = 0;
    path = std::filesystem::temp_directory_path()
           / ("deepalm_test_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::filesystem::remove_all(path);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const char* name) const {
    return (path / name).string();
  }
};

} // namespace fixtures
