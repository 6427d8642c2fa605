#pragma once

// JSON mappings for every type that crosses a file or HTTP boundary. Field
// names are the lower_snake_case names of the C++ members; absent optionals
// are written as null and accepted as null or missing.

#include "deepalm/alert.hpp"
#include "deepalm/detector.hpp"
#include "deepalm/fiber_sim.hpp"
#include "deepalm/otdr_analysis.hpp"
#include "deepalm/predictive_maintenance.hpp"
#include "deepalm/siem.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace deepalm {

inline constexpr std::string_view trace_format = "deepalm-trace/1";
inline constexpr std::string_view route_format = "deepalm-route/1";
inline constexpr std::string_view telemetry_format = "deepalm-telemetry/1";
inline constexpr std::string_view rules_format = "deepalm-rules/1";
inline constexpr std::string_view config_format = "deepalm-config/1";

/// Throws Errc::parse_error unless `j["format"] == expected`.
void require_format(const nlohmann::json& j, std::string_view expected);

/// Reads and parses a JSON file; I/O and syntax problems become
/// Errc::parse_error naming the path.
nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

nlohmann::json trace_document(const fiber::OtdrTrace& trace);
fiber::OtdrTrace trace_from_document(const nlohmann::json& j);

nlohmann::json route_document(const fiber::FiberRoute& route);
fiber::FiberRoute route_from_document(const nlohmann::json& j);

nlohmann::json telemetry_document(const pm::TelemetrySeries& series);
pm::TelemetrySeries telemetry_from_document(const nlohmann::json& j);

nlohmann::json rules_document(const std::vector<siem::SecurityRule>& rules);
std::vector<siem::SecurityRule> rules_from_document(const nlohmann::json& j);

namespace detect {
void to_json(nlohmann::json& j, const DetectorConfig& c);
void from_json(const nlohmann::json& j, DetectorConfig& c);
void to_json(nlohmann::json& j, const DetectionReport& r);
} // namespace detect

namespace fiber {
void to_json(nlohmann::json& j, const FiberEventSpec& e);
void from_json(const nlohmann::json& j, FiberEventSpec& e);
void to_json(nlohmann::json& j, const Waypoint& w);
void from_json(const nlohmann::json& j, Waypoint& w);
void to_json(nlohmann::json& j, const FiberRoute& r);
void from_json(const nlohmann::json& j, FiberRoute& r);
void to_json(nlohmann::json& j, const OtdrParams& p);
void from_json(const nlohmann::json& j, OtdrParams& p);
void to_json(nlohmann::json& j, const IncidentSpec& s);
void from_json(const nlohmann::json& j, IncidentSpec& s);
} // namespace fiber

namespace otdr {
void to_json(nlohmann::json& j, const DetectedEvent& e);
void from_json(const nlohmann::json& j, DetectedEvent& e);
void to_json(nlohmann::json& j, const TraceDiff& d);
void to_json(nlohmann::json& j, const FaultDiagnosis& d);
} // namespace otdr

namespace pm {
void to_json(nlohmann::json& j, const DeviceProfile& p);
void from_json(const nlohmann::json& j, DeviceProfile& p);
void to_json(nlohmann::json& j, const RulEstimate& e);
} // namespace pm

namespace siem {
void to_json(nlohmann::json& j, const SecurityRule& r);
void from_json(const nlohmann::json& j, SecurityRule& r);
void to_json(nlohmann::json& j, const SecurityEvent& e);
void to_json(nlohmann::json& j, const LogRecord& r);
} // namespace siem

namespace geo {
void to_json(nlohmann::json& j, const GeoPoint& p);
void from_json(const nlohmann::json& j, GeoPoint& p);
} // namespace geo

namespace service {
void to_json(nlohmann::json& j, const Alert& a);
void from_json(const nlohmann::json& j, Alert& a);
} // namespace service

} // namespace deepalm
