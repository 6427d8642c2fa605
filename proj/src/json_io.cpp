#include "deepalm/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace deepalm {

using nlohmann::json;

namespace {

template <class T>
std::optional<T> opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null())
    return std::nullopt;
  return it->get<T>();
}

json opt_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

UtcTime time_field(const json& j, const char* key) {
  return parse_rfc3339(j.at(key).get<std::string>());
}

} // namespace

void require_format(const json& j, std::string_view expected) {
  if (!j.is_object())
    throw Error(Errc::parse_error, "expected a JSON object");
  auto it = j.find("format");
  if (it == j.end() || !it->is_string() || it->get<std::string>() != expected)
    throw Error(Errc::parse_error,
                "expected format '" + std::string(expected) + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(Errc::parse_error, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, "'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(Errc::invalid_argument, "cannot write '" + path + "'");
  out << text;
}

// Wraps nlohmann type errors so callers see one error family.
template <class F>
auto parsing(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
}

json trace_document(const fiber::OtdrTrace& trace) {
  json j{{"format", trace_format},
         {"route_id", trace.route_id},
         {"captured_at", format_rfc3339(trace.captured_at)},
         {"params", trace.params},
         {"samples", trace.samples}};
  if (trace.ground_truth)
    j["ground_truth"] = *trace.ground_truth;
  return j;
}

fiber::OtdrTrace trace_from_document(const json& j) {
  require_format(j, trace_format);
  return parsing([&] {
    fiber::OtdrTrace t;
    t.route_id = j.at("route_id").get<std::string>();
    t.captured_at = time_field(j, "captured_at");
    t.params = j.at("params").get<fiber::OtdrParams>();
    t.samples = j.at("samples").get<std::vector<double>>();
    t.ground_truth =
      opt<std::vector<fiber::FiberEventSpec>>(j, "ground_truth");
    return t;
  });
}

json route_document(const fiber::FiberRoute& route) {
  json j = route;
  j["format"] = route_format;
  return j;
}

fiber::FiberRoute route_from_document(const json& j) {
  require_format(j, route_format);
  return parsing([&] { return j.get<fiber::FiberRoute>(); });
}

json telemetry_document(const pm::TelemetrySeries& s) {
  return {{"format", telemetry_format}, {"device_id", s.device_id},
          {"metric_name", s.metric_name}, {"t0", format_rfc3339(s.t0)},
          {"step_s", s.step_s}, {"values", s.values}};
}

pm::TelemetrySeries telemetry_from_document(const json& j) {
  require_format(j, telemetry_format);
  return parsing([&] {
    pm::TelemetrySeries s;
    s.device_id = j.at("device_id").get<std::string>();
    s.metric_name = j.value("metric_name", "");
    s.t0 = time_field(j, "t0");
    s.step_s = j.at("step_s").get<double>();
    s.values = j.at("values").get<std::vector<double>>();
    s.validate();
    return s;
  });
}

json rules_document(const std::vector<siem::SecurityRule>& rules) {
  return {{"format", rules_format}, {"rules", rules}};
}

std::vector<siem::SecurityRule> rules_from_document(const json& j) {
  require_format(j, rules_format);
  return parsing(
    [&] { return j.at("rules").get<std::vector<siem::SecurityRule>>(); });
}

namespace detect {

void to_json(json& j, const DetectorConfig& c) {
  j = {{"ewma_lambda", c.ewma_lambda},
       {"z_threshold", c.z_threshold},
       {"cusum_drift_k", c.cusum_drift_k},
       {"cusum_threshold_h", c.cusum_threshold_h},
       {"min_separation", c.min_separation},
       {"sigma_floor", c.sigma_floor}};
}

void from_json(const json& j, DetectorConfig& c) {
  c.ewma_lambda = j.value("ewma_lambda", c.ewma_lambda);
  c.z_threshold = j.value("z_threshold", c.z_threshold);
  c.cusum_drift_k = j.value("cusum_drift_k", c.cusum_drift_k);
  c.cusum_threshold_h = j.value("cusum_threshold_h", c.cusum_threshold_h);
  c.min_separation = j.value("min_separation", c.min_separation);
  c.sigma_floor = j.value("sigma_floor", c.sigma_floor);
}

void to_json(json& j, const DetectionReport& r) {
  j = {{"matched", r.matched},     {"missed", r.missed},
       {"spurious", r.spurious},   {"precision", r.precision},
       {"recall", r.recall}};
}

} // namespace detect

namespace fiber {

void to_json(json& j, const FiberEventSpec& e) {
  j = {{"position_m", e.position_m},
       {"kind", to_string(e.kind)},
       {"loss_db", e.loss_db},
       {"reflectance_db", opt_json(e.reflectance_db)}};
}

void from_json(const json& j, FiberEventSpec& e) {
  e.position_m = j.at("position_m").get<double>();
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.loss_db = j.value("loss_db", 0.0);
  e.reflectance_db = opt<double>(j, "reflectance_db");
}

void to_json(json& j, const Waypoint& w) {
  j = {{"latitude_deg", w.latitude_deg},
       {"longitude_deg", w.longitude_deg},
       {"cumulative_fiber_m", w.cumulative_fiber_m}};
}

void from_json(const json& j, Waypoint& w) {
  w.latitude_deg = j.at("latitude_deg").get<double>();
  w.longitude_deg = j.at("longitude_deg").get<double>();
  w.cumulative_fiber_m = j.at("cumulative_fiber_m").get<double>();
}

void to_json(json& j, const FiberRoute& r) {
  j = {{"route_id", r.route_id},
       {"length_m", r.length_m},
       {"attenuation_db_per_km", r.attenuation_db_per_km},
       {"group_index", r.group_index},
       {"waypoints", r.waypoints},
       {"baseline_events", r.baseline_events}};
}

void from_json(const json& j, FiberRoute& r) {
  r.route_id = j.at("route_id").get<std::string>();
  r.length_m = j.at("length_m").get<double>();
  r.attenuation_db_per_km = j.value("attenuation_db_per_km", 0.2);
  r.group_index = j.value("group_index", 1.468);
  r.waypoints = j.at("waypoints").get<std::vector<Waypoint>>();
  r.baseline_events =
    j.value("baseline_events", std::vector<FiberEventSpec>{});
}

void to_json(json& j, const OtdrParams& p) {
  j = {{"sample_spacing_m", p.sample_spacing_m},
       {"pulse_width_m", p.pulse_width_m},
       {"launch_level_db", p.launch_level_db},
       {"backscatter_coeff_db", p.backscatter_coeff_db},
       {"noise_std_db_linear_equiv", p.noise_std_db_linear_equiv},
       {"noise_floor_db", p.noise_floor_db},
       {"saturation_db", p.saturation_db ? json(*p.saturation_db) : json(nullptr)},
       {"seed", p.seed}};
}

void from_json(const json& j, OtdrParams& p) {
  p.sample_spacing_m = j.value("sample_spacing_m", p.sample_spacing_m);
  p.pulse_width_m = j.value("pulse_width_m", p.pulse_width_m);
  p.launch_level_db = j.value("launch_level_db", p.launch_level_db);
  p.backscatter_coeff_db =
    j.value("backscatter_coeff_db", p.backscatter_coeff_db);
  p.noise_std_db_linear_equiv =
    j.value("noise_std_db_linear_equiv", p.noise_std_db_linear_equiv);
  p.noise_floor_db = j.value("noise_floor_db", p.noise_floor_db);
  p.saturation_db = opt<double>(j, "saturation_db");
  p.seed = j.value("seed", p.seed);
}

void to_json(json& j, const IncidentSpec& s) {
  j = {{"incident_id", s.incident_id},
       {"kind", to_string(s.kind)},
       {"magnitude", s.magnitude},
       {"position_m", opt_json(s.position_m)},
       {"injected_at", format_rfc3339(s.injected_at)}};
  switch (s.kind) {
    case IncidentKind::device_overheat:
      j["device_id"] = s.target;
      break;
    case IncidentKind::login_burst:
      j["log_source"] = s.target;
      break;
    default:
      j["route_id"] = s.target;
  }
}

void from_json(const json& j, IncidentSpec& s) {
  s.incident_id = j.value("incident_id", "");
  s.kind = incident_kind_from_string(j.at("kind").get<std::string>());
  const char* key = s.kind == IncidentKind::device_overheat ? "device_id"
                    : s.kind == IncidentKind::login_burst   ? "log_source"
                                                            : "route_id";
  if (auto t = opt<std::string>(j, key))
    s.target = *t;
  else if (auto any = opt<std::string>(j, "target"))
    s.target = *any;
  else
    throw Error(Errc::invalid_argument,
                "incident '" + std::string(to_string(s.kind)) + "' needs "
                  + key);
  s.position_m = opt<double>(j, "position_m");
  if (is_fiber_incident(s.kind) && !s.position_m)
    throw Error(Errc::invalid_argument, "fiber incident needs position_m");
  s.magnitude = j.value("magnitude", 0.0);
  if (auto t = opt<std::string>(j, "injected_at"))
    s.injected_at = parse_rfc3339(*t);
}

} // namespace fiber

namespace otdr {

void to_json(json& j, const DetectedEvent& e) {
  j = {{"position_m", e.position_m},
       {"kind", to_string(e.kind)},
       {"loss_db", e.loss_db},
       {"reflectance_db", opt_json(e.reflectance_db)},
       {"confidence", e.confidence},
       {"width_m", e.width_m}};
}

void from_json(const json& j, DetectedEvent& e) {
  e.position_m = j.at("position_m").get<double>();
  e.kind = detected_kind_from_string(j.at("kind").get<std::string>());
  e.loss_db = j.value("loss_db", 0.0);
  e.reflectance_db = opt<double>(j, "reflectance_db");
  e.confidence = j.value("confidence", 0.0);
  e.width_m = j.value("width_m", 0.0);
}

void to_json(json& j, const TraceDiff& d) {
  json changed = json::array();
  for (const auto& [before, after] : d.changed_events)
    changed.push_back({{"before", before}, {"after", after}});
  j = {{"end_shift_m", d.end_shift_m},
       {"baseline_end_m", d.baseline_end_m},
       {"current_end_m", d.current_end_m},
       {"sample_spacing_m", d.sample_spacing_m},
       {"new_events", d.new_events},
       {"vanished_events", d.vanished_events},
       {"changed_events", changed}};
}

void to_json(json& j, const FaultDiagnosis& d) {
  j = {{"fault_kind", to_string(d.fault_kind)},
       {"position_m", opt_json(d.position_m)},
       {"severity", to_string(d.severity)},
       {"evidence", d.evidence},
       {"recommended_action", d.recommended_action}};
}

} // namespace otdr

namespace pm {

void to_json(json& j, const DeviceProfile& p) {
  j = {{"device_id", p.device_id},
       {"metric_name", p.metric_name},
       {"nominal", p.nominal},
       {"failure_threshold", p.failure_threshold},
       {"drift_per_hour", p.drift_per_hour},
       {"noise_std", p.noise_std},
       {"seed", p.seed}};
}

void from_json(const json& j, DeviceProfile& p) {
  p.device_id = j.at("device_id").get<std::string>();
  p.metric_name = j.value("metric_name", "");
  p.nominal = j.at("nominal").get<double>();
  p.failure_threshold = j.at("failure_threshold").get<double>();
  p.drift_per_hour = j.value("drift_per_hour", 0.0);
  p.noise_std = j.value("noise_std", 0.0);
  p.seed = j.value("seed", std::uint64_t{1});
}

void to_json(json& j, const RulEstimate& e) {
  j = {{"device_id", e.device_id},
       {"health_index", e.health_index},
       {"rul_hours", std::isinf(e.rul_hours) ? json(nullptr) : json(e.rul_hours)},
       {"rul_infinite", std::isinf(e.rul_hours)},
       {"slope_per_hour", e.slope_per_hour},
       {"fit_residual_std", e.fit_residual_std},
       {"current_fit", e.current_fit},
       {"estimated_at", format_rfc3339(e.estimated_at)}};
}

} // namespace pm

namespace siem {

void to_json(json& j, const SecurityRule& r) {
  json pattern;
  if (r.pattern.contains)
    pattern = {{"contains", *r.pattern.contains}};
  else if (r.pattern.field)
    pattern = {{"field", *r.pattern.field}, {"equals", r.pattern.equals}};
  j = {{"rule_id", r.rule_id},
       {"pattern", pattern},
       {"group_by", r.group_by},
       {"count_threshold", r.count_threshold},
       {"window_s", r.window_s},
       {"severity", to_string(r.severity)}};
}

void from_json(const json& j, SecurityRule& r) {
  r.rule_id = j.at("rule_id").get<std::string>();
  const auto& p = j.at("pattern");
  r.pattern.contains = opt<std::string>(p, "contains");
  r.pattern.field = opt<std::string>(p, "field");
  r.pattern.equals = p.value("equals", "");
  r.group_by = j.value("group_by", "");
  r.count_threshold = j.at("count_threshold").get<int>();
  r.window_s = j.at("window_s").get<double>();
  r.severity = severity_from_string(j.value("severity", "major"));
}

void to_json(json& j, const SecurityEvent& e) {
  j = {{e.from_rule ? "rule_id" : "detector_id", e.source_id},
       {"window_start", format_rfc3339(e.window_start)},
       {"window_end", format_rfc3339(e.window_end)},
       {"group_key", e.group_key},
       {"count", e.count},
       {"score", e.score},
       {"severity", to_string(e.severity)}};
}

void to_json(json& j, const LogRecord& r) {
  j = {{"timestamp", format_rfc3339(r.timestamp)},
       {"host", r.host},
       {"facility", r.facility},
       {"tag", r.tag},
       {"severity", r.severity},
       {"message", r.message},
       {"fields", r.fields}};
}

} // namespace siem

namespace geo {

void to_json(json& j, const GeoPoint& p) {
  j = {{"latitude_deg", p.latitude_deg}, {"longitude_deg", p.longitude_deg}};
}

void from_json(const json& j, GeoPoint& p) {
  p.latitude_deg = j.at("latitude_deg").get<double>();
  p.longitude_deg = j.at("longitude_deg").get<double>();
}

} // namespace geo

namespace service {

void to_json(json& j, const Alert& a) {
  j = {{"alert_id", a.alert_id},
       {"source_domain", to_string(a.source_domain)},
       {"kind", a.kind},
       {"severity", to_string(a.severity)},
       {"route_or_device", a.route_or_device},
       {"position_m", opt_json(a.position_m)},
       {"geo", a.geo ? json(*a.geo) : json(nullptr)},
       {"summary", a.summary},
       {"evidence", a.evidence},
       {"status", to_string(a.status)},
       {"occurrence_count", a.occurrence_count},
       {"created_at", format_rfc3339(a.created_at)},
       {"updated_at", format_rfc3339(a.updated_at)},
       {"tags", a.tags}};
}

void from_json(const json& j, Alert& a) {
  a.alert_id = j.at("alert_id").get<std::string>();
  a.source_domain = domain_from_string(j.at("source_domain").get<std::string>());
  a.kind = j.at("kind").get<std::string>();
  a.severity = severity_from_string(j.at("severity").get<std::string>());
  a.route_or_device = j.at("route_or_device").get<std::string>();
  a.position_m = opt<double>(j, "position_m");
  a.geo = opt<geo::GeoPoint>(j, "geo");
  a.summary = j.value("summary", "");
  a.evidence = j.value("evidence", "");
  a.status = status_from_string(j.at("status").get<std::string>());
  a.occurrence_count = j.at("occurrence_count").get<std::int64_t>();
  a.created_at = time_field(j, "created_at");
  a.updated_at = time_field(j, "updated_at");
  a.tags = j.value("tags", std::set<std::string>{});
}

} // namespace service

} // namespace deepalm
