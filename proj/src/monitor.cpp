#include "deepalm/monitor.hpp"

#include "deepalm/geo_mapper.hpp"
#include "deepalm/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

namespace deepalm::service {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void check_detector(const detect::DetectorConfig& c, const std::string& where,
                    std::vector<std::string>& out) {
  try {
    c.validate();
  } catch (const std::exception& e) {
    out.push_back(where + ": " + e.what());
  }
}

UtcTime floor_to_second(UtcTime t) {
  return std::chrono::floor<std::chrono::seconds>(t);
}

} // namespace

std::vector<std::string> MonitorConfig::violations() const {
  std::vector<std::string> out;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      out.push_back(std::string(name) + " must be > 0");
  };
  positive(scan_interval_s, "scan_interval_s");
  positive(telemetry_interval_s, "telemetry_interval_s");
  positive(log_poll_interval_s, "log_poll_interval_s");
  if (!(dedup_window_s >= 0.0))
    out.push_back("dedup_window_s must be >= 0");

  std::set<std::string> ids;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const auto where = "routes[" + std::to_string(i) + "]";
    for (const auto& v : routes[i].violations())
      out.push_back(where + ": " + v);
    if (!ids.insert(routes[i].route_id).second)
      out.push_back(where + ": duplicate route_id '" + routes[i].route_id + "'");
  }
  ids.clear();
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const auto where = "devices[" + std::to_string(i) + "]";
    for (const auto& v : devices[i].violations())
      out.push_back(where + ": " + v);
    if (!ids.insert(devices[i].device_id).second)
      out.push_back(where + ": duplicate device_id '" + devices[i].device_id
                    + "'");
  }
  ids.clear();
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto where = "rules[" + std::to_string(i) + "]";
    for (const auto& v : rules[i].violations())
      out.push_back(where + ": " + v);
    if (!ids.insert(rules[i].rule_id).second)
      out.push_back(where + ": duplicate rule_id '" + rules[i].rule_id + "'");
  }
  for (const auto& v : otdr.violations())
    out.push_back(v);

  check_detector(analysis.detector, "analysis.detector", out);
  if (!(analysis.min_loss_db > 0.0))
    out.push_back("analysis.min_loss_db must be > 0");
  if (!(analysis.min_peak_db > 0.0))
    out.push_back("analysis.min_peak_db must be > 0");
  if (!(analysis.end_margin_db > 0.0))
    out.push_back("analysis.end_margin_db must be > 0");
  if (!(analysis.loss_tolerance_db >= 0.0))
    out.push_back("analysis.loss_tolerance_db must be >= 0");
  if (!(analysis.position_tolerance_spacings >= 0.0))
    out.push_back("analysis.position_tolerance_spacings must be >= 0");
  if (analysis.smooth_window < 1)
    out.push_back("analysis.smooth_window must be >= 1");

  if (telemetry.window < 3)
    out.push_back("telemetry.window must be >= 3");
  if (telemetry.min_samples < 3 || telemetry.min_samples > telemetry.window)
    out.push_back("telemetry.min_samples must lie in [3, telemetry.window]");
  positive(telemetry.horizon_hours, "telemetry.horizon_hours");
  if (!(telemetry.min_trend_t >= 0.0))
    out.push_back("telemetry.min_trend_t must be >= 0");

  positive(siem.bucket_s, "siem.bucket_s");
  check_detector(siem.detector, "siem.detector", out);
  if (!(siem.quiet.rate_per_min >= 0.0))
    out.push_back("siem.quiet.rate_per_min must be >= 0");
  if (siem.quiet.hosts.empty())
    out.push_back("siem.quiet.hosts must not be empty");
  double longest = siem.bucket_s;
  for (const auto& r : rules)
    longest = std::max(longest, r.window_s);
  if (!(siem.history_s >= 2.0 * longest))
    out.push_back("siem.history_s must cover twice the longest rule window");
  if (listen_port < 0 || listen_port > 65535)
    out.push_back("listen.port must be in [0, 65535]");
  return out;
}

MonitorConfig config_from_json(const json& j) {
  try {
    require_format(j, config_format);
  } catch (const Error& e) {
    throw Error(Errc::config_error, e.what());
  }
  MonitorConfig c;
  std::vector<std::string> problems;
  // Each field parses independently so one bad entry does not hide others.
  auto field = [&](const char* name, auto&& parse) {
    auto it = j.find(name);
    if (it == j.end() || it->is_null())
      return;
    try {
      parse(*it);
    } catch (const std::exception& e) {
      problems.push_back(std::string(name) + ": " + e.what());
    }
  };
  field("routes", [&](const json& v) {
    for (const auto& r : v)
      c.routes.push_back(r.get<fiber::FiberRoute>());
  });
  field("devices", [&](const json& v) {
    c.devices = v.get<std::vector<pm::DeviceProfile>>();
  });
  field("rules", [&](const json& v) {
    c.rules = v.is_object() ? rules_from_document(v)
                            : v.get<std::vector<siem::SecurityRule>>();
  });
  field("scan_interval_s", [&](const json& v) { c.scan_interval_s = v.get<double>(); });
  field("telemetry_interval_s",
        [&](const json& v) { c.telemetry_interval_s = v.get<double>(); });
  field("log_poll_interval_s",
        [&](const json& v) { c.log_poll_interval_s = v.get<double>(); });
  field("dedup_window_s", [&](const json& v) { c.dedup_window_s = v.get<double>(); });
  field("persistence_path",
        [&](const json& v) { c.persistence_path = v.get<std::string>(); });
  field("otdr", [&](const json& v) { c.otdr = v.get<fiber::OtdrParams>(); });
  field("analysis", [&](const json& v) {
    auto& a = c.analysis;
    if (v.contains("detector"))
      a.detector = v.at("detector").get<detect::DetectorConfig>();
    a.min_loss_db = v.value("min_loss_db", a.min_loss_db);
    a.min_peak_db = v.value("min_peak_db", a.min_peak_db);
    a.end_margin_db = v.value("end_margin_db", a.end_margin_db);
    a.loss_tolerance_db = v.value("loss_tolerance_db", a.loss_tolerance_db);
    a.position_tolerance_spacings =
      v.value("position_tolerance_spacings", a.position_tolerance_spacings);
    a.smooth_window = v.value("smooth_window", a.smooth_window);
  });
  field("telemetry", [&](const json& v) {
    auto& t = c.telemetry;
    t.window = v.value("window", t.window);
    t.min_samples = v.value("min_samples", t.min_samples);
    t.horizon_hours = v.value("horizon_hours", t.horizon_hours);
    t.min_trend_t = v.value("min_trend_t", t.min_trend_t);
  });
  field("siem", [&](const json& v) {
    auto& s = c.siem;
    s.bucket_s = v.value("bucket_s", s.bucket_s);
    s.history_s = v.value("history_s", s.history_s);
    if (v.contains("detector"))
      s.detector = v.at("detector").get<detect::DetectorConfig>();
    if (v.contains("quiet")) {
      const auto& q = v.at("quiet");
      s.quiet.rate_per_min = q.value("rate_per_min", s.quiet.rate_per_min);
      s.quiet.hosts = q.value("hosts", s.quiet.hosts);
    }
  });
  field("seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); });
  field("start_time", [&](const json& v) {
    c.start_time = parse_rfc3339(v.get<std::string>());
  });
  field("listen", [&](const json& v) {
    c.listen_host = v.value("host", c.listen_host);
    c.listen_port = v.value("port", c.listen_port);
  });

  for (auto& v : c.violations())
    problems.push_back(std::move(v));
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems)
      msg += "\n  " + p;
    throw Error(Errc::config_error, msg);
  }
  return c;
}

json config_to_json(const MonitorConfig& c) {
  json j{{"format", config_format},
         {"routes", c.routes},
         {"devices", c.devices},
         {"rules", c.rules},
         {"scan_interval_s", c.scan_interval_s},
         {"telemetry_interval_s", c.telemetry_interval_s},
         {"log_poll_interval_s", c.log_poll_interval_s},
         {"dedup_window_s", c.dedup_window_s},
         {"persistence_path", c.persistence_path},
         {"otdr", c.otdr},
         {"analysis",
          {{"detector", c.analysis.detector},
           {"min_loss_db", c.analysis.min_loss_db},
           {"min_peak_db", c.analysis.min_peak_db},
           {"end_margin_db", c.analysis.end_margin_db},
           {"loss_tolerance_db", c.analysis.loss_tolerance_db},
           {"position_tolerance_spacings", c.analysis.position_tolerance_spacings},
           {"smooth_window", c.analysis.smooth_window}}},
         {"telemetry",
          {{"window", c.telemetry.window},
           {"min_samples", c.telemetry.min_samples},
           {"horizon_hours", c.telemetry.horizon_hours},
           {"min_trend_t", c.telemetry.min_trend_t}}},
         {"siem",
          {{"bucket_s", c.siem.bucket_s},
           {"history_s", c.siem.history_s},
           {"detector", c.siem.detector},
           {"quiet",
            {{"rate_per_min", c.siem.quiet.rate_per_min},
             {"hosts", c.siem.quiet.hosts}}}}},
         {"seed", c.seed},
         {"listen", {{"host", c.listen_host}, {"port", c.listen_port}}}};
  if (c.start_time)
    j["start_time"] = format_rfc3339(*c.start_time);
  return j;
}

MonitorConfig load_config(const std::string& path) {
  json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(Errc::config_error, e.what());
  }
  return config_from_json(j);
}

std::string resolve_config_path(const std::string& explicit_path) {
  if (!explicit_path.empty())
    return explicit_path;
  if (const char* env = std::getenv("DEEPALM_CONFIG"))
    return env;
  return {};
}

Monitor::Monitor(MonitorConfig config, std::shared_ptr<Clock> clock)
  : config_{std::move(config)},
    clock_{std::move(clock)},
    store_{config_.persistence_path, derive_seed(config_.seed, 0xA1E47)} {
  if (auto v = config_.violations(); !v.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : v)
      msg += "\n  " + p;
    throw Error(Errc::config_error, msg);
  }
  const UtcTime start = config_.start_time.value_or(floor_to_second(clock_->now()));
  for (std::size_t i = 0; i < config_.routes.size(); ++i) {
    RouteState r;
    r.route = config_.routes[i];
    r.events = r.route.baseline_events;
    std::sort(r.events.begin(), r.events.end(),
              [](const auto& a, const auto& b) { return a.position_m < b.position_m; });
    r.seed = derive_seed(config_.seed, i + 1);
    r.next_scan = start;
    routes_.push_back(std::move(r));
  }
  for (const auto& p : config_.devices) {
    DeviceState d{pm::DeviceSimulator{p}, {}, false, start, std::nullopt};
    devices_.emplace(p.device_id, std::move(d));
  }
  logs_.seed = derive_seed(config_.seed, 0x5105);
  logs_.next_poll = start;
}

Monitor::RouteState& Monitor::route_state(const std::string& route_id) {
  for (auto& r : routes_)
    if (r.route.route_id == route_id)
      return r;
  throw Error(Errc::not_found, "unknown route '" + route_id + "'");
}

const Monitor::RouteState& Monitor::route_state(const std::string& route_id) const {
  return const_cast<Monitor*>(this)->route_state(route_id);
}

Alert Monitor::submit(Alert candidate, double position_tolerance_m) {
  if (auto it = pending_tags_.find(candidate.route_or_device);
      it != pending_tags_.end()) {
    candidate.tags.insert(it->second.begin(), it->second.end());
    pending_tags_.erase(it);
  }
  return store_.dedup_or_insert(std::move(candidate), config_.dedup_window_s,
                                position_tolerance_m)
    .alert;
}

std::vector<Alert> Monitor::ingest_trace(const fiber::OtdrTrace& trace) {
  std::lock_guard lock(mutex_);
  return ingest_trace_locked(trace);
}

std::vector<Alert> Monitor::ingest_trace_locked(const fiber::OtdrTrace& trace) {
  auto& r = route_state(trace.route_id);
  if (trace.samples.size() < 10)
    throw Error(Errc::invalid_argument, "trace too short");
  if (auto v = trace.params.violations(); !v.empty())
    throw Error(Errc::invalid_argument, "trace params: " + v.front());
  for (double s : trace.samples)
    if (!std::isfinite(s))
      throw Error(Errc::invalid_argument, "trace has non-finite samples");
  if (r.latest && trace.captured_at < r.latest->captured_at)
    throw Error(Errc::conflict, "trace captured at "
                                  + format_rfc3339(trace.captured_at)
                                  + " is older than the latest one");
  const auto& a = config_.analysis;
  auto smoothed = otdr::smooth_trace(trace, a.smooth_window);
  if (r.baseline
      && r.baseline->params.sample_spacing_m != trace.params.sample_spacing_m)
    throw Error(Errc::invalid_argument, "sample spacing differs from baseline");
  ++traces_processed_;
  r.latest = trace;
  r.latest_events =
    otdr::detect_events(smoothed, a.detector, a.min_loss_db, a.min_peak_db);
  if (!r.baseline) {
    // TODO: persist per-route baselines next to the journal.
    r.baseline = std::move(smoothed);
    return {};
  }
  const double spacing = trace.params.sample_spacing_m;
  const auto diff =
    otdr::compare_baseline(smoothed, *r.baseline, a.loss_tolerance_db,
                           a.position_tolerance_spacings * spacing, a);
  const auto diag = otdr::diagnose_fault(diff, r.route);
  if (diag.fault_kind == otdr::FaultKind::none)
    return {};

  Alert c;
  c.source_domain = Domain::fiber;
  c.kind = std::string(otdr::to_string(diag.fault_kind));
  c.severity = diag.severity;
  c.route_or_device = r.route.route_id;
  c.position_m = diag.position_m;
  if (diag.position_m)
    c.geo = geo::locate_on_route(r.route, *diag.position_m);
  c.summary = c.kind + " on " + r.route.route_id
              + (diag.position_m ? " at " + fixed(*diag.position_m) + " m" : "")
              + ". " + diag.recommended_action;
  c.evidence = "trace " + format_rfc3339(trace.captured_at) + ": " + diag.evidence;
  c.created_at = c.updated_at = trace.captured_at;
  return {submit(std::move(c), 3.0 * spacing)};
}

std::vector<Alert> Monitor::ingest_telemetry(const pm::TelemetrySeries& series) {
  std::lock_guard lock(mutex_);
  return ingest_telemetry_locked(series);
}

std::vector<Alert> Monitor::ingest_telemetry_locked(
  const pm::TelemetrySeries& series) {
  auto it = devices_.find(series.device_id);
  if (it == devices_.end())
    throw Error(Errc::not_found, "unknown device '" + series.device_id + "'");
  series.validate();
  const auto& profile = it->second.sim.profile();
  const auto est = pm::estimate_rul(series, profile, series.values.size());
  it->second.health = est;
  const auto flag = pm::maintenance_flag(est, config_.telemetry.horizon_hours);
  if (flag == pm::MaintenanceFlag::ok
      || series.values.size() < config_.telemetry.min_samples
      || !(est.slope_t_stat >= config_.telemetry.min_trend_t))
    return {};
  Alert c;
  c.source_domain = Domain::hardware;
  c.kind = std::string(pm::to_string(flag));
  c.severity = flag == pm::MaintenanceFlag::critical ? Severity::critical
                                                     : Severity::minor;
  c.route_or_device = series.device_id;
  const auto metric = series.metric_name.empty() ? profile.metric_name
                                                 : series.metric_name;
  c.summary = series.device_id + " " + metric + " trending to "
              + fixed(profile.failure_threshold, 3) + ", RUL "
              + fixed(est.rul_hours) + " h";
  c.evidence = "telemetry " + format_rfc3339(series.t0) + " to "
               + format_rfc3339(est.estimated_at) + ", slope "
               + fixed(est.slope_per_hour, 6) + "/h";
  c.created_at = c.updated_at = est.estimated_at;
  return {submit(std::move(c), 0.0)};
}

std::vector<Alert> Monitor::raise_security(
  std::span<const siem::SecurityEvent> events) {
  std::vector<Alert> out;
  for (const auto& e : events) {
    Alert c;
    c.source_domain = Domain::security;
    c.kind = e.source_id;
    c.severity = e.severity;
    c.route_or_device = e.group_key.empty() ? "all" : e.group_key;
    c.summary = e.source_id + ": " + std::to_string(e.count) + " events"
                + (e.group_key.empty() ? "" : " for " + e.group_key)
                + " between " + format_rfc3339(e.window_start) + " and "
                + format_rfc3339(e.window_end) + " (score "
                + fixed(e.score, 2) + ")";
    c.evidence = "window " + format_rfc3339(e.window_start) + "/"
                 + format_rfc3339(e.window_end);
    c.created_at = e.window_start;
    c.updated_at = e.window_end;
    out.push_back(submit(std::move(c), 0.0));
  }
  return out;
}

std::vector<Alert> Monitor::ingest_logs(std::span<const siem::LogRecord> records) {
  std::vector<siem::LogRecord> sorted(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  auto events = siem::apply_rules(sorted, config_.rules);
  auto rate = siem::score_log_rate(sorted, config_.siem.bucket_s, config_.siem.detector);
  events.insert(events.end(), rate.begin(), rate.end());
  std::lock_guard lock(mutex_);
  return raise_security(events);
}

std::string Monitor::inject_incident(fiber::IncidentSpec spec) {
  std::lock_guard lock(mutex_);
  if (spec.incident_id.empty())
    spec.incident_id = "inc-" + std::to_string(incidents_ + 1);
  if (spec.injected_at == UtcTime{})
    spec.injected_at = clock_->now();
  if (!std::isfinite(spec.magnitude))
    throw Error(Errc::invalid_argument, "magnitude must be finite");
  std::string tag_key;
  if (fiber::is_fiber_incident(spec.kind)) {
    auto& r = route_state(spec.target);
    if (!spec.position_m || !(*spec.position_m > 0.0)
        || *spec.position_m > r.route.length_m)
      throw Error(Errc::invalid_argument,
                  "position_m must lie in (0, " + fixed(r.route.length_m)
                    + "] for route '" + r.route.route_id + "'");
    r.events = fiber::apply_incident(r.route, r.events, spec);
    tag_key = r.route.route_id;
  } else if (spec.kind == fiber::IncidentKind::device_overheat) {
    auto it = devices_.find(spec.target);
    if (it == devices_.end())
      throw Error(Errc::not_found, "unknown device '" + spec.target + "'");
    auto& sim = it->second.sim;
    sim.add_drift(spec.magnitude * sim.profile().failure_direction());
    tag_key = spec.target;
  } else {
    const auto& hosts = config_.siem.quiet.hosts;
    if (std::find(hosts.begin(), hosts.end(), spec.target) == hosts.end())
      throw Error(Errc::not_found, "unknown log source '" + spec.target + "'");
    if (!(spec.magnitude >= 1.0))
      throw Error(Errc::invalid_argument, "login_burst magnitude must be >= 1");
    auto burst = siem::login_burst_records(
      spec, derive_seed(logs_.seed, 0xB0000 + incidents_));
    tag_key = burst.front().fields.at("src_ip");
    logs_.pending.insert(logs_.pending.end(), burst.begin(), burst.end());
    std::stable_sort(logs_.pending.begin(), logs_.pending.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  }
  ++incidents_;
  pending_tags_[tag_key].insert("injected-by-demo");
  pending_tags_[tag_key].insert("incident:" + spec.incident_id);
  return spec.incident_id;
}

Alert Monitor::transition_alert(const std::string& alert_id, AlertAction action,
                                const std::optional<std::string>& tag) {
  return store_.transition(alert_id, action, tag, clock_->now());
}

void Monitor::scan_route(RouteState& r, UtcTime at) {
  auto params = config_.otdr;
  params.seed = derive_seed(r.seed, r.scans++);
  const auto trace = fiber::synthesize_trace(r.route, r.events, params, at);
  ingest_trace_locked(trace);
}

void Monitor::sample_device(const std::string& id, DeviceState& d, UtcTime at) {
  const double step = config_.telemetry_interval_s;
  d.window.push_back(d.started ? d.sim.advance(step) : d.sim.sample());
  d.started = true;
  while (d.window.size() > config_.telemetry.window)
    d.window.pop_front();
  if (d.window.size() < 3)
    return;
  pm::TelemetrySeries s;
  s.device_id = id;
  s.metric_name = d.sim.profile().metric_name;
  s.step_s = step;
  s.t0 = add_seconds(at, -step * static_cast<double>(d.window.size() - 1));
  s.values.assign(d.window.begin(), d.window.end());
  ingest_telemetry_locked(s);
}

void Monitor::poll_logs(UtcTime at) {
  const double interval = config_.log_poll_interval_s;
  const UtcTime from = add_seconds(at, -interval);
  auto fresh = siem::generate_log_stream(std::nullopt, config_.siem.quiet, from,
                                         interval, derive_seed(logs_.seed, logs_.polls++));
  std::erase_if(fresh, [&](const auto& r) { return r.timestamp < from || r.timestamp >= at; });
  auto due_end = std::find_if(logs_.pending.begin(), logs_.pending.end(),
                              [&](const auto& r) { return r.timestamp >= at; });
  fresh.insert(fresh.end(), logs_.pending.begin(), due_end);
  logs_.pending.erase(logs_.pending.begin(), due_end);
  // Everything goes through the wire format, as it would from a collector.
  for (auto& r : fresh)
    r = siem::parse_log_line(siem::format_log_line(r));
  std::stable_sort(fresh.begin(), fresh.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });

  auto& buf = logs_.buffer;
  buf.insert(buf.end(), fresh.begin(), fresh.end());
  std::stable_sort(buf.begin(), buf.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  const auto bucket_ms =
    static_cast<std::int64_t>(std::llround(config_.siem.bucket_s * 1000.0));
  auto cutoff_ms = add_seconds(at, -config_.siem.history_s).time_since_epoch().count();
  cutoff_ms -= ((cutoff_ms % bucket_ms) + bucket_ms) % bucket_ms;
  const UtcTime cutoff{std::chrono::milliseconds{cutoff_ms}};
  std::erase_if(buf, [&](const auto& r) { return r.timestamp < cutoff; });
  std::erase_if(logs_.reported, [&](const auto& kv) {
    return std::get<2>(kv.first) < cutoff_ms;
  });

  auto events = siem::apply_rules(buf, config_.rules);
  auto rate = siem::score_log_rate(buf, config_.siem.bucket_s, config_.siem.detector);
  events.insert(events.end(), rate.begin(), rate.end());
  std::vector<siem::SecurityEvent> fresh_events;
  for (const auto& e : events) {
    if (e.window_end < from)
      continue;
    const auto key = std::make_tuple(e.source_id, e.group_key,
                                     e.window_start.time_since_epoch().count());
    auto [it, inserted] = logs_.reported.emplace(key, e.count);
    if (!inserted) {
      if (it->second == e.count)
        continue;
      it->second = e.count;
    }
    fresh_events.push_back(e);
  }
  raise_security(fresh_events);
}

UtcTime Monitor::next_due() const {
  std::lock_guard lock(mutex_);
  UtcTime next = logs_.next_poll;
  for (const auto& r : routes_)
    next = std::min(next, r.next_scan);
  for (const auto& [id, d] : devices_)
    next = std::min(next, d.next_sample);
  return next;
}

void Monitor::run_until(UtcTime end) {
  for (;;) {
    std::lock_guard lock(mutex_);
    // Earliest task first; ties go routes, devices, logs.
    UtcTime best = end + std::chrono::milliseconds{1};
    RouteState* route = nullptr;
    std::pair<const std::string, DeviceState>* device = nullptr;
    bool logs = false;
    for (auto& r : routes_)
      if (r.next_scan < best) {
        best = r.next_scan;
        route = &r;
      }
    for (auto& kv : devices_)
      if (kv.second.next_sample < best) {
        best = kv.second.next_sample;
        device = &kv;
        route = nullptr;
      }
    if (logs_.next_poll < best) {
      best = logs_.next_poll;
      logs = true;
      route = nullptr;
      device = nullptr;
    }
    if (best > end)
      return;
    if (route) {
      route->next_scan = add_seconds(best, config_.scan_interval_s);
      scan_route(*route, best);
    } else if (device) {
      device->second.next_sample = add_seconds(best, config_.telemetry_interval_s);
      sample_device(device->first, device->second, best);
    } else if (logs) {
      logs_.next_poll = add_seconds(best, config_.log_poll_interval_s);
      poll_logs(best);
    }
  }
}

void Monitor::run_realtime(std::stop_token stop) {
  std::mutex m;
  std::condition_variable_any cv;
  while (!stop.stop_requested()) {
    const auto now = clock_->now();
    run_until(now);
    const auto wake = std::min(next_due(), now + std::chrono::seconds{1});
    const auto wait = std::max(wake - clock_->now(), std::chrono::milliseconds{1});
    std::unique_lock lock(m);
    cv.wait_for(lock, stop, wait, [] { return false; });
  }
}

const fiber::FiberRoute& Monitor::route(const std::string& route_id) const {
  std::lock_guard lock(mutex_);
  return route_state(route_id).route;
}

std::optional<fiber::OtdrTrace> Monitor::latest_trace(
  const std::string& route_id) const {
  std::lock_guard lock(mutex_);
  return route_state(route_id).latest;
}

std::optional<std::vector<otdr::DetectedEvent>> Monitor::latest_events(
  const std::string& route_id) const {
  std::lock_guard lock(mutex_);
  const auto& r = route_state(route_id);
  if (!r.latest)
    return std::nullopt;
  return r.latest_events;
}

std::optional<pm::RulEstimate> Monitor::device_health(
  const std::string& device_id) const {
  std::lock_guard lock(mutex_);
  auto it = devices_.find(device_id);
  if (it == devices_.end())
    throw Error(Errc::not_found, "unknown device '" + device_id + "'");
  return it->second.health;
}

json Monitor::geojson() const {
  const auto alerts = store_.list();
  return geo::route_to_geojson(config_.routes, alerts).document;
}

std::size_t Monitor::traces_processed() const {
  std::lock_guard lock(mutex_);
  return traces_processed_;
}

} // namespace deepalm::service
