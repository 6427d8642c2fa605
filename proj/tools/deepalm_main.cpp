// deepalm command-line entry point.
//
// Exit codes: 0 success (no fault), 1 fault found (analyze only), 2 usage or
// configuration error.

#include "deepalm/api.hpp"
#include "deepalm/json_io.hpp"
#include "deepalm/monitor.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

namespace {

using namespace deepalm;
using nlohmann::json;

constexpr int exit_ok = 0;
constexpr int exit_fault = 1;
constexpr int exit_usage = 2;

std::atomic<bool> interrupted{false};

extern "C" void on_signal(int) {
  interrupted = true;
}

std::string opt_num(const std::optional<double>& v, int digits) {
  if (!v)
    return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

void print_events(const std::vector<otdr::DetectedEvent>& events) {
  std::printf("%-4s %12s %-11s %9s %11s %6s\n", "#", "position_m", "kind",
              "loss_db", "refl_db", "conf");
  int i = 0;
  for (const auto& e : events)
    std::printf("%-4d %12.1f %-11s %9.3f %11s %6.2f\n", ++i, e.position_m,
                std::string(otdr::to_string(e.kind)).c_str(), e.loss_db,
                opt_num(e.reflectance_db, 2).c_str(), e.confidence);
  if (events.empty())
    std::printf("(no events)\n");
}

// Installed events for diagnosis: the baseline's ground truth when the
// file carries it, otherwise what was detected on the baseline.
fiber::FiberRoute pseudo_route(const fiber::OtdrTrace& baseline,
                               const std::vector<otdr::DetectedEvent>& detected) {
  fiber::FiberRoute r;
  r.route_id = baseline.route_id;
  r.length_m = baseline.span_m();
  if (baseline.ground_truth) {
    r.baseline_events = *baseline.ground_truth;
  } else {
    for (const auto& e : detected)
      r.baseline_events.push_back(
        {e.position_m,
         e.kind == otdr::DetectedKind::reflective ? fiber::EventKind::connector
                                                  : fiber::EventKind::splice,
         e.loss_db, e.reflectance_db});
  }
  return r;
}

int cmd_analyze(const std::string& trace_path, const std::string& baseline_path,
                const std::string& route_path, bool as_json) {
  fiber::OtdrTrace trace, baseline;
  std::optional<fiber::FiberRoute> route;
  try {
    trace = trace_from_document(read_json_file(trace_path));
    if (!baseline_path.empty())
      baseline = trace_from_document(read_json_file(baseline_path));
    if (!route_path.empty())
      route = route_from_document(read_json_file(route_path));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  }
  const otdr::AnalysisSettings a;
  const auto cur = otdr::smooth_trace(trace, a.smooth_window);
  const auto events =
    otdr::detect_events(cur, a.detector, a.min_loss_db, a.min_peak_db);
  if (baseline_path.empty()) {
    if (as_json)
      std::cout << json(events).dump(2) << '\n';
    else
      print_events(events);
    return exit_ok;
  }
  const auto base = otdr::smooth_trace(baseline, a.smooth_window);
  const auto diff = otdr::compare_baseline(
    cur, base, a.loss_tolerance_db,
    a.position_tolerance_spacings * trace.params.sample_spacing_m, a);
  if (!route)
    route = pseudo_route(
      baseline, otdr::detect_events(base, a.detector, a.min_loss_db, a.min_peak_db));
  const auto diag = otdr::diagnose_fault(diff, *route);
  if (as_json) {
    std::cout << json{{"events", events}, {"diff", diff}, {"diagnosis", diag}}.dump(2)
              << '\n';
  } else {
    print_events(events);
    std::printf("\nfiber end: baseline %.1f m, current %.1f m (shift %+.1f m)\n",
                diff.baseline_end_m, diff.current_end_m, diff.end_shift_m);
    std::printf("new %zu, vanished %zu, changed %zu\n", diff.new_events.size(),
                diff.vanished_events.size(), diff.changed_events.size());
    std::printf("\ndiagnosis: %s", std::string(otdr::to_string(diag.fault_kind)).c_str());
    if (diag.position_m)
      std::printf(" at %.1f m", *diag.position_m);
    std::printf(" [%s]\n", std::string(to_string(diag.severity)).c_str());
    if (!diag.evidence.empty())
      std::printf("evidence: %s\n", diag.evidence.c_str());
    std::printf("action: %s\n", diag.recommended_action.c_str());
  }
  return diag.fault_kind == otdr::FaultKind::none ? exit_ok : exit_fault;
}

fiber::IncidentKind incident_alias(const std::string& s) {
  static const std::map<std::string, fiber::IncidentKind> short_names{
    {"cut", fiber::IncidentKind::fiber_cut},
    {"bend", fiber::IncidentKind::fiber_bend},
    {"connector", fiber::IncidentKind::connector_degradation},
    {"sensor", fiber::IncidentKind::sensor_trigger},
  };
  if (auto it = short_names.find(s); it != short_names.end())
    return it->second;
  return fiber::incident_kind_from_string(s);
}

fiber::IncidentSpec parse_incident(const std::string& text,
                                   const std::string& route_id) {
  fiber::IncidentSpec spec;
  const auto c1 = text.find(':');
  if (c1 == std::string::npos)
    throw Error(Errc::invalid_argument, "incident must be KIND:POS[:MAG]");
  spec.kind = incident_alias(text.substr(0, c1));
  if (!fiber::is_fiber_incident(spec.kind))
    throw Error(Errc::invalid_argument, "simulate only takes fiber incidents");
  const auto c2 = text.find(':', c1 + 1);
  try {
    std::size_t used = 0;
    const auto pos_text = text.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1);
    spec.position_m = std::stod(pos_text, &used);
    if (used != pos_text.size())
      throw std::invalid_argument("trailing characters");
    spec.magnitude = spec.kind == fiber::IncidentKind::fiber_cut ? 0.0 : 1.0;
    if (c2 != std::string::npos) {
      const auto mag_text = text.substr(c2 + 1);
      spec.magnitude = std::stod(mag_text, &used);
      if (used != mag_text.size())
        throw std::invalid_argument("trailing characters");
    }
  } catch (const std::logic_error&) {
    throw Error(Errc::invalid_argument, "bad number in incident '" + text + "'");
  }
  spec.incident_id = "cli";
  spec.target = route_id;
  return spec;
}

int cmd_simulate(const std::string& route_path, const std::string& incident,
                 std::optional<std::uint64_t> seed, const std::string& captured_at,
                 const std::string& out_path) {
  std::string text;
  try {
    const auto doc = read_json_file(route_path);
    const auto route = route_from_document(doc);
    route.validate();
    fiber::OtdrParams params;
    if (auto it = doc.find("otdr"); it != doc.end())
      params = it->get<fiber::OtdrParams>();
    if (seed)
      params.seed = *seed;
    params.validate();
    auto events = route.baseline_events;
    std::sort(events.begin(), events.end(),
              [](const auto& a, const auto& b) { return a.position_m < b.position_m; });
    if (!incident.empty())
      events = fiber::apply_incident(route, events, parse_incident(incident, route.route_id));
    const auto trace = fiber::synthesize_trace(route, events, params,
                                               parse_rfc3339(captured_at));
    text = trace_document(trace).dump() + "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return exit_ok;
  }
  try {
    write_text_file(out_path, text);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  }
  return exit_ok;
}

int cmd_serve(const std::string& config_flag) {
  const auto path = service::resolve_config_path(config_flag);
  if (path.empty()) {
    std::cerr << "error: no config given (--config or DEEPALM_CONFIG)\n";
    return exit_usage;
  }
  std::unique_ptr<service::Monitor> monitor;
  try {
    monitor = std::make_unique<service::Monitor>(
      service::load_config(path), std::make_shared<service::WallClock>());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  }
  const auto& cfg = monitor->config();
  service::ApiServer api(*monitor);
  const int port = api.bind(cfg.listen_host, cfg.listen_port);
  if (port <= 0) {
    std::cerr << "error: cannot listen on " << cfg.listen_host << ':'
              << cfg.listen_port << '\n';
    return exit_usage;
  }
  std::printf("deepalm %s listening on http://%s:%d\n",
              std::string(service::version).c_str(), cfg.listen_host.c_str(), port);
  std::fflush(stdout);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::jthread scheduler([&](std::stop_token st) { monitor->run_realtime(st); });
  std::jthread watcher([&](std::stop_token st) {
    while (!st.stop_requested() && !interrupted)
      std::this_thread::sleep_for(std::chrono::milliseconds{100});
    api.stop();
  });
  api.serve();
  watcher.request_stop();
  scheduler.request_stop();
  monitor->store().stream().close();
  return exit_ok;
}

int cmd_report(const std::string& config_flag, bool as_json) {
  std::vector<service::Alert> alerts;
  service::MonitorConfig cfg;
  try {
    const auto path = service::resolve_config_path(config_flag);
    if (path.empty())
      throw Error(Errc::config_error, "no config given (--config or DEEPALM_CONFIG)");
    cfg = service::load_config(path);
    if (cfg.persistence_path.empty())
      throw Error(Errc::config_error, "config has no persistence_path");
    alerts = service::replay_alerts(service::read_journal(cfg.persistence_path));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  }
  std::map<std::string, int> by_status, by_severity, by_domain;
  std::map<std::string, std::string> device_state;
  for (const auto& d : cfg.devices)
    device_state[d.device_id] = "ok";
  for (const auto& a : alerts) {
    ++by_status[std::string(to_string(a.status))];
    ++by_severity[std::string(to_string(a.severity))];
    ++by_domain[std::string(to_string(a.source_domain))];
    if (a.source_domain == service::Domain::hardware && a.is_active()
        && device_state.contains(a.route_or_device))
      device_state[a.route_or_device] = a.kind;
  }
  if (as_json) {
    json devices = json::array();
    for (const auto& [id, state] : device_state)
      devices.push_back({{"device_id", id}, {"state", state}});
    std::cout << json{{"alerts", alerts},
                      {"summary",
                       {{"total", alerts.size()},
                        {"by_status", by_status},
                        {"by_severity", by_severity},
                        {"by_domain", by_domain}}},
                      {"devices", devices}}
                   .dump(2)
              << '\n';
    return exit_ok;
  }
  std::printf("%-26s %-8s %-20s %-8s %-12s %-14s %5s\n", "alert_id", "domain",
              "kind", "severity", "status", "target", "count");
  for (const auto& a : alerts)
    std::printf("%-26s %-8s %-20s %-8s %-12s %-14s %5lld\n", a.alert_id.c_str(),
                std::string(to_string(a.source_domain)).c_str(), a.kind.c_str(),
                std::string(to_string(a.severity)).c_str(),
                std::string(to_string(a.status)).c_str(),
                a.route_or_device.c_str(),
                static_cast<long long>(a.occurrence_count));
  std::printf("\n%zu alerts", alerts.size());
  for (const auto& [k, n] : by_status)
    std::printf(", %d %s", n, k.c_str());
  std::printf("\n");
  for (const auto& [id, state] : device_state)
    std::printf("device %s: %s\n", id.c_str(), state.c_str());
  return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepALM optical network monitor"};
  app.require_subcommand(1);

  auto* serve = app.add_subcommand("serve", "Run the scheduler and HTTP API");
  std::string serve_config;
  serve->add_option("--config", serve_config,
                    "deepalm-config/1 file (default: $DEEPALM_CONFIG)");

  auto* analyze = app.add_subcommand("analyze", "Detect events in a trace");
  std::string trace_path, baseline_path, route_path;
  bool analyze_json = false;
  analyze->add_option("trace", trace_path, "deepalm-trace/1 file")->required();
  analyze->add_option("--baseline", baseline_path, "Baseline trace to compare against");
  analyze->add_option("--route", route_path,
                      "deepalm-route/1 file with the installed events");
  analyze->add_flag("--json", analyze_json, "Machine-readable output");

  auto* simulate = app.add_subcommand("simulate", "Write a synthetic trace");
  std::string sim_route, sim_incident, sim_out, sim_time = "2026-01-01T00:00:00Z";
  std::optional<std::uint64_t> sim_seed;
  simulate->add_option("--route", sim_route, "deepalm-route/1 file")->required();
  simulate->add_option("--incident", sim_incident,
                       "KIND:POS[:MAG], KIND one of cut, bend, connector, sensor");
  simulate->add_option("--seed", sim_seed, "Noise seed");
  simulate->add_option("--captured-at", sim_time, "Capture time (RFC 3339)")
    ->capture_default_str();
  simulate->add_option("-o,--output", sim_out, "Output file (default: stdout)");

  auto* report = app.add_subcommand("report", "Summarize alerts from the journal");
  std::string report_config;
  bool report_json = false;
  report->add_option("--config", report_config,
                     "deepalm-config/1 file (default: $DEEPALM_CONFIG)");
  report->add_flag("--json", report_json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*serve)
      return cmd_serve(serve_config);
    if (*analyze)
      return cmd_analyze(trace_path, baseline_path, route_path, analyze_json);
    if (*simulate)
      return cmd_simulate(sim_route, sim_incident, sim_seed, sim_time, sim_out);
    if (*report)
      return cmd_report(report_config, report_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return exit_usage;
}
