#pragma once

#include "deepalm/alert_store.hpp"
#include "deepalm/fiber_sim.hpp"
#include "deepalm/otdr_analysis.hpp"
#include "deepalm/predictive_maintenance.hpp"
#include "deepalm/siem.hpp"

#include <json.hpp>

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stop_token>
#include <string>
#include <tuple>
#include <vector>

namespace deepalm::service {

inline constexpr std::string_view version = "0.1.0";

struct TelemetrySettings {
  /// Samples in the rolling window handed to estimate_rul.
  std::size_t window = 360;
  /// Fewer samples than this update health but never raise an alert.
  std::size_t min_samples = 60;
  double horizon_hours = 168.0;
  /// Trends weaker than this t-statistic never raise an alert.
  double min_trend_t = 5.0;
};

struct SiemSettings {
  double bucket_s = 60.0;
  detect::DetectorConfig detector = default_detector();
  siem::QuietProfile quiet;
  /// How much log history the scheduler keeps for rule windows and the
  /// rate baseline.
  double history_s = 3600.0;

  static detect::DetectorConfig default_detector() {
    detect::DetectorConfig c;
    c.z_threshold = 5.0;
    c.sigma_floor = 5.0;
    return c;
  }
};

struct MonitorConfig {
  std::vector<fiber::FiberRoute> routes;
  std::vector<pm::DeviceProfile> devices;
  std::vector<siem::SecurityRule> rules = siem::default_rules();
  double scan_interval_s = 10.0;
  double telemetry_interval_s = 60.0;
  double log_poll_interval_s = 60.0;
  double dedup_window_s = 60.0;
  /// Journal file; empty keeps alerts in memory only.
  std::string persistence_path;
  fiber::OtdrParams otdr;
  otdr::AnalysisSettings analysis;
  TelemetrySettings telemetry;
  SiemSettings siem;
  std::uint64_t seed = 1;
  /// Scheduler epoch; the wall clock at startup when absent.
  std::optional<UtcTime> start_time;
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;

  std::vector<std::string> violations() const;
};

/// Parses a `deepalm-config/1` document. Throws Errc::config_error whose
/// message lists every violation, one per line.
MonitorConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const MonitorConfig& config);
MonitorConfig load_config(const std::string& path);

/// The explicit path, else $DEEPALM_CONFIG, else empty.
std::string resolve_config_path(const std::string& explicit_path);

/// Runs the three engines over simulated sources and feeds the alert store.
/// Public methods are thread-safe.
class Monitor {
public:
  Monitor(MonitorConfig config, std::shared_ptr<Clock> clock);

  Monitor(const Monitor&) = delete;
  Monitor& operator=(const Monitor&) = delete;

  std::vector<Alert> ingest_trace(const fiber::OtdrTrace& trace);
  std::vector<Alert> ingest_telemetry(const pm::TelemetrySeries& series);
  std::vector<Alert> ingest_logs(std::span<const siem::LogRecord> records);

  /// Hands the incident to the matching simulator; returns its id.
  std::string inject_incident(fiber::IncidentSpec spec);

  Alert transition_alert(const std::string& alert_id, AlertAction action,
                         const std::optional<std::string>& tag);

  /// Runs every scheduled task due at or before `end`, each at its own
  /// due time.
  void run_until(UtcTime end);
  UtcTime next_due() const;
  /// Follows the wall clock until stopped.
  void run_realtime(std::stop_token stop);

  const MonitorConfig& config() const noexcept {
    return config_;
  }
  AlertStore& store() noexcept {
    return store_;
  }
  const fiber::FiberRoute& route(const std::string& route_id) const;
  std::optional<fiber::OtdrTrace> latest_trace(const std::string& route_id) const;
  std::optional<std::vector<otdr::DetectedEvent>> latest_events(
    const std::string& route_id) const;
  std::optional<pm::RulEstimate> device_health(const std::string& device_id) const;
  nlohmann::json geojson() const;
  std::size_t traces_processed() const;

private:
  struct RouteState {
    fiber::FiberRoute route;
    std::vector<fiber::FiberEventSpec> events;
    std::uint64_t seed = 0;
    std::uint64_t scans = 0;
    UtcTime next_scan{};
    std::optional<fiber::OtdrTrace> baseline; // smoothed
    std::optional<fiber::OtdrTrace> latest;
    std::vector<otdr::DetectedEvent> latest_events;
  };
  struct DeviceState {
    pm::DeviceSimulator sim;
    std::deque<double> window;
    bool started = false;
    UtcTime next_sample{};
    std::optional<pm::RulEstimate> health;
  };
  struct LogState {
    std::uint64_t seed = 0;
    std::uint64_t polls = 0;
    UtcTime next_poll{};
    std::vector<siem::LogRecord> buffer;
    std::vector<siem::LogRecord> pending;
    std::map<std::tuple<std::string, std::string, std::int64_t>, int> reported;
  };

  RouteState& route_state(const std::string& route_id);
  const RouteState& route_state(const std::string& route_id) const;
  std::vector<Alert> ingest_trace_locked(const fiber::OtdrTrace& trace);
  std::vector<Alert> ingest_telemetry_locked(const pm::TelemetrySeries& series);
  std::vector<Alert> raise_security(std::span<const siem::SecurityEvent> events);
  Alert submit(Alert candidate, double position_tolerance_m);
  void scan_route(RouteState& r, UtcTime at);
  void sample_device(const std::string& id, DeviceState& d, UtcTime at);
  void poll_logs(UtcTime at);

  MonitorConfig config_;
  std::shared_ptr<Clock> clock_;
  AlertStore store_;
  mutable std::mutex mutex_;
  std::vector<RouteState> routes_;
  std::map<std::string, DeviceState> devices_;
  LogState logs_;
  /// Tags waiting for the next alert on a route, device or group key.
  std::map<std::string, std::set<std::string>> pending_tags_;
  std::uint64_t incidents_ = 0;
  std::size_t traces_processed_ = 0;
};

} // namespace deepalm::service
