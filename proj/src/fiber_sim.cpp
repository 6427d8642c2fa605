#include "deepalm/fiber_sim.hpp"

#include "deepalm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deepalm::fiber {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::connector:
      return "connector";
    case EventKind::splice:
      return "splice";
    case EventKind::bend:
      return "bend";
    case EventKind::cut:
      return "cut";
    case EventKind::sensor_trigger:
      return "sensor_trigger";
    case EventKind::fiber_end:
      return "fiber_end";
  }
  return "splice";
}

EventKind event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::connector, EventKind::splice, EventKind::bend,
                 EventKind::cut, EventKind::sensor_trigger,
                 EventKind::fiber_end})
    if (to_string(k) == s)
      return k;
  throw Error(Errc::invalid_argument,
              "unknown event kind '" + std::string(s) + "'");
}

std::string_view to_string(IncidentKind k) {
  switch (k) {
    case IncidentKind::fiber_cut:
      return "fiber_cut";
    case IncidentKind::fiber_bend:
      return "fiber_bend";
    case IncidentKind::connector_degradation:
      return "connector_degradation";
    case IncidentKind::sensor_trigger:
      return "sensor_trigger";
    case IncidentKind::device_overheat:
      return "device_overheat";
    case IncidentKind::login_burst:
      return "login_burst";
  }
  return "fiber_cut";
}

IncidentKind incident_kind_from_string(std::string_view s) {
  for (auto k : {IncidentKind::fiber_cut, IncidentKind::fiber_bend,
                 IncidentKind::connector_degradation,
                 IncidentKind::sensor_trigger, IncidentKind::device_overheat,
                 IncidentKind::login_burst})
    if (to_string(k) == s)
      return k;
  throw Error(Errc::invalid_argument,
              "unknown incident kind '" + std::string(s) + "'");
}

std::vector<std::string> FiberRoute::violations() const {
  std::vector<std::string> out;
  const std::string where = "route '" + route_id + "': ";
  if (route_id.empty())
    out.push_back(where + "route_id must not be empty");
  if (!(length_m > 0.0))
    out.push_back(where + "length_m must be > 0");
  if (!(attenuation_db_per_km > 0.0))
    out.push_back(where + "attenuation_db_per_km must be > 0");
  if (!(group_index > 0.0))
    out.push_back(where + "group_index must be > 0");
  if (waypoints.size() < 2) {
    out.push_back(where + "at least two waypoints are required");
  } else {
    if (waypoints.front().cumulative_fiber_m != 0.0)
      out.push_back(where + "first waypoint must be at 0 m");
    if (waypoints.back().cumulative_fiber_m != length_m)
      out.push_back(where + "last waypoint must be at length_m");
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
      const auto& w = waypoints[i];
      if (i > 0 && !(w.cumulative_fiber_m > waypoints[i - 1].cumulative_fiber_m))
        out.push_back(where + "waypoint distances must be strictly increasing");
      if (!(w.latitude_deg >= -90.0 && w.latitude_deg <= 90.0))
        out.push_back(where + "latitude out of range");
      if (!(w.longitude_deg >= -180.0 && w.longitude_deg <= 180.0))
        out.push_back(where + "longitude out of range");
    }
  }
  bool terminal_seen = false;
  for (std::size_t i = 0; i < baseline_events.size(); ++i) {
    const auto& e = baseline_events[i];
    if (!(e.position_m >= 0.0 && e.position_m <= length_m))
      out.push_back(where + "event outside the route");
    if (i > 0 && e.position_m < baseline_events[i - 1].position_m)
      out.push_back(where + "events must be sorted by position");
    if (terminal_seen)
      out.push_back(where + "event beyond terminal event");
    if (!(e.loss_db >= 0.0))
      out.push_back(where + "loss_db must be >= 0");
    if (e.reflectance_db && !(*e.reflectance_db <= 0.0))
      out.push_back(where + "reflectance_db must be <= 0");
    terminal_seen = terminal_seen || is_terminal(e.kind);
  }
  return out;
}

void FiberRoute::validate() const {
  const auto v = violations();
  if (!v.empty())
    throw Error(Errc::invalid_argument, v.front());
}

std::vector<std::string> OtdrParams::violations() const {
  std::vector<std::string> out;
  if (!(sample_spacing_m > 0.0))
    out.push_back("otdr: sample_spacing_m must be > 0");
  if (!(pulse_width_m > 0.0))
    out.push_back("otdr: pulse_width_m must be > 0");
  if (!(noise_std_db_linear_equiv >= 0.0))
    out.push_back("otdr: noise_std_db_linear_equiv must be >= 0");
  if (!(noise_floor_db < launch_level_db))
    out.push_back("otdr: noise_floor_db must be below launch_level_db");
  if (!(sample_spacing_m <= pulse_width_m * 10.0))
    out.push_back("otdr: sample_spacing_m must be <= 10 * pulse_width_m");
  if (!(saturation() > noise_floor_db))
    out.push_back("otdr: saturation_db must be above noise_floor_db");
  return out;
}

void OtdrParams::validate() const {
  const auto v = violations();
  if (!v.empty())
    throw Error(Errc::invalid_argument, v.front());
}

namespace {

void check_events(const FiberRoute& route,
                  std::span<const FiberEventSpec> events) {
  bool terminal_seen = false;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (i > 0 && e.position_m < events[i - 1].position_m)
      throw Error(Errc::invalid_argument, "events are not sorted by position");
    if (terminal_seen)
      throw Error(Errc::invalid_argument, "event beyond terminal event");
    if (!(e.position_m >= 0.0 && e.position_m <= route.length_m))
      throw Error(Errc::invalid_argument, "event outside the route");
    if (!(e.loss_db >= 0.0))
      throw Error(Errc::invalid_argument, "event loss must be >= 0");
    terminal_seen = is_terminal(e.kind);
  }
}

} // namespace

OtdrTrace synthesize_trace(const FiberRoute& route,
                           std::span<const FiberEventSpec> events,
                           const OtdrParams& params, UtcTime captured_at) {
  route.validate();
  params.validate();
  check_events(route, events);

  const double dz = params.sample_spacing_m;
  const auto n = static_cast<std::size_t>(std::floor(route.length_m / dz)) + 1;
  const double alpha_per_m = route.attenuation_db_per_km / 1000.0;
  const double sigma = params.noise_std_db_linear_equiv;
  const double saturation = params.saturation();
  const double lower = params.noise_floor_db - 3.0 * sigma;

  OtdrTrace trace;
  trace.route_id = route.route_id;
  trace.captured_at = captured_at;
  trace.params = params;
  trace.samples.resize(n);
  trace.ground_truth.emplace(events.begin(), events.end());

  // Walk the samples once, folding in events as their positions are passed.
  std::size_t next_event = 0;
  double cumulative_loss = 0.0;
  bool terminated = false;
  struct Peak {
    double start;
    double end;
    double height;
    double line_loss; // cumulative loss of the line the peak sits on
  };
  std::vector<Peak> peaks;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = static_cast<double>(i) * dz;
    while (next_event < events.size() && events[next_event].position_m <= z) {
      const auto& e = events[next_event];
      if (e.reflectance_db) {
        const double h = std::max(
          0.0, (*e.reflectance_db - params.backscatter_coeff_db) / 2.0);
        peaks.push_back(
          {e.position_m, e.position_m + params.pulse_width_m, h,
           cumulative_loss});
      }
      if (is_terminal(e.kind))
        terminated = true;
      else
        cumulative_loss += e.loss_db;
      ++next_event;
    }
    double level = terminated ? params.noise_floor_db
                              : params.launch_level_db - alpha_per_m * z
                                  - cumulative_loss;
    for (const auto& p : peaks) {
      if (z >= p.start && z < p.end) {
        const double line = params.launch_level_db - alpha_per_m * z
                            - p.line_loss;
        level = std::max(level, std::min(line + p.height, saturation));
      }
    }
    trace.samples[i] = level;
  }

  Xorshift64Star rng{params.seed};
  for (auto& s : trace.samples) {
    if (sigma > 0.0)
      s += sigma * rng.gaussian();
    s = std::clamp(s, lower, saturation);
  }
  return trace;
}

double sample_spacing_from_time(double sample_interval_s, double group_index) {
  if (!(sample_interval_s > 0.0) || !(group_index > 0.0))
    throw Error(Errc::invalid_argument,
                "sample interval and group index must be > 0");
  return speed_of_light_m_per_s * sample_interval_s / (2.0 * group_index);
}

std::vector<FiberEventSpec> apply_incident(
  const FiberRoute& route, std::span<const FiberEventSpec> events,
  const IncidentSpec& incident) {
  if (!is_fiber_incident(incident.kind))
    throw Error(Errc::invalid_argument,
                "incident kind '" + std::string(to_string(incident.kind))
                  + "' does not apply to a fiber route");
  if (incident.target != route.route_id)
    throw Error(Errc::not_found, "unknown route '" + incident.target + "'");
  if (!incident.position_m)
    throw Error(Errc::invalid_argument, "fiber incident needs position_m");
  const double p = *incident.position_m;
  if (!(p >= 0.0 && p <= route.length_m))
    throw Error(Errc::invalid_argument, "position outside the route");
  for (const auto& e : events)
    if (is_terminal(e.kind) && e.position_m < p)
      throw Error(Errc::invalid_argument,
                  "position lies beyond the existing fiber end");

  std::vector<FiberEventSpec> out(events.begin(), events.end());
  auto insert_sorted = [&out](FiberEventSpec e) {
    auto it = std::upper_bound(
      out.begin(), out.end(), e.position_m,
      [](double pos, const FiberEventSpec& x) { return pos < x.position_m; });
    // Keep terminal events last at equal positions.
    while (it != out.begin() && is_terminal(std::prev(it)->kind)
           && std::prev(it)->position_m == e.position_m)
      --it;
    out.insert(it, e);
  };

  switch (incident.kind) {
    case IncidentKind::fiber_cut: {
      std::erase_if(out, [p](const FiberEventSpec& e) {
        return e.position_m > p || (is_terminal(e.kind) && e.position_m == p);
      });
      out.push_back({p, EventKind::cut, 0.0, -40.0});
      break;
    }
    case IncidentKind::fiber_bend:
      if (!(incident.magnitude >= 0.0))
        throw Error(Errc::invalid_argument, "bend magnitude must be >= 0");
      insert_sorted({p, EventKind::bend, incident.magnitude, std::nullopt});
      break;
    case IncidentKind::connector_degradation: {
      auto nearest = out.end();
      for (auto it = out.begin(); it != out.end(); ++it)
        if (it->kind == EventKind::connector
            && (nearest == out.end()
                || std::abs(it->position_m - p)
                     < std::abs(nearest->position_m - p)))
          nearest = it;
      if (nearest == out.end())
        throw Error(Errc::invalid_argument, "route has no connector");
      nearest->loss_db = std::max(0.0, nearest->loss_db + incident.magnitude);
      break;
    }
    case IncidentKind::sensor_trigger:
      if (!(incident.magnitude >= 0.0))
        throw Error(Errc::invalid_argument, "sensor magnitude must be >= 0");
      insert_sorted(
        {p, EventKind::sensor_trigger, 0.5 * incident.magnitude, std::nullopt});
      break;
    default:
      break;
  }
  return out;
}

} // namespace deepalm::fiber
