#include "deepalm/predictive_maintenance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deepalm::pm {

std::string_view to_string(MaintenanceFlag f) {
  switch (f) {
    case MaintenanceFlag::ok:
      return "ok";
    case MaintenanceFlag::plan_maintenance:
      return "plan_maintenance";
    case MaintenanceFlag::critical:
      return "critical";
  }
  return "ok";
}

std::vector<std::string> DeviceProfile::violations() const {
  std::vector<std::string> out;
  const std::string where = "device '" + device_id + "': ";
  if (device_id.empty())
    out.push_back(where + "device_id must not be empty");
  if (failure_threshold == nominal)
    out.push_back(where + "failure_threshold must differ from nominal");
  if (drift_per_hour != 0.0
      && (drift_per_hour > 0.0) != (failure_threshold > nominal))
    out.push_back(where + "drift_per_hour must point towards the threshold");
  if (!(noise_std >= 0.0))
    out.push_back(where + "noise_std must be >= 0");
  return out;
}

void TelemetrySeries::validate() const {
  if (!(step_s > 0.0))
    throw Error(Errc::invalid_argument, "step_s must be > 0");
  if (values.empty())
    throw Error(Errc::invalid_argument, "telemetry series is empty");
  for (double v : values)
    if (!std::isfinite(v))
      throw Error(Errc::invalid_argument, "telemetry value is not finite");
}

TelemetrySeries generate_telemetry(const DeviceProfile& profile, double hours,
                                   double step_s, UtcTime t0) {
  if (!(hours > 0.0) || !(step_s > 0.0))
    throw Error(Errc::invalid_argument, "hours and step_s must be > 0");
  TelemetrySeries series{profile.device_id, profile.metric_name, t0, step_s,
                         {}};
  const auto n =
    static_cast<std::size_t>(std::floor(hours * 3600.0 / step_s + 1e-9)) + 1;
  series.values.reserve(n);
  Xorshift64Star rng{profile.seed};
  for (std::size_t i = 0; i < n; ++i) {
    const double t_hours = static_cast<double>(i) * step_s / 3600.0;
    double v = profile.nominal + profile.drift_per_hour * t_hours;
    if (profile.noise_std > 0.0)
      v += profile.noise_std * rng.gaussian();
    series.values.push_back(v);
  }
  return series;
}

double acceleration_factor(double activation_energy_ev, double t_use_k,
                           double t_stress_k) {
  if (!(activation_energy_ev > 0.0) || !(t_use_k > 0.0) || !(t_stress_k > 0.0))
    throw Error(Errc::invalid_argument,
                "activation energy and temperatures must be > 0");
  if (t_use_k == t_stress_k)
    return 1.0;
  return std::exp(activation_energy_ev / boltzmann_ev_per_k
                  * (1.0 / t_use_k - 1.0 / t_stress_k));
}

TelemetrySeries derate_series(const TelemetrySeries& series, double af) {
  if (!(af >= 1.0))
    throw Error(Errc::invalid_argument, "acceleration factor must be >= 1");
  TelemetrySeries out = series;
  out.step_s = series.step_s * af;
  return out;
}

RulEstimate estimate_rul(const TelemetrySeries& series,
                         const DeviceProfile& profile, std::size_t window) {
  series.validate();
  if (window < 2 || window > series.values.size())
    throw Error(Errc::invalid_argument,
                "window must be >= 2 and <= the number of samples");
  const std::size_t first = series.values.size() - window;
  std::vector<double> t(window);
  std::vector<double> y(series.values.begin() + static_cast<long>(first),
                        series.values.end());
  for (std::size_t i = 0; i < window; ++i)
    t[i] = static_cast<double>(first + i) * series.step_s / 3600.0;
  const auto fit = detect::fit_line(t, y);

  RulEstimate est;
  est.device_id = series.device_id;
  est.slope_per_hour = fit.slope;
  est.fit_residual_std = fit.residual_std;
  est.current_fit = fit.at(t.back());
  est.estimated_at = series.time_of(series.values.size() - 1);

  const double span = profile.failure_threshold - profile.nominal;
  est.health_index =
    std::clamp((profile.failure_threshold - est.current_fit) / span, 0.0, 1.0);

  const bool towards = fit.slope != 0.0
                       && (fit.slope > 0.0) == (span > 0.0);
  if (!towards) {
    est.rul_hours = std::numeric_limits<double>::infinity();
  } else {
    est.rul_hours = std::max(
      0.0, (profile.failure_threshold - est.current_fit) / fit.slope);
  }

  double sxx = 0.0;
  const double mt = (t.front() + t.back()) / 2.0;
  for (double ti : t)
    sxx += (ti - mt) * (ti - mt);
  const double dof = window > 2 ? static_cast<double>(window - 2) : 1.0;
  const double se = std::sqrt(fit.residual_std * fit.residual_std
                              * static_cast<double>(window) / dof / sxx);
  est.slope_t_stat = se > 0.0 ? std::abs(fit.slope) / se
                              : (fit.slope != 0.0
                                   ? std::numeric_limits<double>::infinity()
                                   : 0.0);
  return est;
}

MaintenanceFlag maintenance_flag(const RulEstimate& estimate,
                                 double horizon_hours) {
  if (!(horizon_hours > 0.0))
    throw Error(Errc::invalid_argument, "horizon must be > 0");
  if (estimate.health_index < 0.1 || estimate.rul_hours < horizon_hours / 4.0)
    return MaintenanceFlag::critical;
  if (estimate.rul_hours < horizon_hours)
    return MaintenanceFlag::plan_maintenance;
  return MaintenanceFlag::ok;
}

std::optional<double> detect_drift_onset(const TelemetrySeries& series,
                                         const DeviceProfile& profile,
                                         const detect::DetectorConfig& config) {
  series.validate();
  detect::Series s{series.values, 0, series.step_s};
  const auto alarms = detect::cusum_changepoints(s, config, profile.nominal);
  const auto wanted = profile.failure_direction() > 0.0 ? detect::Direction::up
                                                        : detect::Direction::down;
  for (const auto& a : alarms) {
    if (a.direction != wanted)
      continue;
    const auto onset = detect::cusum_change_onset(s, config, profile.nominal, a);
    return static_cast<double>(onset) * series.step_s / 3600.0;
  }
  return std::nullopt;
}

DeviceSimulator::DeviceSimulator(DeviceProfile profile)
  : profile_{std::move(profile)},
    rng_{profile_.seed},
    anchor_value_{profile_.nominal} {
}

void DeviceSimulator::add_drift(double delta_per_hour) {
  anchor_value_ = level_at(elapsed_hours_);
  anchor_hours_ = elapsed_hours_;
  profile_.drift_per_hour += delta_per_hour;
}

double DeviceSimulator::advance(double step_s) {
  elapsed_hours_ += step_s / 3600.0;
  return sample();
}

double DeviceSimulator::sample() {
  double v = level_at(elapsed_hours_);
  if (profile_.noise_std > 0.0)
    v += profile_.noise_std * rng_.gaussian();
  return v;
}

} // namespace deepalm::pm
