#pragma once

#include "deepalm/common.hpp"
#include "deepalm/detector.hpp"
#include "deepalm/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deepalm::pm {

inline constexpr double boltzmann_ev_per_k = 8.617333262e-5;

struct DeviceProfile {
  std::string device_id;
  std::string metric_name;
  double nominal = 0.0;
  double failure_threshold = 1.0;
  double drift_per_hour = 0.0;
  double noise_std = 0.0;
  std::uint64_t seed = 1;

  std::vector<std::string> violations() const;
  /// +1 when the metric fails upwards, -1 when it fails downwards.
  double failure_direction() const noexcept {
    return failure_threshold > nominal ? 1.0 : -1.0;
  }
};

struct TelemetrySeries {
  std::string device_id;
  std::string metric_name;
  UtcTime t0{};
  double step_s = 1.0;
  std::vector<double> values;

  UtcTime time_of(std::size_t i) const {
    return add_seconds(t0, step_s * static_cast<double>(i));
  }
  void validate() const;
};

struct RulEstimate {
  std::string device_id;
  double health_index = 1.0;
  /// +inf when the trend does not move towards the threshold.
  double rul_hours = 0.0;
  double slope_per_hour = 0.0;
  double fit_residual_std = 0.0;
  /// Slope divided by its standard error; +inf for an exact fit.
  double slope_t_stat = 0.0;
  double current_fit = 0.0;
  UtcTime estimated_at{};
};

enum class MaintenanceFlag { ok, plan_maintenance, critical };

std::string_view to_string(MaintenanceFlag f);

/// value(t) = nominal + drift * t_hours + N(0, noise_std), sampled every
/// step_s for `hours` (both ends included).
TelemetrySeries generate_telemetry(const DeviceProfile& profile, double hours,
                                   double step_s, UtcTime t0 = UtcTime{});

/// Arrhenius acceleration factor between use and stress temperatures.
double acceleration_factor(double activation_energy_ev, double t_use_k,
                           double t_stress_k);

/// Maps stress-test time to field time: one stress step covers `af` field
/// steps. Values are untouched.
TelemetrySeries derate_series(const TelemetrySeries& series, double af);

/// Least-squares trend over the last `window` samples, extrapolated to the
/// failure threshold.
RulEstimate estimate_rul(const TelemetrySeries& series,
                         const DeviceProfile& profile, std::size_t window);

MaintenanceFlag maintenance_flag(const RulEstimate& estimate,
                                 double horizon_hours);

/// Hours since t0 at which the metric started drifting away from nominal
/// towards the threshold, found with the shared CUSUM detector. Empty when
/// no drift is detected.
std::optional<double> detect_drift_onset(const TelemetrySeries& series,
                                         const DeviceProfile& profile,
                                         const detect::DetectorConfig& config);

/// Live telemetry source for one device. The drift can change mid-run
/// (injected overheating); the level stays continuous across changes.
class DeviceSimulator {
public:
  explicit DeviceSimulator(DeviceProfile profile);

  const DeviceProfile& profile() const noexcept {
    return profile_;
  }
  double elapsed_hours() const noexcept {
    return elapsed_hours_;
  }

  /// Adds `delta_per_hour` to the drift from the current time onwards.
  void add_drift(double delta_per_hour);

  /// Advances the clock by `step_s` and returns the new sample.
  double advance(double step_s);

  /// Sample at the current time without advancing.
  double sample();

private:
  double level_at(double hours) const noexcept {
    return anchor_value_ + profile_.drift_per_hour * (hours - anchor_hours_);
  }

  DeviceProfile profile_;
  Xorshift64Star rng_;
  double elapsed_hours_ = 0.0;
  double anchor_hours_ = 0.0;
  double anchor_value_;
};

} // namespace deepalm::pm
