#pragma once

#include "deepalm/common.hpp"
#include "deepalm/detector.hpp"
#include "deepalm/fiber_sim.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace deepalm::otdr {

enum class DetectedKind { reflective, loss, fiber_end };

std::string_view to_string(DetectedKind k);
DetectedKind detected_kind_from_string(std::string_view s);

struct DetectedEvent {
  double position_m = 0.0;
  DetectedKind kind = DetectedKind::loss;
  double loss_db = 0.0;
  std::optional<double> reflectance_db;
  double confidence = 0.0;
  double width_m = 0.0;

  friend bool operator==(const DetectedEvent&, const DetectedEvent&) = default;
};

struct TraceDiff {
  /// Negative when the fiber got shorter.
  double end_shift_m = 0.0;
  double baseline_end_m = 0.0;
  double current_end_m = 0.0;
  double sample_spacing_m = 0.0;
  std::vector<DetectedEvent> new_events;
  std::vector<DetectedEvent> vanished_events;
  std::vector<std::pair<DetectedEvent, DetectedEvent>> changed_events;

  bool empty() const noexcept {
    return end_shift_m == 0.0 && new_events.empty() && vanished_events.empty()
           && changed_events.empty();
  }
};

enum class FaultKind { fiber_cut, degraded_splice, new_bend, sensor_trigger, none };

std::string_view to_string(FaultKind k);
FaultKind fault_kind_from_string(std::string_view s);

struct FaultDiagnosis {
  FaultKind fault_kind = FaultKind::none;
  std::optional<double> position_m;
  Severity severity = Severity::info;
  std::string evidence;
  std::string recommended_action;
};

/// Everything the trace pipeline needs besides the traces themselves.
struct AnalysisSettings {
  detect::DetectorConfig detector = default_detector();
  double min_loss_db = 0.3;
  double min_peak_db = 2.0;
  double end_margin_db = 6.0;
  double loss_tolerance_db = 0.3;
  /// In sample spacings.
  double position_tolerance_spacings = 3.0;
  int smooth_window = 3;

  static detect::DetectorConfig default_detector() {
    detect::DetectorConfig c;
    c.ewma_lambda = 0.2;
    c.z_threshold = 5.0;
    c.cusum_drift_k = 0.15;
    c.cusum_threshold_h = 0.6;
    c.min_separation = 1;
    return c;
  }
};

/// Centered moving average; the window shrinks symmetrically at the edges.
fiber::OtdrTrace smooth_trace(const fiber::OtdrTrace& trace, int window_samples);

/// Localized reflective and loss events, sorted by position. The fiber end
/// itself (including its end reflection) is not reported.
std::vector<DetectedEvent> detect_events(const fiber::OtdrTrace& trace,
                                         const detect::DetectorConfig& config,
                                         double min_loss_db,
                                         double min_peak_db);

/// Distance of the last sample at least `margin_db` above the noise floor,
/// moved back to the rising edge when that sample belongs to the end
/// reflection. Returns 0 when the whole trace sits at the floor.
double find_fiber_end(const fiber::OtdrTrace& trace, double margin_db = 6.0);

/// Events of both traces matched within the position tolerance.
TraceDiff compare_baseline(const fiber::OtdrTrace& current,
                           const fiber::OtdrTrace& baseline,
                           double loss_tolerance_db,
                           double position_tolerance_m,
                           const AnalysisSettings& settings = {});

FaultDiagnosis diagnose_fault(const TraceDiff& diff,
                              const fiber::FiberRoute& route);

std::string_view recommended_action(FaultKind kind);

} // namespace deepalm::otdr
