#pragma once

// Shared anomaly-detection primitives. Every engine (OTDR traces, device
// telemetry, log rates) goes through these functions so that a change here
// changes all three consistently.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace deepalm::detect {

/// Evenly spaced samples. `spacing` is in the caller's unit (meters for
/// traces, seconds for telemetry and log rates).
struct Series {
  std::vector<double> values;
  std::int64_t start_index = 0;
  double spacing = 1.0;

  /// Throws on non-finite values or non-positive spacing.
  void validate() const;
  std::size_t size() const noexcept {
    return values.size();
  }
};

struct DetectorConfig {
  double ewma_lambda = 0.2;
  double z_threshold = 4.0;
  double cusum_drift_k = 0.25;
  double cusum_threshold_h = 2.0;
  std::int64_t min_separation = 1;
  /// Lower bound on the standard deviation used for streaming z-scores.
  double sigma_floor = 1.0;

  void validate() const;
};

enum class Direction { up, down };

struct ScoredPoint {
  std::int64_t index = 0;
  double score = 0.0;
  Direction direction = Direction::up;

  friend bool operator==(const ScoredPoint&, const ScoredPoint&) = default;
};

struct DetectionReport {
  std::size_t matched = 0;
  std::size_t missed = 0;
  std::size_t spurious = 0;
  double precision = 1.0;
  double recall = 1.0;
};

/// s0 = x0, s_t = lambda * x_t + (1 - lambda) * s_{t-1}.
Series ewma_baseline(const Series& series, double lambda);

/// Standard score of every sample against a fixed baseline.
std::vector<ScoredPoint> zscore(const Series& series, double baseline_mean,
                                double baseline_std);

/// Two-sided CUSUM. An accumulator fires when it reaches
/// `cusum_threshold_h`; the firing side is reset to zero and the other side
/// is kept. Alarms closer than `min_separation` samples to the previously
/// reported alarm are suppressed (the accumulator still resets).
/// Returned indices are absolute (`start_index` + offset); the score is the
/// accumulator value at the alarm.
std::vector<ScoredPoint> cusum_changepoints(const Series& series,
                                            const DetectorConfig& config,
                                            double baseline_mean);

/// For an alarm reported by `cusum_changepoints` on the same inputs, the
/// absolute index at which the firing accumulator last left zero, i.e. the
/// estimated onset of the change.
std::int64_t cusum_change_onset(const Series& series,
                                const DetectorConfig& config,
                                double baseline_mean, const ScoredPoint& alarm);

/// Number of times `cusum_changepoints` has run in this process. Lets tests
/// assert that different engines share the one implementation.
std::uint64_t cusum_invocation_count() noexcept;

/// Keeps points with |score| >= threshold. Kept points closer than
/// `min_separation` to their neighbour form a cluster; each cluster
/// collapses to its maximum-|score| point (earliest on ties).
std::vector<ScoredPoint> threshold_events(std::span<const ScoredPoint> points,
                                          double threshold,
                                          std::int64_t min_separation);

/// Greedy one-to-one matching by ascending |distance|, ties broken by
/// ascending detected position.
DetectionReport evaluate_detection(std::span<const double> detected,
                                   std::span<const double> truth,
                                   double tolerance);

/// Least-squares line through (x, y). Used by the trend-based engines.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_std = 0.0;

  double at(double x) const noexcept {
    return intercept + slope * x;
  }
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

} // namespace deepalm::detect
