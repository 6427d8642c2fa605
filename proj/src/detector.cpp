#include "deepalm/detector.hpp"

#include "deepalm/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <tuple>

namespace deepalm::detect {

namespace {

std::atomic<std::uint64_t> cusum_calls{0};

void require(bool condition, const char* message) {
  if (!condition)
    throw Error(Errc::invalid_argument, message);
}

} // namespace

void Series::validate() const {
  require(spacing > 0.0 && std::isfinite(spacing), "bad parameter: spacing");
  for (double v : values)
    require(std::isfinite(v), "bad parameter: non-finite sample");
}

void DetectorConfig::validate() const {
  require(ewma_lambda > 0.0 && ewma_lambda <= 1.0,
          "bad parameter: ewma_lambda");
  require(z_threshold > 0.0, "bad parameter: z_threshold");
  require(cusum_drift_k >= 0.0, "bad parameter: cusum_drift_k");
  require(cusum_threshold_h > 0.0, "bad parameter: cusum_threshold_h");
  require(min_separation >= 1, "bad parameter: min_separation");
  require(sigma_floor >= 0.0, "bad parameter: sigma_floor");
}

Series ewma_baseline(const Series& series, double lambda) {
  if (series.values.empty())
    throw Error(Errc::invalid_argument, "empty input");
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw Error(Errc::invalid_argument, "bad parameter");
  series.validate();
  Series out{.values = {}, .start_index = series.start_index,
             .spacing = series.spacing};
  out.values.reserve(series.size());
  double s = series.values.front();
  out.values.push_back(s);
  for (std::size_t t = 1; t < series.size(); ++t) {
    s = lambda * series.values[t] + (1.0 - lambda) * s;
    out.values.push_back(s);
  }
  return out;
}

std::vector<ScoredPoint> zscore(const Series& series, double baseline_mean,
                                double baseline_std) {
  if (!(baseline_std > 0.0))
    throw Error(Errc::invalid_argument, "degenerate baseline");
  series.validate();
  std::vector<ScoredPoint> out;
  out.reserve(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    const double score = (series.values[t] - baseline_mean) / baseline_std;
    out.push_back({series.start_index + static_cast<std::int64_t>(t), score,
                   score > 0.0 ? Direction::up : Direction::down});
  }
  return out;
}

std::vector<ScoredPoint> cusum_changepoints(const Series& series,
                                            const DetectorConfig& config,
                                            double baseline_mean) {
  cusum_calls.fetch_add(1, std::memory_order_relaxed);
  if (series.values.empty())
    throw Error(Errc::invalid_argument, "empty input");
  series.validate();
  config.validate();
  const double k = config.cusum_drift_k;
  const double h = config.cusum_threshold_h;
  std::vector<ScoredPoint> alarms;
  double g_up = 0.0;
  double g_down = 0.0;
  std::int64_t last_alarm = 0;
  bool have_alarm = false;
  auto emit = [&](std::int64_t index, double score, Direction dir) {
    if (have_alarm && index - last_alarm < config.min_separation)
      return;
    alarms.push_back({index, score, dir});
    last_alarm = index;
    have_alarm = true;
  };
  for (std::size_t t = 0; t < series.size(); ++t) {
    const double x = series.values[t];
    g_up = std::max(0.0, g_up + (x - baseline_mean - k));
    g_down = std::max(0.0, g_down + (baseline_mean - x - k));
    const auto index = series.start_index + static_cast<std::int64_t>(t);
    if (g_up >= h) {
      emit(index, g_up, Direction::up);
      g_up = 0.0;
    }
    if (g_down >= h) {
      emit(index, g_down, Direction::down);
      g_down = 0.0;
    }
  }
  return alarms;
}

std::int64_t cusum_change_onset(const Series& series,
                                const DetectorConfig& config,
                                double baseline_mean,
                                const ScoredPoint& alarm) {
  const double k = config.cusum_drift_k;
  const double h = config.cusum_threshold_h;
  const auto end = alarm.index - series.start_index;
  if (end < 0 || end >= static_cast<std::int64_t>(series.size()))
    throw Error(Errc::invalid_argument, "alarm outside series");
  // Replays the firing side only, tracking where it last left zero and
  // honouring earlier resets on that side.
  double g = 0.0;
  std::int64_t onset = 0;
  for (std::int64_t t = 0; t <= end; ++t) {
    const double x = series.values[static_cast<std::size_t>(t)];
    const double step = alarm.direction == Direction::up
                          ? x - baseline_mean - k
                          : baseline_mean - x - k;
    if (g == 0.0)
      onset = t;
    g = std::max(0.0, g + step);
    if (g >= h && t < end)
      g = 0.0;
  }
  return series.start_index + onset;
}

std::uint64_t cusum_invocation_count() noexcept {
  return cusum_calls.load(std::memory_order_relaxed);
}

std::vector<ScoredPoint> threshold_events(std::span<const ScoredPoint> points,
                                          double threshold,
                                          std::int64_t min_separation) {
  if (!(threshold > 0.0))
    throw Error(Errc::invalid_argument, "bad parameter");
  std::vector<ScoredPoint> kept;
  for (const auto& p : points)
    if (std::abs(p.score) >= threshold)
      kept.push_back(p);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const ScoredPoint& a, const ScoredPoint& b) {
                     return a.index < b.index;
                   });
  std::vector<ScoredPoint> out;
  std::size_t i = 0;
  while (i < kept.size()) {
    std::size_t best = i;
    std::size_t j = i + 1;
    while (j < kept.size()
           && kept[j].index - kept[j - 1].index < min_separation) {
      if (std::abs(kept[j].score) > std::abs(kept[best].score))
        best = j;
      ++j;
    }
    out.push_back(kept[best]);
    i = j;
  }
  return out;
}

DetectionReport evaluate_detection(std::span<const double> detected,
                                   std::span<const double> truth,
                                   double tolerance) {
  if (!(tolerance >= 0.0))
    throw Error(Errc::invalid_argument, "bad parameter");
  struct Candidate {
    double distance;
    double detected_pos;
    std::size_t d;
    std::size_t t;
  };
  std::vector<Candidate> candidates;
  for (std::size_t d = 0; d < detected.size(); ++d)
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double dist = std::abs(detected[d] - truth[t]);
      if (dist <= tolerance)
        candidates.push_back({dist, detected[d], d, t});
    }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              return std::tie(a.distance, a.detected_pos, a.d, a.t)
                     < std::tie(b.distance, b.detected_pos, b.d, b.t);
            });
  std::vector<bool> used_d(detected.size(), false);
  std::vector<bool> used_t(truth.size(), false);
  DetectionReport report;
  for (const auto& c : candidates) {
    if (used_d[c.d] || used_t[c.t])
      continue;
    used_d[c.d] = true;
    used_t[c.t] = true;
    ++report.matched;
  }
  report.spurious = detected.size() - report.matched;
  report.missed = truth.size() - report.matched;
  if (report.matched + report.spurious > 0)
    report.precision = static_cast<double>(report.matched)
                       / static_cast<double>(report.matched + report.spurious);
  if (report.matched + report.missed > 0)
    report.recall = static_cast<double>(report.matched)
                    / static_cast<double>(report.matched + report.missed);
  return report;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(Errc::invalid_argument, "line fit needs at least two points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0))
    throw Error(Errc::invalid_argument, "line fit needs distinct x values");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.at(x[i]);
    ss += r * r;
  }
  fit.residual_std = std::sqrt(ss / n);
  return fit;
}

} // namespace deepalm::detect
