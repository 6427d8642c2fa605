#include "deepalm/otdr_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

namespace deepalm::otdr {

using fiber::OtdrTrace;

std::string_view to_string(DetectedKind k) {
  switch (k) {
    case DetectedKind::reflective:
      return "reflective";
    case DetectedKind::loss:
      return "loss";
    case DetectedKind::fiber_end:
      return "fiber_end";
  }
  return "loss";
}

DetectedKind detected_kind_from_string(std::string_view s) {
  for (auto k :
       {DetectedKind::reflective, DetectedKind::loss, DetectedKind::fiber_end})
    if (to_string(k) == s)
      return k;
  throw Error(Errc::invalid_argument,
              "unknown detected event kind '" + std::string(s) + "'");
}

std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::fiber_cut:
      return "fiber_cut";
    case FaultKind::degraded_splice:
      return "degraded_splice";
    case FaultKind::new_bend:
      return "new_bend";
    case FaultKind::sensor_trigger:
      return "sensor_trigger";
    case FaultKind::none:
      return "none";
  }
  return "none";
}

FaultKind fault_kind_from_string(std::string_view s) {
  for (auto k : {FaultKind::fiber_cut, FaultKind::degraded_splice,
                 FaultKind::new_bend, FaultKind::sensor_trigger,
                 FaultKind::none})
    if (to_string(k) == s)
      return k;
  throw Error(Errc::invalid_argument,
              "unknown fault kind '" + std::string(s) + "'");
}

std::string_view recommended_action(FaultKind kind) {
  switch (kind) {
    case FaultKind::fiber_cut:
      return "Dispatch a field crew to the reported location and move "
             "traffic to the protection path.";
    case FaultKind::new_bend:
      return "Inspect the cable at the reported location for macro-bending "
             "or crush damage.";
    case FaultKind::degraded_splice:
      return "Clean or re-terminate the connector or splice at the next "
             "maintenance window.";
    case FaultKind::sensor_trigger:
      return "Check the sensor site for water ingress, vibration or "
             "intrusion.";
    case FaultKind::none:
      return "No action required.";
  }
  return "No action required.";
}

OtdrTrace smooth_trace(const OtdrTrace& trace, int window_samples) {
  const auto n = static_cast<int>(trace.samples.size());
  if (window_samples < 1 || window_samples % 2 == 0 || window_samples > n)
    throw Error(Errc::invalid_argument,
                "smoothing window must be odd, >= 1 and <= trace length");
  OtdrTrace out = trace;
  const int half = window_samples / 2;
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});
    double sum = 0.0;
    for (int j = i - h; j <= i + h; ++j)
      sum += trace.samples[static_cast<std::size_t>(j)];
    out.samples[static_cast<std::size_t>(i)] = sum / (2 * h + 1);
  }
  return out;
}

namespace {

constexpr double end_reflection_rise_db = 2.0;
constexpr std::size_t level_window = 5;
constexpr std::size_t baseline_window = 10;
constexpr int max_slope_passes = 6;

constexpr std::size_t local_level_window = 7;

/// Median of x[begin, end).
double median_of(const std::vector<double>& x, std::size_t begin,
                 std::size_t end) {
  std::vector<double> w(x.begin() + static_cast<long>(begin),
                        x.begin() + static_cast<long>(end));
  auto mid = w.begin() + static_cast<long>(w.size() / 2);
  std::nth_element(w.begin(), mid, w.end());
  return *mid;
}

/// Level of the line just before sample i, robust to a single spike.
double local_level(const std::vector<double>& x, std::size_t i) {
  const std::size_t lo = i > local_level_window ? i - local_level_window : 0;
  return median_of(x, lo, i);
}

struct EndInfo {
  bool has_signal = false;
  std::size_t last_signal = 0;  // last sample above floor + margin
  std::size_t fiber_end = 0;    // after moving back over an end reflection
};

EndInfo locate_end(const OtdrTrace& trace, double margin_db,
                   double rise_db = end_reflection_rise_db) {
  const auto& x = trace.samples;
  const double threshold = trace.params.noise_floor_db + margin_db;
  EndInfo info;
  if (x.empty())
    return info;
  auto median3 = [&x](std::size_t i) {
    const double a = x[i > 0 ? i - 1 : i];
    const double b = x[i];
    const double c = x[i + 1 < x.size() ? i + 1 : i];
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
  };
  for (std::size_t i = x.size(); i-- > 0;) {
    if (median3(i) >= threshold) {
      info.has_signal = true;
      info.last_signal = i;
      break;
    }
  }
  if (!info.has_signal)
    return info;
  info.fiber_end = info.last_signal;
  const auto pulse = static_cast<std::size_t>(std::ceil(
    trace.params.pulse_width_m / trace.params.sample_spacing_m));
  // Smoothing can spread the end reflection over a few extra samples.
  const std::size_t lookback = std::min(info.last_signal, pulse + 4);
  for (std::size_t j = info.last_signal - lookback + 1;
       j <= info.last_signal && j > 0; ++j) {
    if (x[j] - local_level(x, j) >= rise_db) {
      info.fiber_end = j;
      break;
    }
  }
  return info;
}

double mean_of(const std::vector<double>& r, std::size_t begin,
               std::size_t end) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i)
    sum += r[i];
  return sum / static_cast<double>(end - begin);
}

struct Range {
  std::size_t begin;
  std::size_t end; // exclusive
};

struct Peak {
  std::size_t start;
  std::size_t end; // exclusive
};

struct Change {
  std::size_t index;
  detect::Direction direction;
  std::size_t run;
};

/// Least-squares slope shared by all segments, each with its own intercept.
double common_slope(const std::vector<double>& x, double dz,
                    const std::vector<Range>& segments) {
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& s : segments) {
    if (s.end - s.begin < 2)
      continue;
    double mz = 0.0;
    double mx = 0.0;
    for (std::size_t i = s.begin; i < s.end; ++i) {
      mz += static_cast<double>(i) * dz;
      mx += x[i];
    }
    const auto n = static_cast<double>(s.end - s.begin);
    mz /= n;
    mx /= n;
    for (std::size_t i = s.begin; i < s.end; ++i) {
      const double dzi = static_cast<double>(i) * dz - mz;
      sxx += dzi * dzi;
      sxy += dzi * (x[i] - mx);
    }
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

std::vector<Range> split_runs(const std::vector<Range>& runs,
                              const std::vector<Change>& changes,
                              std::size_t guard) {
  std::vector<Range> out;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::size_t begin = runs[r].begin;
    for (const auto& c : changes) {
      if (c.run != r)
        continue;
      const std::size_t cut_lo = c.index > guard ? c.index - guard : 0;
      if (cut_lo > begin)
        out.push_back({begin, cut_lo});
      begin = std::max(begin, c.index + guard + 1);
    }
    if (runs[r].end > begin)
      out.push_back({begin, runs[r].end});
  }
  return out;
}

/// Segment-restarted CUSUM over every run of the detrended residual.
std::vector<Change> scan_changes(const std::vector<double>& r, double dz,
                                 const std::vector<Range>& runs,
                                 const detect::DetectorConfig& config,
                                 std::size_t guard) {
  std::vector<Change> changes;
  for (std::size_t ri = 0; ri < runs.size(); ++ri) {
    const auto [begin, end] = runs[ri];
    std::size_t pos = begin;
    while (end > pos && end - pos >= 3) {
      const std::size_t base_end = std::min(end, pos + baseline_window);
      const double mu0 = mean_of(r, pos, base_end);
      detect::Series sub{
        .values = std::vector<double>(r.begin() + static_cast<long>(pos),
                                      r.begin() + static_cast<long>(end)),
        .start_index = static_cast<std::int64_t>(pos),
        .spacing = dz};
      const auto alarms = detect::cusum_changepoints(sub, config, mu0);
      if (alarms.empty())
        break;
      const auto onset = static_cast<std::size_t>(
        detect::cusum_change_onset(sub, config, mu0, alarms.front()));
      // Refine on the largest two-window level difference near the onset.
      std::size_t best = onset;
      double best_diff = -1.0;
      const std::size_t lo = std::max(pos + 1, onset > 2 ? onset - 2 : 0);
      const std::size_t hi = std::min(end - 1, onset + 2);
      for (std::size_t t = lo; t <= hi; ++t) {
        const std::size_t b0 = t >= pos + level_window ? t - level_window : pos;
        const std::size_t a1 = std::min(end, t + level_window);
        if (b0 >= t || a1 <= t)
          continue;
        const double d = std::abs(mean_of(r, b0, t) - mean_of(r, t, a1));
        if (d > best_diff) {
          best_diff = d;
          best = t;
        }
      }
      changes.push_back({best, alarms.front().direction, ri});
      pos = std::max(best + guard, pos + 1);
    }
  }
  return changes;
}

double robust_sigma(const std::vector<double>& r,
                    const std::vector<Range>& segments) {
  std::vector<double> diffs;
  for (const auto& s : segments)
    for (std::size_t i = s.begin + 1; i < s.end; ++i)
      diffs.push_back(std::abs(r[i] - r[i - 1]));
  if (diffs.empty())
    return 0.0;
  auto mid = diffs.begin() + static_cast<long>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  // Median absolute difference of white noise is 0.6745 * sqrt(2) * sigma.
  return *mid / (0.6744897501960817 * std::sqrt(2.0));
}

double confidence_for(double magnitude, double sigma) {
  if (!(sigma > 0.0))
    return 1.0;
  return std::clamp(std::abs(magnitude) / (3.0 * sigma), 0.0, 1.0);
}

} // namespace

double find_fiber_end(const OtdrTrace& trace, double margin_db) {
  if (!(margin_db > 0.0))
    throw Error(Errc::invalid_argument, "margin_db must be > 0");
  const auto info = locate_end(trace, margin_db);
  return info.has_signal ? trace.position_of(info.fiber_end) : 0.0;
}

std::vector<DetectedEvent> detect_events(const OtdrTrace& trace,
                                         const detect::DetectorConfig& config,
                                         double min_loss_db,
                                         double min_peak_db) {
  const auto& x = trace.samples;
  if (x.size() < 10)
    throw Error(Errc::invalid_argument, "trace too short");
  trace.params.validate();
  config.validate();
  const double dz = trace.params.sample_spacing_m;
  const auto pulse = std::max<std::size_t>(
    1, static_cast<std::size_t>(std::ceil(trace.params.pulse_width_m / dz)));
  const std::size_t guard = 2;

  const auto end_info = locate_end(trace, 6.0, min_peak_db);
  if (!end_info.has_signal)
    return {};
  // Analysis covers [0, region_end); the end reflection is excluded.
  const std::size_t region_end = end_info.fiber_end < end_info.last_signal
                                   ? end_info.fiber_end
                                   : end_info.last_signal + 1;

  // Pass 0: reflective peaks are runs of samples standing at least
  // min_peak_db above the level just before them.
  std::vector<Peak> peaks;
  for (std::size_t i = 1; i < region_end;) {
    const double base = local_level(x, i);
    if (x[i] - base < min_peak_db) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < region_end && end - i < 4 * pulse + 4
           && x[end] - base >= min_peak_db)
      ++end;
    // A peak running into the end of the signal is the end reflection.
    if (end >= region_end)
      break;
    peaks.push_back({i, end});
    i = end + 1;
  }

  // Runs of plain backscatter between peaks; one sample on either side of a
  // peak may be transitional.
  std::vector<Range> runs;
  {
    std::size_t begin = 0;
    for (const auto& p : peaks) {
      if (p.start > begin + 1)
        runs.push_back({begin, p.start - 1});
      begin = std::min(region_end, p.end + 1);
    }
    if (region_end > begin)
      runs.push_back({begin, region_end});
  }

  // Alternate slope fit and change scan until the change set settles.
  std::vector<Change> changes;
  std::vector<double> r(x.size());
  double slope = 0.0;
  for (int pass = 0; pass < max_slope_passes; ++pass) {
    slope = common_slope(x, dz, split_runs(runs, changes, guard));
    for (std::size_t i = 0; i < x.size(); ++i)
      r[i] = x[i] - slope * static_cast<double>(i) * dz;
    auto next = scan_changes(r, dz, runs, config, guard);
    const bool same = next.size() == changes.size()
                      && std::equal(next.begin(), next.end(), changes.begin(),
                                    [](const Change& a, const Change& b) {
                                      return a.index == b.index
                                             && a.direction == b.direction;
                                    });
    changes = std::move(next);
    if (same)
      break;
  }

  const double sigma = robust_sigma(r, split_runs(runs, changes, guard));
  std::vector<DetectedEvent> events;

  // Loss events: level drop between windows on either side of the change,
  // kept clear of the pulse width and of neighbouring changes.
  for (std::size_t c = 0; c < changes.size(); ++c) {
    const auto& ch = changes[c];
    if (ch.direction != detect::Direction::down)
      continue;
    const auto& run = runs[ch.run];
    std::size_t lo_limit = run.begin;
    std::size_t hi_limit = run.end;
    if (c > 0 && changes[c - 1].run == ch.run)
      lo_limit = std::max(lo_limit, changes[c - 1].index + guard);
    if (c + 1 < changes.size() && changes[c + 1].run == ch.run)
      hi_limit = std::min(hi_limit, changes[c + 1].index > guard
                                      ? changes[c + 1].index - guard
                                      : 0);
    const std::size_t before_end = ch.index > pulse ? ch.index - pulse : 0;
    const std::size_t after_begin = ch.index + pulse;
    if (before_end <= lo_limit || after_begin >= hi_limit)
      continue;
    const std::size_t before_begin =
      std::max(lo_limit, before_end > level_window ? before_end - level_window
                                                   : 0);
    const std::size_t after_end = std::min(hi_limit, after_begin + level_window);
    const double loss =
      mean_of(r, before_begin, before_end) - mean_of(r, after_begin, after_end);
    if (loss < min_loss_db)
      continue;
    events.push_back({.position_m = trace.position_of(ch.index),
                      .kind = DetectedKind::loss,
                      .loss_db = loss,
                      .reflectance_db = std::nullopt,
                      .confidence = confidence_for(loss, sigma),
                      .width_m = 0.0});
  }

  // Reflective events: peak height over the line just before the event.
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    const auto& p = peaks[k];
    const std::size_t prev_end = k > 0 ? peaks[k - 1].end + 1 : 0;
    const std::size_t next_start = k + 1 < peaks.size()
                                     ? peaks[k + 1].start - 1
                                     : region_end;
    const std::size_t before_end = p.start - 1 > prev_end ? p.start - 1
                                                          : p.start;
    if (before_end <= prev_end)
      continue;
    const std::size_t before_begin = std::max(
      prev_end, before_end > level_window ? before_end - level_window : 0);
    const double pre = mean_of(r, before_begin, before_end);
    const double top = mean_of(r, p.start, p.end);
    const double height = top - pre;
    if (height < min_peak_db)
      continue;
    double loss = 0.0;
    const std::size_t after_begin = p.end + 1;
    if (after_begin < next_start) {
      const std::size_t after_end =
        std::min(next_start, after_begin + level_window);
      loss = std::max(0.0, pre - mean_of(r, after_begin, after_end));
    }
    events.push_back(
      {.position_m = trace.position_of(p.start),
       .kind = DetectedKind::reflective,
       .loss_db = loss,
       .reflectance_db = trace.params.backscatter_coeff_db + 2.0 * height,
       .confidence = confidence_for(height, sigma),
       .width_m = static_cast<double>(p.end - p.start) * dz});
  }

  std::sort(events.begin(), events.end(),
            [](const DetectedEvent& a, const DetectedEvent& b) {
              return a.position_m < b.position_m;
            });
  // Events inside one pulse width are unresolvable; keep the reflective one,
  // otherwise the larger loss.
  std::vector<DetectedEvent> merged;
  for (auto& e : events) {
    if (!merged.empty()
        && e.position_m - merged.back().position_m
             < trace.params.pulse_width_m) {
      auto& prev = merged.back();
      const bool take_new =
        (e.kind == DetectedKind::reflective
         && prev.kind != DetectedKind::reflective)
        || (e.kind == prev.kind && e.loss_db > prev.loss_db);
      if (take_new)
        prev = e;
      continue;
    }
    merged.push_back(e);
  }
  return merged;
}

TraceDiff compare_baseline(const OtdrTrace& current, const OtdrTrace& baseline,
                           double loss_tolerance_db,
                           double position_tolerance_m,
                           const AnalysisSettings& settings) {
  if (current.route_id != baseline.route_id)
    throw Error(Errc::invalid_argument,
                "route mismatch: '" + current.route_id + "' vs '"
                  + baseline.route_id + "'");
  if (current.params.sample_spacing_m != baseline.params.sample_spacing_m)
    throw Error(Errc::invalid_argument, "sample spacing mismatch");
  TraceDiff diff;
  diff.sample_spacing_m = current.params.sample_spacing_m;
  diff.current_end_m = find_fiber_end(current, settings.end_margin_db);
  diff.baseline_end_m = find_fiber_end(baseline, settings.end_margin_db);
  diff.end_shift_m = diff.current_end_m - diff.baseline_end_m;

  const auto cur = detect_events(current, settings.detector,
                                 settings.min_loss_db, settings.min_peak_db);
  const auto base = detect_events(baseline, settings.detector,
                                  settings.min_loss_db, settings.min_peak_db);
  struct Pair {
    double distance;
    double position;
    std::size_t c;
    std::size_t b;
  };
  std::vector<Pair> pairs;
  for (std::size_t c = 0; c < cur.size(); ++c)
    for (std::size_t b = 0; b < base.size(); ++b) {
      const double d = std::abs(cur[c].position_m - base[b].position_m);
      if (d <= position_tolerance_m)
        pairs.push_back({d, cur[c].position_m, c, b});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.distance, a.position, a.c, a.b)
           < std::tie(b.distance, b.position, b.c, b.b);
  });
  std::vector<int> cur_match(cur.size(), -1);
  std::vector<bool> base_used(base.size(), false);
  for (const auto& p : pairs) {
    if (cur_match[p.c] >= 0 || base_used[p.b])
      continue;
    cur_match[p.c] = static_cast<int>(p.b);
    base_used[p.b] = true;
  }
  for (std::size_t c = 0; c < cur.size(); ++c) {
    if (cur_match[c] < 0) {
      diff.new_events.push_back(cur[c]);
      continue;
    }
    const auto& b = base[static_cast<std::size_t>(cur_match[c])];
    if (std::abs(cur[c].loss_db - b.loss_db) >= loss_tolerance_db)
      diff.changed_events.emplace_back(b, cur[c]);
  }
  for (std::size_t b = 0; b < base.size(); ++b)
    if (!base_used[b])
      diff.vanished_events.push_back(base[b]);
  return diff;
}

namespace {

bool near_installed(const fiber::FiberRoute& route, double position,
                    double tolerance,
                    std::initializer_list<fiber::EventKind> kinds) {
  for (const auto& e : route.baseline_events)
    if (std::find(kinds.begin(), kinds.end(), e.kind) != kinds.end()
        && std::abs(e.position_m - position) <= tolerance)
      return true;
  return false;
}

std::string fmt_m(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << v;
  return os.str();
}

std::string fmt_db(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << v;
  return os.str();
}

FaultDiagnosis make(FaultKind kind, std::optional<double> position,
                    Severity severity, std::string evidence) {
  return {kind, position, severity, std::move(evidence),
          std::string(recommended_action(kind))};
}

} // namespace

FaultDiagnosis diagnose_fault(const TraceDiff& diff,
                              const fiber::FiberRoute& route) {
  const double spacing = diff.sample_spacing_m > 0.0 ? diff.sample_spacing_m
                                                     : 10.0;
  const double tolerance = 3.0 * spacing;

  if (diff.end_shift_m < -3.0 * spacing)
    return make(FaultKind::fiber_cut, diff.current_end_m, Severity::critical,
                "fiber end moved from " + fmt_m(diff.baseline_end_m) + " m to "
                  + fmt_m(diff.current_end_m) + " m");

  const DetectedEvent* worst = nullptr;
  for (const auto& e : diff.new_events)
    if (e.kind == DetectedKind::loss && e.loss_db >= 2.0
        && (worst == nullptr || e.loss_db > worst->loss_db))
      worst = &e;
  if (worst != nullptr)
    return make(FaultKind::new_bend, worst->position_m, Severity::major,
                "new " + fmt_db(worst->loss_db) + " dB loss at "
                  + fmt_m(worst->position_m) + " m");

  for (const auto& [before, after] : diff.changed_events) {
    const double delta = after.loss_db - before.loss_db;
    if (delta >= 0.5
        && near_installed(route, after.position_m, tolerance,
                          {fiber::EventKind::connector,
                           fiber::EventKind::splice}))
      return make(FaultKind::degraded_splice, after.position_m,
                  Severity::minor,
                  "loss at " + fmt_m(after.position_m) + " m rose by "
                    + fmt_db(delta) + " dB");
  }

  for (const auto& e : diff.new_events)
    if (e.kind == DetectedKind::loss && e.loss_db >= 0.2 && e.loss_db < 2.0
        && near_installed(route, e.position_m, tolerance,
                          {fiber::EventKind::sensor_trigger}))
      return make(FaultKind::sensor_trigger, e.position_m, Severity::major,
                  "sensor at " + fmt_m(e.position_m) + " m shows "
                    + fmt_db(e.loss_db) + " dB loss");

  return make(FaultKind::none, std::nullopt, Severity::info,
              "no significant change against the baseline");
}

} // namespace deepalm::otdr
