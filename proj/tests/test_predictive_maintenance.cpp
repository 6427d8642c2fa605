#include "deepalm/predictive_maintenance.hpp"
#include "deepalm/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace deepalm;
using namespace deepalm::pm;

namespace {

DeviceProfile laser(double nominal, double threshold, double drift, double noise = 0.0,
                    std::uint64_t seed = 1) {
  return {"amp-1", "laser_bias_ma", nominal, threshold, drift, noise, seed};
}

TelemetrySeries line_series(double a, double b, double step_h, std::size_t n) {
  TelemetrySeries s{"amp-1", "laser_bias_ma", {}, step_h * 3600.0, {}};
  for (std::size_t i = 0; i < n; ++i)
    s.values.push_back(a + b * static_cast<double>(i) * step_h);
  return s;
}

} // namespace

TEST_CASE("generate_telemetry examples") {
  auto flat = generate_telemetry(laser(50, 80, 0), 48, 600);
  for (double v : flat.values)
    CHECK(v == 50.0);
  auto falling = generate_telemetry(laser(100, 40, -2), 20, 3600);
  REQUIRE(falling.values.size() == 21);
  CHECK(falling.values[10] == doctest::Approx(80.0).epsilon(1e-14));
  auto noisy = laser(50, 80, 0.1, 0.5, 42);
  CHECK(generate_telemetry(noisy, 10, 60).values == generate_telemetry(noisy, 10, 60).values);
  CHECK_THROWS_AS(generate_telemetry(noisy, 0, 60), Error);
  CHECK_THROWS_AS(generate_telemetry(noisy, 1, 0), Error);
}

TEST_CASE("acceleration_factor") {
  const double oracle = std::exp(0.7 / 8.617333262e-5 * (1.0 / 298.15 - 1.0 / 358.15));
  const double af = acceleration_factor(0.7, 298.15, 358.15);
  CHECK(std::abs(af - oracle) <= 1e-9 * oracle);
  CHECK(std::abs(af - 96.0) <= 0.5);
  for (double t : {200.0, 298.15, 1000.0})
    CHECK(acceleration_factor(0.3, t, t) == 1.0);
  double prev = 0;
  for (double ts = 300; ts < 500; ts += 10) {
    const double a = acceleration_factor(0.7, 298.15, ts);
    CHECK(a > prev);
    prev = a;
  }
  CHECK_THROWS_AS(acceleration_factor(0, 298, 358), Error);
  CHECK_THROWS_AS(acceleration_factor(0.7, -1, 358), Error);
}

TEST_CASE("derate_series") {
  auto s = line_series(1, 2, 1, 5);
  auto same = derate_series(s, 1);
  CHECK(same.values == s.values);
  CHECK(same.step_s == s.step_s);
  CHECK(derate_series(s, 96).step_s == 345600.0);
  const auto d = derate_series(s, 7.5);
  CHECK(derate_series(d, 1).step_s == d.step_s);
  CHECK(derate_series(d, 1).values == d.values);
  CHECK_THROWS_AS(derate_series(s, 0.5), Error);
}

TEST_CASE("estimate_rul on the exact line 100 - 2t") {
  const auto s = line_series(100, -2, 1, 11);
  const auto e = estimate_rul(s, laser(100, 40, -2), 11);
  CHECK(e.slope_per_hour == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(e.current_fit == doctest::Approx(80.0).epsilon(1e-12));
  CHECK(e.rul_hours == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(e.health_index == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(e.fit_residual_std == doctest::Approx(0.0));
  CHECK(maintenance_flag(e, 100) == MaintenanceFlag::critical);
}

TEST_CASE("estimate_rul edge cases") {
  TelemetrySeries flat{"amp-1", "m", {}, 3600, std::vector<double>(10, 100.0)};
  auto e = estimate_rul(flat, laser(100, 40, 0), 10);
  CHECK(std::isinf(e.rul_hours));
  CHECK(e.health_index == 1.0);
  CHECK(maintenance_flag(e, 100) == MaintenanceFlag::ok);

  auto past = line_series(30, -1, 1, 5);
  e = estimate_rul(past, laser(100, 40, -1), 5);
  CHECK(e.rul_hours == 0.0);
  CHECK(e.health_index == 0.0);

  auto away = line_series(100, 1, 1, 5);
  CHECK(std::isinf(estimate_rul(away, laser(100, 40, 0), 5).rul_hours));

  CHECK_THROWS_AS(estimate_rul(flat, laser(100, 40, 0), 1), Error);
  CHECK_THROWS_AS(estimate_rul(flat, laser(100, 40, 0), 11), Error);
}

TEST_CASE("maintenance_flag rules") {
  RulEstimate e;
  e.health_index = 0.5;
  e.rul_hours = 50;
  CHECK(maintenance_flag(e, 100) == MaintenanceFlag::plan_maintenance);
  e.rul_hours = std::numeric_limits<double>::infinity();
  e.health_index = 1.0;
  CHECK(maintenance_flag(e, 100) == MaintenanceFlag::ok);
  e.health_index = 0.05;
  CHECK(maintenance_flag(e, 100) == MaintenanceFlag::critical);
  e.health_index = 0.5;
  e.rul_hours = 25;
  CHECK(maintenance_flag(e, 100) == MaintenanceFlag::plan_maintenance);
  e.rul_hours = 24.999;
  CHECK(maintenance_flag(e, 100) == MaintenanceFlag::critical);
  CHECK_THROWS_AS(maintenance_flag(e, 0), Error);
}

TEST_CASE("noiseless lines give analytic slope and RUL for every window") {
  Xorshift64Star rng{41};
  for (int trial = 0; trial < 200; ++trial) {
    const double nominal = 10 + 100 * rng.uniform();
    const bool up = trial % 2;
    const double threshold = nominal + (up ? 1 : -1) * (5 + 50 * rng.uniform());
    const double slope = (up ? 1 : -1) * (0.01 + rng.uniform());
    const double step_h = 0.1 + rng.uniform();
    const std::size_t n = 2 + rng.next() % 200;
    const auto s = line_series(nominal, slope, step_h, n);
    const std::size_t window = 2 + rng.next() % (n - 1);
    const auto e = estimate_rul(s, laser(nominal, threshold, slope), window);
    const double t_end = static_cast<double>(n - 1) * step_h;
    const double current = nominal + slope * t_end;
    const double rul = std::max(0.0, (threshold - current) / slope);
    CHECK(std::abs(e.slope_per_hour - slope) <= 1e-6 * std::abs(slope));
    if (rul > 0)
      CHECK(std::abs(e.rul_hours - rul) <= 1e-6 * rul);
    else
      CHECK(e.rul_hours <= 1e-6);
  }
}

TEST_CASE("RUL error shrinks with the window") {
  double err_small = 0, err_large = 0;
  const double truth_slope = -0.5;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto p = laser(100, 40, truth_slope, 1.0, seed);
    const auto s = generate_telemetry(p, 99, 3600);
    const double current = 100 + truth_slope * 99;
    const double truth = (40 - current) / truth_slope;
    err_small += std::abs(estimate_rul(s, p, 10).rul_hours - truth);
    err_large += std::abs(estimate_rul(s, p, 100).rul_hours - truth);
  }
  CHECK(err_large < err_small);
}

TEST_CASE("health index stays in range and falls along degradation") {
  const auto p = laser(100, 40, -2);
  const auto s = generate_telemetry(p, 40, 3600);
  double prev = 2.0;
  for (std::size_t n = 2; n <= s.values.size(); ++n) {
    TelemetrySeries prefix = s;
    prefix.values.resize(n);
    const auto e = estimate_rul(prefix, p, 2);
    CHECK(e.health_index >= 0.0);
    CHECK(e.health_index <= 1.0);
    CHECK(e.health_index <= prev);
    prev = e.health_index;
  }
}

TEST_CASE("drift onset through the shared CUSUM") {
  // Flat at nominal for 10 h, then rising 1 unit/h; sampled every 6 min.
  TelemetrySeries s{"amp-1", "m", {}, 360, {}};
  for (int i = 0; i <= 300; ++i) {
    const double h = i * 0.1;
    s.values.push_back(50 + (h > 10 ? (h - 10) : 0.0));
  }
  detect::DetectorConfig c;
  c.cusum_drift_k = 0.25;
  c.cusum_threshold_h = 2.0;
  const auto before = detect::cusum_invocation_count();
  const auto onset = detect_drift_onset(s, laser(50, 80, 0), c);
  CHECK(detect::cusum_invocation_count() > before);
  REQUIRE(onset);
  CHECK(std::abs(*onset - 10.0) <= 0.5);
  TelemetrySeries flat{"amp-1", "m", {}, 360, std::vector<double>(100, 50.0)};
  CHECK_FALSE(detect_drift_onset(flat, laser(50, 80, 0), c));
}

TEST_CASE("DeviceSimulator drift can change mid-run") {
  DeviceSimulator sim{laser(50, 80, 0.5)};
  CHECK(sim.sample() == 50.0);
  for (int i = 0; i < 10; ++i)
    sim.advance(3600);
  CHECK(sim.sample() == doctest::Approx(55.0));
  sim.add_drift(2.0);
  CHECK(sim.sample() == doctest::Approx(55.0));
  sim.advance(3600);
  CHECK(sim.sample() == doctest::Approx(57.5));
  CHECK(sim.elapsed_hours() == doctest::Approx(11.0));
}

TEST_CASE("profile validation") {
  CHECK(laser(50, 80, 0.1).violations().empty());
  CHECK_FALSE(laser(50, 50, 0).violations().empty());
  CHECK_FALSE(laser(50, 80, -0.1).violations().empty());
  CHECK_FALSE(laser(50, 80, 0, -1).violations().empty());
}
