#include "deepalm/fiber_sim.hpp"
#include "deepalm/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace deepalm;
using namespace deepalm::fiber;

namespace {

FiberRoute straight_route(double length_m = 25000.0) {
  FiberRoute r;
  r.route_id = "r1";
  r.length_m = length_m;
  r.attenuation_db_per_km = 0.2;
  r.waypoints = {{52.0, 13.0, 0.0}, {52.2, 13.4, length_m}};
  return r;
}

OtdrParams quiet_params() {
  OtdrParams p;
  p.noise_std_db_linear_equiv = 0.0;
  return p;
}

IncidentSpec fiber_incident(IncidentKind kind, double pos, double mag = 0.0) {
  IncidentSpec s;
  s.incident_id = "i";
  s.kind = kind;
  s.target = "r1";
  s.position_m = pos;
  s.magnitude = mag;
  return s;
}

} // namespace

TEST_CASE("synthesize_trace examples") {
  const auto route = straight_route();
  const auto t = synthesize_trace(route, {}, quiet_params());
  CHECK(t.samples.size() == 2501);
  CHECK(t.samples[1000] == doctest::Approx(28.0).epsilon(1e-12));
  CHECK(t.samples[0] == 30.0);
  REQUIRE(t.ground_truth);
  CHECK(t.ground_truth->empty());
}

TEST_CASE("reflective peak height") {
  auto p = quiet_params();
  p.saturation_db = 60.0;
  const std::vector<FiberEventSpec> ev{{5000, EventKind::connector, 0.0, -45.0}};
  const auto t = synthesize_trace(straight_route(), ev, p);
  const double line = 30.0 - 0.2 * 5.0;
  CHECK(t.samples[500] - line == doctest::Approx(14.0).epsilon(1e-12));
  CHECK(t.samples[501] - (30.0 - 0.2 * 5.01) == doctest::Approx(14.0).epsilon(1e-12));
  // Pulse width 20 m covers exactly two samples.
  CHECK(t.samples[502] == doctest::Approx(30.0 - 0.2 * 5.02).epsilon(1e-12));
}

TEST_CASE("peaks clip at saturation") {
  const std::vector<FiberEventSpec> ev{{5000, EventKind::connector, 0.0, -45.0}};
  const auto t = synthesize_trace(straight_route(), ev, quiet_params());
  CHECK(t.samples[500] == 35.0);
}

TEST_CASE("synthesize_trace errors") {
  const auto route = straight_route();
  const std::vector<FiberEventSpec> unsorted{{2000, EventKind::splice, 0.1, {}},
                                             {1000, EventKind::splice, 0.1, {}}};
  CHECK_THROWS_AS(synthesize_trace(route, unsorted, quiet_params()), Error);
  const std::vector<FiberEventSpec> past_cut{{1000, EventKind::cut, 0.0, -40.0},
                                             {2000, EventKind::splice, 0.1, {}}};
  CHECK_THROWS_AS(synthesize_trace(route, past_cut, quiet_params()), Error);
  auto bad = route;
  bad.waypoints.back().cumulative_fiber_m = 1.0;
  CHECK_THROWS_AS(synthesize_trace(bad, {}, quiet_params()), Error);
}

TEST_CASE("level drops to the noise floor past a cut") {
  const std::vector<FiberEventSpec> ev{{12000, EventKind::cut, 0.0, std::nullopt}};
  const auto t = synthesize_trace(straight_route(), ev, quiet_params());
  CHECK(t.samples[1199] > 0.0);
  for (std::size_t i = 1200; i < t.samples.size(); ++i)
    CHECK(t.samples[i] == -25.0);
}

TEST_CASE("sample_spacing_from_time") {
  CHECK(std::abs(sample_spacing_from_time(100e-9, 1.468) - 10.211) <= 0.001);
  CHECK(sample_spacing_from_time(0.001, 1.0) == doctest::Approx(149896.229).epsilon(1e-12));
  CHECK(sample_spacing_from_time(2e-7, 1.468)
        == doctest::Approx(2 * sample_spacing_from_time(1e-7, 1.468)).epsilon(1e-15));
  CHECK_THROWS_AS(sample_spacing_from_time(0, 1.468), Error);
  CHECK_THROWS_AS(sample_spacing_from_time(1e-7, -1), Error);
}

TEST_CASE("apply_incident examples") {
  const auto route = straight_route();
  const std::vector<FiberEventSpec> ev{{5000, EventKind::splice, 0.2, {}},
                                       {20000, EventKind::connector, 0.5, -50.0}};
  auto cut = apply_incident(route, ev, fiber_incident(IncidentKind::fiber_cut, 12345));
  REQUIRE(cut.size() == 2);
  CHECK(cut[0] == ev[0]);
  CHECK(cut[1].kind == EventKind::cut);
  CHECK(cut[1].position_m == 12345);
  CHECK(cut[1].reflectance_db == -40.0);

  auto bend = apply_incident(route, ev, fiber_incident(IncidentKind::fiber_bend, 8000, 1.0));
  REQUIRE(bend.size() == 3);
  CHECK(bend[1].position_m == 8000);
  CHECK(bend[1].loss_db == 1.0);
  CHECK_FALSE(bend[1].reflectance_db);

  auto zero = apply_incident(route, ev, fiber_incident(IncidentKind::fiber_cut, 0));
  REQUIRE(zero.size() == 1);
  CHECK(zero[0].kind == EventKind::cut);
  CHECK(zero[0].position_m == 0);
}

TEST_CASE("connector degradation and sensor trigger") {
  const auto route = straight_route();
  const std::vector<FiberEventSpec> ev{{3000, EventKind::connector, 0.5, -50.0},
                                       {15000, EventKind::connector, 0.3, -50.0}};
  auto d = apply_incident(route, ev, fiber_incident(IncidentKind::connector_degradation, 14000, 0.7));
  CHECK(d[0].loss_db == 0.5);
  CHECK(d[1].loss_db == doctest::Approx(1.0));
  auto s = apply_incident(route, ev, fiber_incident(IncidentKind::sensor_trigger, 9000, 1.2));
  REQUIRE(s.size() == 3);
  CHECK(s[1].kind == EventKind::sensor_trigger);
  CHECK(s[1].loss_db == doctest::Approx(0.6));
  CHECK_FALSE(s[1].reflectance_db);
}

TEST_CASE("apply_incident errors") {
  const auto route = straight_route();
  auto wrong = fiber_incident(IncidentKind::fiber_cut, 100);
  wrong.target = "elsewhere";
  CHECK_THROWS_AS(apply_incident(route, wrong), Error);
  try {
    apply_incident(route, wrong);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_found);
  }
  CHECK_THROWS_AS(apply_incident(route, fiber_incident(IncidentKind::fiber_cut, 30000)), Error);
  CHECK_THROWS_AS(apply_incident(route, fiber_incident(IncidentKind::fiber_cut, -1)), Error);
  auto overheat = fiber_incident(IncidentKind::device_overheat, 10);
  CHECK_THROWS_AS(apply_incident(route, overheat), Error);
}

TEST_CASE("fiber_cut is idempotent") {
  const auto route = straight_route();
  const std::vector<FiberEventSpec> ev{{5000, EventKind::splice, 0.2, {}},
                                       {20000, EventKind::connector, 0.5, -50.0}};
  const auto inc = fiber_incident(IncidentKind::fiber_cut, 12345);
  const auto once = apply_incident(route, ev, inc);
  CHECK(apply_incident(route, once, inc) == once);
}

TEST_CASE("traces are deterministic per seed") {
  const auto route = straight_route();
  const std::vector<FiberEventSpec> ev{{5000, EventKind::connector, 0.5, -50.0}};
  OtdrParams p;
  p.seed = 99;
  CHECK(synthesize_trace(route, ev, p).samples == synthesize_trace(route, ev, p).samples);
  auto q = p;
  q.seed = 100;
  CHECK(synthesize_trace(route, ev, p).samples != synthesize_trace(route, ev, q).samples);
}

TEST_CASE("noiseless non-reflective traces are non-increasing") {
  Xorshift64Star rng{21};
  for (int trial = 0; trial < 50; ++trial) {
    const auto route = straight_route(5000 + 20000 * rng.uniform());
    std::vector<FiberEventSpec> ev;
    for (int i = 0; i < 5; ++i)
      ev.push_back({rng.uniform() * route.length_m, EventKind::splice, rng.uniform(), {}});
    std::sort(ev.begin(), ev.end(),
              [](const auto& a, const auto& b) { return a.position_m < b.position_m; });
    const auto t = synthesize_trace(route, ev, quiet_params());
    for (std::size_t i = 1; i < t.samples.size(); ++i)
      CHECK(t.samples[i] <= t.samples[i - 1]);
  }
}

TEST_CASE("energy bookkeeping at the far end") {
  Xorshift64Star rng{22};
  for (int trial = 0; trial < 50; ++trial) {
    const double length = 10 * std::floor(500 + 2000 * rng.uniform());
    auto route = straight_route(length);
    route.attenuation_db_per_km = 0.15 + 0.2 * rng.uniform();
    std::vector<FiberEventSpec> ev;
    double total = 0;
    for (int i = 0; i < 4; ++i) {
      const double loss = rng.uniform();
      total += loss;
      ev.push_back({rng.uniform() * (length - 100), i % 2 ? EventKind::connector : EventKind::splice,
                    loss, i % 2 ? std::optional<double>{-55.0} : std::nullopt});
    }
    std::sort(ev.begin(), ev.end(),
              [](const auto& a, const auto& b) { return a.position_m < b.position_m; });
    const auto t = synthesize_trace(route, ev, quiet_params());
    const double expected = 30.0 - route.attenuation_db_per_km * length / 1000.0 - total;
    CHECK(std::abs(t.samples.back() - expected) <= 1e-9);
  }
}

TEST_CASE("trace length and bounds invariants") {
  Xorshift64Star rng{23};
  for (int trial = 0; trial < 100; ++trial) {
    const auto route = straight_route(1000 + 30000 * rng.uniform());
    OtdrParams p;
    p.sample_spacing_m = 1 + 20 * rng.uniform();
    p.noise_std_db_linear_equiv = 0.3 * rng.uniform();
    p.seed = rng.next();
    std::vector<FiberEventSpec> ev;
    for (int i = 0; i < 4; ++i)
      ev.push_back({rng.uniform() * route.length_m, EventKind::connector,
                    2 * rng.uniform(), -20 - 40 * rng.uniform()});
    std::sort(ev.begin(), ev.end(),
              [](const auto& a, const auto& b) { return a.position_m < b.position_m; });
    if (trial % 3 == 0)
      ev = apply_incident(route, ev, fiber_incident(IncidentKind::fiber_cut, rng.uniform() * route.length_m));
    const auto t = synthesize_trace(route, ev, p);
    CHECK(t.samples.size()
          == static_cast<std::size_t>(std::floor(route.length_m / p.sample_spacing_m)) + 1);
    for (double s : t.samples) {
      CHECK(s >= p.noise_floor_db - 3 * p.noise_std_db_linear_equiv);
      CHECK(s <= p.saturation());
    }
  }
}

TEST_CASE("route and params validation") {
  auto r = straight_route();
  CHECK(r.violations().empty());
  r.waypoints.front().latitude_deg = 95;
  r.attenuation_db_per_km = 0;
  CHECK(r.violations().size() == 2);
  OtdrParams p;
  p.noise_floor_db = 40;
  CHECK_FALSE(p.violations().empty());
  p = {};
  p.sample_spacing_m = 300;
  CHECK_FALSE(p.violations().empty());
}
