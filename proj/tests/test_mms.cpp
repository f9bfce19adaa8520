#include <catch2/catch_amalgamated.hpp>

#include "epcal/mms.hpp"

using namespace epcal;

TEST_CASE("diffusivity from CV_max: hand-computed oracle") {
  EPParams p{0.7, 0.05, 6.0, 120.0, 180.0};
  const MMSRawParams raw = to_raw(p);
  // D = tau_in * (CV / (0.5*(1-2*V_gate)))^2 / 2 with CV in mm/ms
  CHECK(raw.diffusivity == Catch::Approx(0.0765625).epsilon(1e-12));
}

TEST_CASE("tau_close from APD_max: hand-computed oracle") {
  EPParams p{0.7, 0.05, 6.0, 120.0, 180.0};
  const MMSRawParams raw = to_raw(p);
  // tau_close = APD_max / ln(1 + tau_out*(1-V_gate)^2/(4*tau_in))
  const double arg = 1.0 + 6.0 * 0.81 / (4.0 * 0.05);
  CHECK(arg == Catch::Approx(25.3));
  CHECK(raw.tau_close == Catch::Approx(180.0 / std::log(25.3)).epsilon(1e-12));
  CHECK(raw.tau_close == Catch::Approx(55.71).epsilon(1e-3));
}

TEST_CASE("round trip raw <-> reparameterized to 1e-10 relative") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    EPParams p;
    p.cv_max = 0.1 + 1.4 * rng.uniform();
    p.tau_in = 0.01 + 0.29 * rng.uniform();
    p.tau_out = 1.0 + 29.0 * rng.uniform();
    p.tau_open = 65.0 + 150.0 * rng.uniform();
    p.apd_max = 120.0 + 150.0 * rng.uniform();
    const EPParams back = from_raw(to_raw(p));
    CHECK(back.cv_max == Catch::Approx(p.cv_max).epsilon(1e-10));
    CHECK(back.tau_in == Catch::Approx(p.tau_in).epsilon(1e-10));
    CHECK(back.tau_out == Catch::Approx(p.tau_out).epsilon(1e-10));
    CHECK(back.tau_open == Catch::Approx(p.tau_open).epsilon(1e-10));
    CHECK(back.apd_max == Catch::Approx(p.apd_max).epsilon(1e-10));
  }
}

TEST_CASE("out-of-range parameters are rejected") {
  EPParams p{0.7, 0.05, 6.0, 120.0, 180.0};
  SECTION("cv") { p.cv_max = 2.0; CHECK_THROWS_AS(to_raw(p), Error); }
  SECTION("tau_in") { p.tau_in = 0.0; CHECK_THROWS_AS(to_raw(p), Error); }
  SECTION("tau_out") { p.tau_out = 40.0; CHECK_THROWS_AS(to_raw(p), Error); }
  SECTION("apd") { p.apd_max = 80.0; CHECK_THROWS_AS(to_raw(p), Error); }
}

TEST_CASE("resting state is a fixed point of the cell update") {
  const MMSRawParams raw = to_raw({0.7, 0.05, 6.0, 120.0, 180.0});
  CellState s{0.0, 1.0};
  for (int i = 0; i < 100; ++i) s = step_cell(s, raw, 0.0, 0.02);
  CHECK(std::abs(s.vm) < 1e-12);
  CHECK(std::abs(s.h - 1.0) < 1e-12);
}

TEST_CASE("gate dynamics: direct arithmetic below and above V_gate") {
  MMSRawParams raw = to_raw({0.7, 0.05, 6.0, 100.0, 180.0});

  // V_m = 0 <= V_gate: dh/dt = (1-h)/tau_open, h=0.5, dt=1, tau_open=100
  CellState below{0.0, 0.5};
  const CellState b2 = step_cell(below, raw, 0.0, 1.0);
  CHECK(b2.h == Catch::Approx(0.505).epsilon(1e-12));

  // V_m = 0.5 > V_gate: dh/dt = -h/tau_close, h=1, dt=1
  CellState above{0.5, 1.0};
  const CellState a2 = step_cell(above, raw, 0.0, 1.0);
  CHECK(a2.h == Catch::Approx(1.0 - 1.0 / raw.tau_close).epsilon(1e-12));
}

TEST_CASE("stimulated cell depolarizes") {
  const MMSRawParams raw = to_raw({0.7, 0.05, 6.0, 120.0, 180.0});
  CellState s{0.0, 1.0};
  for (double t = 0; t < 2.0; t += 0.02) s = step_cell(s, raw, 0.5, 0.02);
  for (double t = 0; t < 20.0; t += 0.02) s = step_cell(s, raw, 0.0, 0.02);
  CHECK(s.vm > 0.7);  // in the excited phase
}

TEST_CASE("vanishing tau_out makes tau_close singular") {
  EPParams p{0.7, 0.05, 6.0, 120.0, 180.0};
  p.tau_out = 1e-12;
  CHECK_THROWS_AS(to_raw(p), Error);
}
