#include <doctest.h>

#include <cmath>

#include "nudgelab/errors.hpp"
#include "nudgelab/lorenz.hpp"

using namespace nudgelab;

namespace {
const LorenzParams kClassic{10.0, 28.0, 8.0 / 3.0, 0.0};
}

TEST_CASE("rhs at the origin") {
  const LorenzState d = lorenz_rhs({0.0, 0.0, 0.0}, kClassic);
  CHECK(d.x == 0.0);
  CHECK(d.y == 0.0);
  CHECK(d.z == doctest::Approx(-(8.0 / 3.0) * 38.0).epsilon(1e-15));
}

TEST_CASE("rhs at (30, 40, 50)") {
  const LorenzState d = lorenz_rhs({30.0, 40.0, 50.0}, kClassic);
  CHECK(d.x == doctest::Approx(100.0));
  CHECK(d.y == doctest::Approx(-1840.0));
  CHECK(d.z == doctest::Approx(1200.0 - 400.0 / 3.0 - 304.0 / 3.0));
}

TEST_CASE("with b = 0 the z equation loses every term at x = y = 0") {
  LorenzParams p = kClassic;
  p.b = 0.0;
  for (double z : {-5.0, 0.0, 123.0})
    CHECK(lorenz_rhs({0.0, 0.0, z}, p).z == 0.0);
}

TEST_CASE("explicit Euler step") {
  // One hand-computed step from the rhs example.
  const LorenzState s = step_euler({30.0, 40.0, 50.0}, kClassic, 1e-4);
  CHECK(s.x == doctest::Approx(30.01).epsilon(1e-14));
  CHECK(s.y == doctest::Approx(39.816).epsilon(1e-14));
  CHECK(s.z == doctest::Approx(50.09653333333333).epsilon(1e-12));

  // Zero rhs leaves the state unchanged, as does dt = 0.
  LorenzParams frozen = kClassic;
  frozen.b = 0.0;
  const LorenzState rest{0.0, 0.0, 7.0};
  const LorenzState stepped = step_euler(rest, frozen, 0.1);
  CHECK(stepped.x == 0.0);
  CHECK(stepped.y == 0.0);
  CHECK(stepped.z == 7.0);
  const LorenzState same = step_euler({30.0, 40.0, 50.0}, kClassic, 0.0);
  CHECK(same.x == 30.0);
  CHECK(same.y == 40.0);
  CHECK(same.z == 50.0);
}

TEST_CASE("asymptotic bound branches") {
  LorenzParams p = kClassic;
  p.b = 1.0;
  CHECK(hayden_j(p) == doctest::Approx(784.0));
  p.b = 2.0;
  CHECK(hayden_j(p) == doctest::Approx(784.0));  // both branches agree
  p.b = 8.0 / 3.0;
  CHECK(hayden_j(p) == doctest::Approx(50176.0 / 60.0).epsilon(1e-14));

  // Continuity at the branch point.
  p.b = 2.0 - 1e-9;
  const double left = hayden_j(p);
  p.b = 2.0 + 1e-9;
  const double right = hayden_j(p);
  CHECK(std::abs(left - right) < 1e-5);
}

TEST_CASE("nudged rhs with assim == ref reduces to the plain rhs") {
  LorenzParams p = kClassic;
  p.mu = 10.0;
  const LorenzState s{3.0, -4.0, 5.0};
  const LorenzState plain = lorenz_rhs(s, p);
  const LorenzState coupled = coupled_rhs(s, s, CouplingVariant::nudge_xy, p);
  CHECK(coupled.x == plain.x);
  CHECK(coupled.y == plain.y);
  CHECK(coupled.z == plain.z);
}

TEST_CASE("direct insertion with b = 0 freezes the z offset") {
  LorenzParams p = kClassic;
  p.b = 0.0;
  const ErrorSeries s =
      run_twin({30.0, 40.0, 50.0}, {20.0, 30.0, 40.0},
               CouplingVariant::observe_xy, p, 1e-4, 5.0, {100});
  const auto& err_z = s.channel("err_z");
  for (double e : err_z) CHECK(std::abs(e - 10.0) <= 10.0 * 1e-10);
  // Observed components are inserted verbatim.
  for (double e : s.channel("err_x")) CHECK(e == 0.0);
  for (double e : s.channel("err_y")) CHECK(e == 0.0);
}

TEST_CASE("direct insertion with b > 0 contracts the z error at rate b") {
  const ErrorSeries s =
      run_twin({30.0, 40.0, 50.0}, {20.0, 30.0, 40.0},
               CouplingVariant::observe_xy, kClassic, 1e-4, 8.0, {10});
  const DecayFit fit = fit_decay_rate(s, "err_z", 5000);
  CHECK(fit.rate == doctest::Approx(-8.0 / 3.0).epsilon(0.05));
}

TEST_CASE("identical twins stay at machine scale") {
  LorenzParams p = kClassic;
  p.mu = 10.0;
  const ErrorSeries s =
      run_twin({30.0, 40.0, 50.0}, {30.0, 40.0, 50.0},
               CouplingVariant::nudge_xy, p, 1e-4, 2.0, {100});
  for (double e : s.channel("err_l2")) CHECK(e <= 1e-12);
}

TEST_CASE("divergence raises with the step index") {
  LorenzParams p = kClassic;
  p.mu = 10.0;
  try {
    run_twin({1e200, 1e200, 0.0}, {0.0, 0.0, 0.0}, CouplingVariant::nudge_xy,
             p, 1e-4, 1.0, {1});
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 1);
  }
}

TEST_CASE("parameter and CFL guards") {
  LorenzParams p = kClassic;
  p.sigma = -1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = kClassic;
  p.mu = 3.0 / 1e-4;  // mu >= 2/dt
  CHECK_THROWS_AS(run_twin({1, 1, 1}, {0, 0, 0}, CouplingVariant::nudge_xy, p,
                           1e-4, 1.0, {1}),
                  ValidationError);
}
