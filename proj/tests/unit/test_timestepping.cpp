#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "sgles/timestepping.hpp"

using namespace sgles;

TEST_CASE("Wray3 tableau coefficients") {
  const RKTableau t = wray3_tableau();
  REQUIRE(t.stages == 3);
  CHECK(t.b[0] == 0.25);
  CHECK(t.b[1] == 0.0);
  CHECK(t.b[2] == 0.75);
  CHECK(t.coeff(1, 0) == 8.0 / 15.0);
  CHECK(t.coeff(2, 0) == 0.25);
  CHECK(t.coeff(2, 1) == 5.0 / 12.0);
  for (int i = 0; i < 3; ++i) {
    double row = 0.0;
    for (int j = 0; j < 3; ++j) {
      if (j >= i) CHECK(t.coeff(i, j) == 0.0);
      row += t.coeff(i, j);
    }
    CHECK(row == doctest::Approx(t.c[static_cast<std::size_t>(i)]).epsilon(1e-15));
  }
  CHECK(t.c[1] == 8.0 / 15.0);
  CHECK(t.c[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("order conditions hold through third order") {
  for (const RKTableau& t : {wray3_tableau(), rk4_tableau()}) {
    double sb = 0, bc = 0, bc2 = 0, bac = 0;
    for (int i = 0; i < t.stages; ++i) {
      const double bi = t.b[static_cast<std::size_t>(i)], ci = t.c[static_cast<std::size_t>(i)];
      sb += bi;
      bc += bi * ci;
      bc2 += bi * ci * ci;
      for (int j = 0; j < t.stages; ++j) bac += bi * t.coeff(i, j) * t.c[static_cast<std::size_t>(j)];
    }
    CHECK(sb == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bc == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(bc2 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(bac == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  }
}

TEST_CASE("linear amplification factor of Wray3") {
  const Grid g = make_cube_grid(2, 2);
  for (double z : {-0.5, -0.1, 0.3, 1.0}) {
    const double lambda = 2.0, dt = z / lambda;
    VectorField<double> u(g);
    for (double& v : u.flat()) v = 1.0;
    const RhsFn<double> f = [lambda](const VectorField<double>& x) { return lambda * x; };
    const auto un = rk_step(u, dt, wray3_tableau(), f, false);
    const double expect = 1 + z + z * z / 2 + z * z * z / 6;
    for (double v : un.flat()) CHECK(v == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("zero right-hand side leaves the state unchanged") {
  const Grid g = make_cube_grid(2, 8);
  const auto u = testing::random_vector(g, 1);
  const RhsFn<double> zero = [](const VectorField<double>& x) { return VectorField<double>(x.grid()); };
  const auto un = rk_step(u, 0.1, wray3_tableau(), zero, true);
  CHECK(testing::max_abs(un - u) == 0.0);
}

TEST_CASE("blow-up is reported") {
  const Grid g = make_cube_grid(2, 4);
  const RhsFn<double> bad = [](const VectorField<double>& x) {
    VectorField<double> r(x.grid());
    r.at(0, 0) = std::numeric_limits<double>::infinity();
    return r;
  };
  CHECK_THROWS_AS(rk_step(VectorField<double>(g), 0.1, wray3_tableau(), bad, false), NumericalError);
}

TEST_CASE("CFL time step") {
  const Grid g = make_cube_grid(2, 64);
  const FlowParams visc{0.01, {}};
  CHECK(cfl_dt(VectorField<double>(g), visc, 0.85) ==
        doctest::Approx(0.85 * g.h(0) * g.h(0) / (4 * 0.01)).epsilon(1e-12));
  VectorField<double> u(g);
  u.at(0, 7) = -1.0;
  u.at(1, 3) = 0.5;
  const FlowParams inviscid{0.0, {}};
  CHECK(cfl_dt(u, inviscid, 1.0) == doctest::Approx(1.0 / 64).epsilon(1e-10));
  CHECK(cfl_dt(u, inviscid, 0.5) == doctest::Approx(0.5 * cfl_dt(u, inviscid, 1.0)).epsilon(1e-15));
}

TEST_CASE("integrate") {
  const Grid g = make_cube_grid(2, 16);
  const FlowParams fp{0.05, {}};
  const auto u0 = testing::random_solenoidal(g, 2);
  StepControl ctl;
  const auto r0 = integrate(u0, 0.0, ctl, wray3_tableau(), fp);
  CHECK(r0.steps == 0);
  CHECK(testing::max_abs(r0.u - u0) <= 1e-12);

  std::int64_t last_step = -1;
  double last_t = -1;
  const auto r = integrate<double>(u0, 0.05, ctl, wray3_tableau(), fp,
                                   [&](std::int64_t s, double t, const VectorField<double>& u) {
                                     last_step = s;
                                     last_t = t;
                                     CHECK(field_norm(divergence(u)) * g.h(0) / field_norm(u) <= 1e-10);
                                   });
  CHECK(r.t == 0.05);
  CHECK(last_t == 0.05);
  CHECK(last_step == r.steps);
  const auto r2 = integrate(u0, 0.05, ctl, wray3_tableau(), fp);
  CHECK(std::equal(r.u.flat().begin(), r.u.flat().end(), r2.u.flat().begin()));

  StepControl capped = ctl;
  capped.max_steps = 2;
  CHECK_THROWS_AS(integrate(u0, 10.0, capped, wray3_tableau(), fp), NumericalError);
}

TEST_CASE("Taylor-Green energy decays at the analytic rate") {
  const double pi = std::numbers::pi;
  const Grid g = make_cube_grid(2, 64, {0.0, 2 * pi});
  VectorField<double> u(g);
  for_each_cell(g, [&](const CellStencil& s) {
    const auto [i, j, k] = s.ijk;
    u.at(0, s.c) = -std::sin(g.face(0, i)) * std::cos(g.center(1, j));
    u.at(1, s.c) = std::cos(g.center(0, i)) * std::sin(g.face(1, j));
  });
  const double nu = 1e-2, t_end = 1.0;
  StepControl ctl{StepMode::fixed, 0.01, 0.85, 1000};
  const auto r = integrate(u, t_end, ctl, wray3_tableau(), FlowParams{nu, {}});
  const double ratio = std::pow(field_norm(r.u, Weighting::volume) / field_norm(u, Weighting::volume), 2);
  CHECK(ratio == doctest::Approx(std::exp(-4 * nu * t_end)).epsilon(1e-4));
}
