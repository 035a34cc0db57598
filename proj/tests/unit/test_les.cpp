#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sgles/analysis.hpp"
#include "sgles/filters.hpp"
#include "sgles/initial_conditions.hpp"
#include "sgles/les.hpp"

using namespace sgles;

namespace {

LESModel make_model(const Grid& g, Formulation f, ClosureKind k, double nu = 1e-2) {
  LESModel m;
  m.grid = g;
  m.formulation = f;
  m.closure = k;
  m.flow.nu = nu;
  if (k == ClosureKind::cnn) {
    CNNArchitecture a;
    a.dim = g.dim();
    a.layers = {{1, g.dim(), 6, Activation::tanh, true}, {1, 6, g.dim(), Activation::identity, false}};
    m.cnn = init_params(a, 11);
  }
  if (k == ClosureKind::smagorinsky) m.smagorinsky_theta = 0.17;
  return m;
}

VectorField<double> initial(const Grid& g, std::uint64_t seed) {
  return project(random_spectral_field<double>(g, SpectrumSpec{3.0, seed}));
}

StepControl fixed(double dt) {
  StepControl c;
  c.mode = StepMode::fixed;
  c.dt = dt;
  return c;
}

}  // namespace

TEST_CASE("without a closure both formulations are identical") {
  const Grid g = testing::unit_grid(2, 16);
  const auto v = initial(g, 1);
  const LESModel dif = make_model(g, Formulation::DIF, ClosureKind::none);
  const LESModel dcf = make_model(g, Formulation::DCF, ClosureKind::none);
  CHECK(testing::max_abs(les_rhs(v, dif) - les_rhs(v, dcf)) == 0.0);
  CHECK(testing::max_abs(les_step(v, 1e-3, dif) - les_step(v, 1e-3, dcf)) == 0.0);
}

TEST_CASE("DCF output is divergence free for every closure") {
  for (int dim : {2, 3}) {
    const Grid g = testing::unit_grid(dim, dim == 2 ? 16 : 8);
    const auto v = initial(g, 2);
    for (ClosureKind k : {ClosureKind::none, ClosureKind::smagorinsky, ClosureKind::cnn}) {
      const auto r = les_rhs(v, make_model(g, Formulation::DCF, k));
      CHECK(testing::max_abs(divergence(r)) <= 1e-10 * testing::max_abs(r) / g.h(0));
    }
  }
}

TEST_CASE("DIF with a pre-projected closure equals DCF") {
  const Grid g = testing::unit_grid(2, 16);
  const auto w = project(testing::random_vector(g, 3));
  const auto v = initial(g, 4);
  LESModel dif = make_model(g, Formulation::DIF, ClosureKind::external);
  dif.external = [&](const VectorField<double>&, const StageContext&) { return w; };
  LESModel dcf = dif;
  dcf.formulation = Formulation::DCF;
  CHECK(testing::max_abs(les_rhs(v, dif) - les_rhs(v, dcf)) <= 1e-12 * testing::max_abs(w));

  // Stepped trajectories stay bit-close.
  auto a = v, b = v;
  for (int i = 0; i < 5; ++i) {
    a = les_step(a, 1e-3, dif, i);
    b = les_step(b, 1e-3, dcf, i);
    CHECK(testing::max_abs(a - b) <= 1e-12);
  }
}

TEST_CASE("compatibility chart: divergence along DCF and DIF runs") {
  const Grid g = testing::unit_grid(2, 16);
  const auto v0 = initial(g, 5);
  const double tol = 1e-10 * testing::max_abs(v0) / g.h(0);

  LESModel dcf = make_model(g, Formulation::DCF, ClosureKind::cnn);
  double worst = 0.0;
  run_les<double>(v0, dcf, fixed(2e-3), 0.02,
                  [&](std::int64_t, double, const VectorField<double>& v) { worst = std::max(worst, divergence_rms(v)); });
  CHECK(worst <= 10 * tol);

  // Closure with zero divergence by construction keeps DIF solenoidal.
  LESModel dif = make_model(g, Formulation::DIF, ClosureKind::external);
  dif.external = [](const VectorField<double>& v, const StageContext&) { return project(-0.3 * v); };
  worst = 0.0;
  run_les<double>(v0, dif, fixed(2e-3), 0.02,
                  [&](std::int64_t, double, const VectorField<double>& v) { worst = std::max(worst, divergence_rms(v)); });
  CHECK(worst <= 10 * tol);

  // Generic CNN under DIF: only the measured drift is reported.
  LESModel cnn = make_model(g, Formulation::DIF, ClosureKind::cnn);
  const auto r = run_les<double>(v0, cnn, fixed(2e-3), 0.02);
  CHECK(std::isfinite(divergence_rms(r.final)));
  CHECK(divergence_rms(r.final) > tol);
}

TEST_CASE("replaying per-stage commutators reproduces the filtered DNS") {
  const Grid fine = testing::unit_grid(2, 64);
  const auto map = make_coarsening(fine, 16);
  FlowParams flow;
  flow.nu = 2e-3;
  flow.force = {ForceKind::kolmogorov, 1.0, 2};
  const RKTableau tab = wray3_tableau();
  const double dt = 2e-3;

  auto u = project(random_spectral_field<double>(fine, SpectrumSpec{6.0, 7}));
  std::vector<VectorField<double>> ubar{apply_filter(u, map, FilterKind::FA)};
  std::vector<std::vector<VectorField<double>>> c(10);
  for (int s = 0; s < 10; ++s) {
    const StageHook<double> hook = [&](int, const VectorField<double>& ui) {
      c[static_cast<std::size_t>(s)].push_back(commutator(ui, map, FilterKind::FA, flow));
    };
    u = rk_step<double>(u, dt, tab, [&](const VectorField<double>& x) { return rhs(x, flow); }, true, hook);
    ubar.push_back(apply_filter(u, map, FilterKind::FA));
  }

  LESModel m = make_model(map.coarse, Formulation::DCF, ClosureKind::external);
  m.flow = flow;
  m.external = [&](const VectorField<double>&, const StageContext& ctx) {
    return c[static_cast<std::size_t>(ctx.step)][static_cast<std::size_t>(ctx.stage)];
  };
  const auto r = run_les(ubar[0], m, fixed(dt), 10 * dt);
  REQUIRE(r.states.size() == 11);
  for (std::size_t i = 0; i < r.states.size(); ++i) CHECK(testing::rel_diff(r.states[i], ubar[i]) <= 1e-8);
  CHECK(aposteriori_error(r.states, ubar) <= 1e-8);

  // Without the closure the same run drifts away.
  m.closure = ClosureKind::none;
  CHECK(aposteriori_error(run_les(ubar[0], m, fixed(dt), 10 * dt).states, ubar) > 1e-6);
}

TEST_CASE("zero field without forcing stays zero") {
  const Grid g = testing::unit_grid(2, 16);
  for (ClosureKind k : {ClosureKind::none, ClosureKind::smagorinsky}) {
    const auto r = run_les(VectorField<double>(g), make_model(g, Formulation::DIF, k), fixed(1e-2), 0.1);
    CHECK(r.steps == 10);
    CHECK(testing::max_abs(r.final) == 0.0);
  }
}

TEST_CASE("kinetic energy decays at the discrete dissipation rate") {
  const Grid g = testing::unit_grid(2, 32);
  const LESModel m = make_model(g, Formulation::DCF, ClosureKind::none, 5e-3);
  const auto v = initial(g, 8);
  double err_prev = 0.0;
  for (double dt : {4e-3, 2e-3}) {
    const double e_plus = total_energy(les_step(v, dt, m));
    const double e_minus = total_energy(les_step(v, -dt, m));
    const double rate = (e_plus - e_minus) / (2 * dt);
    const double err = std::abs(rate - dissipation(v, m.flow.nu));
    CHECK(err <= 1e-2 * std::abs(dissipation(v, m.flow.nu)));
    if (err_prev > 0.0) CHECK(err < 0.3 * err_prev);
    err_prev = err;
  }
}

TEST_CASE("blow-up ends the run with a partial trajectory") {
  const Grid g = testing::unit_grid(2, 16);
  const auto v0 = 50.0 * initial(g, 9);
  const auto r = run_les(v0, make_model(g, Formulation::DIF, ClosureKind::none, 1e-4), fixed(0.05), 50.0);
  CHECK(r.unstable);
  CHECK_FALSE(r.diagnostic.empty());
  CHECK(r.states.size() == static_cast<std::size_t>(r.steps) + 1);
  CHECK(all_finite<double>(r.final.flat()));
}

TEST_CASE("trajectory metrics") {
  const Grid g = testing::unit_grid(2, 8);
  std::vector<VectorField<double>> u{initial(g, 10), initial(g, 11)};
  CHECK(aposteriori_error(u, u) == 0.0);
  CHECK(aposteriori_error(std::vector<VectorField<double>>(2, VectorField<double>(g)), u) == doctest::Approx(1.0));
  std::vector<VectorField<double>> v{1.03 * u[0], 1.03 * u[1]};
  CHECK(aposteriori_error(v, u) == doctest::Approx(0.03).epsilon(1e-12));
  CHECK_THROWS_AS(aposteriori_error(std::vector<VectorField<double>>{u[0]}, u), ConfigError);

  VectorField<double> d(g);
  d.component(0)[5] = 0.25 * g.h(0);
  // One face value produces +delta and -delta in two cells.
  CHECK(divergence_rms(d) == doctest::Approx(0.25 * std::sqrt(2.0 / 64.0)));
  CHECK(divergence_rms(initial(g, 12)) <= 1e-12);

  VectorField<double> one(g);
  for (double& x : one.component(0)) x = 1.0;
  CHECK(total_energy(one) == doctest::Approx(0.5));
  CHECK(total_energy(2.0 * u[0]) == doctest::Approx(4.0 * total_energy(u[0])));
}

TEST_CASE("differentiable LES step matches the plain step and its gradient") {
  const Grid g = testing::unit_grid(2, 12);
  for (Formulation f : {Formulation::DIF, Formulation::DCF}) {
    LESModel m = make_model(g, f, ClosureKind::cnn);
    m.flow.force = {ForceKind::kolmogorov, 1.0, 1};
    const auto v = initial(g, 13);
    const auto w = testing::random_vector(g, 14);
    ad::Tape t;
    const ad::Var th = t.leaf(m.cnn.theta);
    const ad::Var out = ad::les_step(t, t.constant(v), th, 1e-2, m);
    CHECK(testing::max_abs(t.vector_value(out) - les_step(v, 1e-2, m)) <= 1e-14);
    t.backward(ad::dot_const(t, out, w.flat()));
    const auto grad = t.gradient(th);

    auto loss = [&](double eps, std::size_t i) {
      LESModel q = m;
      q.cnn.theta[i] += eps;
      return inner_product(les_step(v, 1e-2, q), w);
    };
    for (std::size_t i = 0; i < grad.size(); i += 9) {
      const double fd = (loss(1e-5, i) - loss(-1e-5, i)) / 2e-5;
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6).scale(1e-9));
    }
  }
  LESModel smag = make_model(g, Formulation::DCF, ClosureKind::smagorinsky);
  ad::Tape t;
  CHECK_THROWS_AS(ad::les_rhs(t, t.constant(initial(g, 1)), t.leaf(std::vector<double>{0.1}), smag), ConfigError);
}

TEST_CASE("model validation") {
  const Grid g = testing::unit_grid(2, 8);
  LESModel m = make_model(g, Formulation::DCF, ClosureKind::cnn);
  m.cnn.theta.pop_back();
  CHECK_THROWS_AS(validate(m), ConfigError);
  m = make_model(testing::unit_grid(3, 4), Formulation::DCF, ClosureKind::none);
  m.closure = ClosureKind::cnn;
  m.cnn = init_params(default_architecture(2), 1);
  CHECK_THROWS_AS(validate(m), ConfigError);
  m = make_model(g, Formulation::DCF, ClosureKind::external);
  CHECK_THROWS_AS(validate(m), ConfigError);
  CHECK(parse_formulation("DIF") == Formulation::DIF);
  CHECK_THROWS_AS(parse_closure("les"), ConfigError);
}
