#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "sgles/initial_conditions.hpp"
#include "sgles/random.hpp"
#include "sgles/training.hpp"

using namespace sgles;
namespace fs = std::filesystem;

namespace {

CNNArchitecture small_arch() {
  CNNArchitecture a;
  a.dim = 2;
  a.layers = {{1, 2, 6, Activation::tanh, true}, {1, 6, 2, Activation::identity, false}};
  return a;
}

// Tiny generated dataset shared by the training tests.
const Dataset& tiny_dataset() {
  static const Dataset d = [] {
    const fs::path dir = fs::temp_directory_path() / "sgles_test_training_ds";
    fs::remove_all(dir);
    DatasetConfig c;
    c.dns_cells = 32;
    c.reynolds = 500;
    c.force = {ForceKind::kolmogorov, 2.0, 2};
    c.peak_wavenumber = 4;
    c.seeds = {11, 12, 13};
    c.t_burn = 0.05;
    c.t_end = 0.45;
    c.stride = 2;
    c.coarse_cells = {16};
    c.filters = {FilterKind::FA};
    c.split_counts = {1, 1, 1};
    generate_dataset(c, dir);
    Dataset ds = load_dataset(dir, 16, FilterKind::FA);
    fs::remove_all(dir);
    return ds;
  }();
  return d;
}

// Relative 2-norm error of g against central differences over sampled coordinates.
double fd_gap(const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& theta,
              const std::vector<double>& g, int samples, double h) {
  Xoshiro256pp rng(77);
  double num = 0.0, den = 0.0;
  for (int s = 0; s < samples; ++s) {
    const std::size_t i = rng.below(theta.size());
    auto tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (f(tp) - f(tm)) / (2 * h);
    num += (fd - g[i]) * (fd - g[i]);
    den += fd * fd;
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("a-priori loss reference values") {
  const Grid g = testing::unit_grid(2, 12);
  const auto u = testing::random_vector(g, 1);
  const ClosureParams p = init_params(small_arch(), 2);
  const auto m = cnn_forward(u, p);

  VectorField<double> c = m;
  PriorSample s{&u, &c};
  CHECK(loss_prior(std::span(&s, 1), p) == 0.0);

  VectorField<double> half = 0.5 * m;
  s.c = &half;
  CHECK(loss_prior(std::span(&s, 1), p) == doctest::Approx(1.0).epsilon(1e-14));

  // Zero model: loss 1 whatever the target scale.
  ClosureParams zero = p;
  std::fill(zero.theta.begin(), zero.theta.end(), 0.0);
  VectorField<double> big = 1e6 * testing::random_vector(g, 3), tiny = 1e-6 * testing::random_vector(g, 4);
  const PriorSample b[2] = {{&u, &big}, {&u, &tiny}};
  CHECK(loss_prior(b, zero) == doctest::Approx(1.0).epsilon(1e-14));

  VectorField<double> none(g);
  s.c = &none;
  CHECK_THROWS_AS(loss_prior(std::span(&s, 1), p), ConfigError);
  CHECK_THROWS_AS(loss_prior(std::span<const PriorSample>(), p), ConfigError);
}

TEST_CASE("a-priori gradient against finite differences") {
  const Grid g = testing::unit_grid(2, 16);
  const ClosureParams p = init_params(default_architecture(2), 5);
  std::vector<VectorField<double>> u, c;
  for (int i = 0; i < 2; ++i) {
    u.push_back(testing::random_solenoidal(g, 10 + i));
    c.push_back(0.3 * testing::random_vector(g, 20 + i));
  }
  const PriorSample b[2] = {{&u[0], &c[0]}, {&u[1], &c[1]}};
  const auto vg = loss_prior_grad(b, p);
  CHECK(vg.value == doctest::Approx(loss_prior(b, p)).epsilon(1e-13));
  auto f = [&](const std::vector<double>& th) { return loss_prior(b, make_params(p.arch, th)); };
  CHECK(fd_gap(f, p.theta, vg.grad, 20, 1e-5) <= 1e-6);

  // Worker count does not change the summation.
  const auto vg2 = loss_prior_grad(b, p, 2);
  CHECK(vg2.value == vg.value);
  CHECK(vg2.grad == vg.grad);
}

TEST_CASE("a-posteriori gradient against finite differences") {
  const Grid g = testing::unit_grid(2, 16);
  LESModel m;
  m.grid = g;
  m.closure = ClosureKind::cnn;
  m.cnn = init_params(default_architecture(2), 6);
  m.flow.nu = 5e-3;
  m.flow.force = {ForceKind::kolmogorov, 1.0, 1};
  std::vector<VectorField<double>> traj{project(random_spectral_field<double>(g, SpectrumSpec{3.0, 1}))};
  for (int i = 0; i < 3; ++i) {
    LESModel plain = m;
    plain.closure = ClosureKind::none;
    traj.push_back(les_step(traj.back(), 5e-3, plain));
  }
  for (Formulation f : {Formulation::DCF, Formulation::DIF}) {
    m.formulation = f;
    const PostLoss l = loss_post(traj, m, 5e-3, true);
    REQUIRE_FALSE(l.blew_up);
    CHECK(l.value == doctest::Approx(loss_post(traj, m, 5e-3, false).value).epsilon(1e-13));
    auto fn = [&](const std::vector<double>& th) {
      LESModel q = m;
      q.cnn.theta = th;
      return loss_post(traj, q, 5e-3, false).value;
    };
    CHECK(fd_gap(fn, m.cnn.theta, l.grad, 20, 1e-4) <= 1e-5);
  }
}

TEST_CASE("a-posteriori loss with replayed commutators vanishes") {
  const Grid fine = testing::unit_grid(2, 64);
  const auto map = make_coarsening(fine, 16);
  FlowParams flow;
  flow.nu = 2e-3;
  flow.force = {ForceKind::kolmogorov, 1.0, 2};
  const double dt = 2e-3;
  const int n = 10;
  auto u = project(random_spectral_field<double>(fine, SpectrumSpec{6.0, 3}));
  std::vector<VectorField<double>> ubar{apply_filter(u, map, FilterKind::FA)};
  std::vector<std::vector<VectorField<double>>> c(n);
  for (int s = 0; s < n; ++s) {
    const StageHook<double> hook = [&](int, const VectorField<double>& ui) {
      c[static_cast<std::size_t>(s)].push_back(commutator(ui, map, FilterKind::FA, flow));
    };
    u = rk_step<double>(u, dt, wray3_tableau(), [&](const VectorField<double>& x) { return rhs(x, flow); }, true, hook);
    ubar.push_back(apply_filter(u, map, FilterKind::FA));
  }
  LESModel m;
  m.grid = map.coarse;
  m.flow = flow;
  m.closure = ClosureKind::external;
  m.external = [&](const VectorField<double>&, const StageContext& ctx) {
    return c[static_cast<std::size_t>(ctx.step)][static_cast<std::size_t>(ctx.stage)];
  };
  CHECK(loss_post(ubar, m, dt, false).value <= 1e-10);

  // One unrolled step is the single-step prediction error.
  m.closure = ClosureKind::none;
  const auto v1 = les_step(ubar[0], dt, m);
  const double expect = std::pow(field_norm(v1 - ubar[1]) / field_norm(ubar[1]), 2);
  CHECK(loss_post(std::span(ubar).first(2), m, dt, false).value == doctest::Approx(expect).epsilon(1e-14));
  m.closure = ClosureKind::external;
  CHECK_THROWS_AS(loss_post(std::span(ubar).first(2), m, dt, true), ConfigError);
}

TEST_CASE("diverging rollouts return the sentinel") {
  const Grid g = testing::unit_grid(2, 16);
  LESModel m;
  m.grid = g;
  m.flow.nu = 1e-4;
  std::vector<VectorField<double>> traj(30, 40.0 * testing::random_solenoidal(g, 3));
  const PostLoss l = loss_post(traj, m, 0.5, false);
  CHECK(l.blew_up);
  CHECK(l.value == kBlowUpLoss);
  CHECK(l.diagnostic.find("step") != std::string::npos);
}

TEST_CASE("a-priori training") {
  const Dataset& d = tiny_dataset();
  REQUIRE(d.split(Split::train).size() == 1);
  const ClosureParams init = init_params(small_arch(), 3);
  TrainConfig cfg = default_train_config(LossKind::prior);
  cfg.batch_size = 4;
  cfg.iterations = 0;
  const TrainResult zero = train_prior(d, init, cfg);
  CHECK(zero.params.theta == init.theta);
  CHECK(zero.history.size() == 1);

  cfg.iterations = 60;
  cfg.validate_every = 10;
  cfg.seed = 4;
  cfg.output_dir = fs::temp_directory_path() / "sgles_test_train_prior";
  fs::remove_all(cfg.output_dir);
  const TrainResult a = train_prior(d, init, cfg);
  CHECK(a.best_valid < a.initial_valid);
  for (const MetricRow& r : a.history) {
    if (!std::isnan(r.valid_loss)) CHECK(a.best_valid <= r.valid_loss);
  }
  CHECK(validation_loss_prior(d, a.params, 0) == doctest::Approx(a.best_valid).epsilon(1e-13));
  CHECK(a.history.back().lr == doctest::Approx(cfg.lr_end));
  CHECK(load_params(cfg.output_dir / "best.cnp").theta == a.params.theta);
  std::ifstream csv(cfg.output_dir / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "iteration,lr,train_loss,valid_loss,wall_seconds");
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == 61);
  fs::remove_all(cfg.output_dir);

  cfg.output_dir.clear();
  cfg.workers = 2;
  const TrainResult b = train_prior(d, init, cfg);
  CHECK(b.params.theta == a.params.theta);
}

TEST_CASE("a-posteriori training and the Smagorinsky search") {
  const Dataset& d = tiny_dataset();
  const ClosureParams init = init_params(small_arch(), 8);
  TrainConfig cfg = default_train_config(LossKind::post);
  CHECK(cfg.n_unroll == 50);
  CHECK(cfg.lr_start == 1e-4);
  CHECK(cfg.lr_end == 1e-6);
  cfg.n_unroll = 3;
  cfg.iterations = 0;
  CHECK(train_post(d, init, cfg).params.theta == init.theta);
  cfg.iterations = 6;
  cfg.validate_every = 3;
  const TrainResult r = train_post(d, init, cfg);
  CHECK(r.best_valid <= r.initial_valid);
  const LESModel m = dataset_model(d, Formulation::DCF, r.params);
  CHECK(validation_loss_post(d, m, 3, 0) == doctest::Approx(r.best_valid).epsilon(1e-13));

  const auto grid = default_smagorinsky_grid();
  CHECK(grid.size() == 301);
  CHECK(grid[1] == 0.001);
  CHECK(grid.back() == 0.3);
  const std::vector<double> cands{0.3, 0.2, 0.1, 0.0};
  const SmagorinskySearch s = smagorinsky_search(d, Formulation::DCF, cands, 3);
  CHECK(s.losses.size() == 4);
  CHECK(s.loss == *std::min_element(s.losses.begin(), s.losses.end()));
}

TEST_CASE("Smagorinsky search on a closure-free dataset picks zero") {
  // Coarse grid equal to the DNS grid: the filter is the identity and c = 0.
  const Grid g = testing::unit_grid(2, 16);
  Dataset d;
  d.coarse = g;
  d.flow.nu = 2e-3;
  d.snapshot_dt = 4e-3;
  LESModel plain;
  plain.grid = g;
  plain.flow = d.flow;
  TrajectoryData t;
  t.ubar.push_back(project(random_spectral_field<double>(g, SpectrumSpec{3.0, 2})));
  for (int i = 0; i < 6; ++i) t.ubar.push_back(les_step(t.ubar.back(), d.snapshot_dt, plain));
  t.c.assign(t.ubar.size(), VectorField<double>(g));
  d.trajectories.push_back(t);
  const std::vector<double> cands{0.002, 0.001, 0.0, 0.05};
  const SmagorinskySearch s = smagorinsky_search(d, Formulation::DCF, cands, 3);
  CHECK(s.theta == 0.0);
  CHECK(s.loss <= 1e-28);
}

TEST_CASE("training configuration checks") {
  TrainConfig c;
  c.n_unroll = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  CHECK(parse_loss("post") == LossKind::post);
  CHECK_THROWS_AS(parse_loss("both"), ConfigError);
}
