// Acceptance run: one PASS/FAIL line per criterion, with timings.
//
//   acceptance [--out DIR] [criterion ...]
//
// Without criterion numbers all twelve run. Exit status is 0 only when every
// selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgles/analysis.hpp"
#include "sgles/filters.hpp"
#include "sgles/initial_conditions.hpp"
#include "sgles/random.hpp"
#include "sgles/training.hpp"
#include "sgles/validation.hpp"

using namespace sgles;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

VectorField<double> random_vector(const Grid& g, Xoshiro256pp& rng) {
  VectorField<double> u(g);
  for (double& v : u.flat()) v = rng.uniform(-1.0, 1.0);
  return u;
}

ScalarField<double> random_scalar(const Grid& g, Xoshiro256pp& rng) {
  ScalarField<double> p(g);
  for (double& v : p.values()) v = rng.uniform(-1.0, 1.0);
  return p;
}

template <class T>
double rel_div(const VectorField<T>& u) {
  return field_norm(divergence(u)) / field_norm(u);
}

StepControl fixed_step(double dt) {
  StepControl c;
  c.mode = StepMode::fixed;
  c.dt = dt;
  return c;
}

// 1. Same-grid top-hat commutator of Taylor-Green against the closed form.
Outcome taylor_green_commutator() {
  double worst = 0.0;
  for (int n : {1, 2, 4}) {
    const TGCrossCheck r = tg_solver_crosscheck(n, 256);
    worst = std::max({worst, r.max_error_x, r.max_error_y});
  }
  return {worst <= 1e-12, "max |error| " + fmt(worst) + " over n = 1, 2, 4 (bound 1e-12)"};
}

// 2. FA keeps filtered fields divergence-free, VA does not.
Outcome fa_divergence_consistency() {
  double fa64 = 0, fa32 = 0, va = 1e300;
  for (int dim : {2, 3}) {
    const Grid g = make_cube_grid(dim, dim == 2 ? 128 : 32);
    for (std::uint64_t seed : {1, 2, 3}) {
      const SpectrumSpec spec{dim == 2 ? 10.0 : 4.0, seed};
      const auto u = random_spectral_field<double>(g, spec);
      const auto u32 = random_spectral_field<float>(g, spec);
      for (std::int64_t m : {2, 4, 8}) {
        const auto map = make_coarsening(g, g.n(0) / m);
        fa64 = std::max(fa64, rel_div(face_average(u, map)));
        fa32 = std::max(fa32, rel_div(face_average(u32, map)));
        va = std::min(va, rel_div(volume_average(u, map)));
      }
    }
  }
  const bool ok = fa64 <= 1e-11 && fa32 <= 1e-4 && va >= 1e-2;
  return {ok, "FA 64-bit " + fmt(fa64) + " (<= 1e-11), FA 32-bit " + fmt(fa32) + " (<= 1e-4), VA min " + fmt(va) +
                  " (>= 1e-2); 128^2 and 32^3, m = 2, 4, 8"};
}

// 3. FA commutators are divergence-free, VA commutators are not.
Outcome commutator_split() {
  double fa = 0, va = 1e300;
  FlowParams flow{1.0 / 2000, {ForceKind::kolmogorov, 5.0, 4}};
  for (int dim : {2, 3}) {
    const Grid g = make_cube_grid(dim, dim == 2 ? 128 : 32);
    const auto u = random_spectral_field<double>(g, {dim == 2 ? 10.0 : 4.0, 7});
    for (std::int64_t m : {2, 4, 8}) {
      const auto map = make_coarsening(g, g.n(0) / m);
      const auto cfa = commutator(u, map, FilterKind::FA, flow);
      const auto cva = commutator(u, map, FilterKind::VA, flow);
      fa = std::max(fa, field_norm(cfa - project(cfa)) / field_norm(cfa));
      va = std::min(va, field_norm(cva - project(cva)) / field_norm(cva));
    }
  }
  return {fa <= 1e-9 && va >= 1e-3,
          "FA |c - Pc|/|c| max " + fmt(fa) + " (<= 1e-9), VA min " + fmt(va) + " (>= 1e-3)"};
}

// 4. Projector and operator identities on random fields.
Outcome operator_algebra() {
  Xoshiro256pp rng(4);
  double worst = 0.0;
  std::string which;
  auto track = [&](double v, const char* name) {
    if (v > worst) {
      worst = v;
      which = name;
    }
  };
  for (int dim : {2, 3}) {
    const Grid g = make_cube_grid(dim, dim == 2 ? 16 : 8);
    for (int c = 0; c < 100; ++c) {
      const auto u = random_vector(g, rng);
      const auto p = random_scalar(g, rng);
      const auto pu = project(u);
      const auto gp = pressure_gradient(p);
      track(field_norm(divergence(pu)) * g.h(0) / field_norm(u), "D P");
      track(field_norm(project(pu) - pu) / field_norm(pu), "P^2 - P");
      track(field_norm(project(gp)) / field_norm(gp), "P G");
      const double a = inner_product(gp, u, Weighting::volume), b = inner_product(p, divergence(u), Weighting::volume);
      track(std::abs(a + b) / (field_norm(gp, Weighting::volume) * field_norm(u, Weighting::volume)), "adjointness");
      const auto cu = convection(pu);
      track(std::abs(inner_product(pu, cu, Weighting::volume)) /
                (field_norm(pu, Weighting::volume) * field_norm(cu, Weighting::volume)),
            "<u, C(u)>");
    }
  }
  return {worst <= 1e-11, "worst relative residual " + fmt(worst) + " (" + which + "), 100 cases at 16^2 and 8^3"};
}

// 5. Wray3: third-order self-convergence on Taylor-Green and R(z) from the tableau.
Outcome wray3_order() {
  const Grid g = make_cube_grid(2, 32, {0.0, 2 * kPi});
  VectorField<double> u0(g);
  for_each_cell(g, [&](const CellStencil& s) {
    const auto [i, j, k] = s.ijk;
    u0.at(0, s.c) = -std::sin(g.face(0, i)) * std::cos(g.center(1, j));
    u0.at(1, s.c) = std::cos(g.center(0, i)) * std::sin(g.face(1, j));
  });
  // nu dt / h^2 stays below the diffusive limit of Wray3 at the largest dt.
  const FlowParams flow{0.1, {}};
  std::vector<VectorField<double>> end;
  for (double dt : {0.1, 0.05, 0.025, 0.0125}) {
    end.push_back(integrate(u0, 10.0, fixed_step(dt), wray3_tableau(), flow).u);
  }
  double lo = 1e300, hi = -1e300;
  std::string orders;
  for (std::size_t i = 0; i + 2 < end.size(); ++i) {
    const double p = std::log2(field_norm(end[i] - end[i + 1]) / field_norm(end[i + 1] - end[i + 2]));
    lo = std::min(lo, p);
    hi = std::max(hi, p);
    orders += (i ? ", " : "") + fmt(p);
  }
  const auto r = amplification_coefficients(wray3_tableau());
  const double expect[4] = {1.0, 1.0, 0.5, 1.0 / 6.0};
  double poly = 0.0;
  for (std::size_t k = 0; k < 4; ++k) poly = std::max(poly, std::abs(r[k] - expect[k]));
  return {lo >= 2.7 && hi <= 3.3 && poly <= 1e-15,
          "orders " + orders + " (in [2.7, 3.3]); R(z) coefficient error " + fmt(poly)};
}

// 6. Inviscid, unforced energy conservation.
Outcome inviscid_energy() {
  const Grid g = make_cube_grid(2, 64);
  const auto u0 = random_spectral_field<double>(g, {10.0, 6});
  const double e0 = total_energy(u0);
  double drift = 0.0;
  integrate<double>(u0, 0.1, fixed_step(1e-4), wray3_tableau(), FlowParams{0.0, {}},
                    [&](std::int64_t, double, const VectorField<double>& u) {
                      drift = std::max(drift, std::abs(total_energy(u) - e0) / e0);
                    });
  return {drift <= 1e-7, "max |E(t) - E(0)|/E(0) = " + fmt(drift) + " over 1000 steps (<= 1e-7)"};
}

// 7. Loss gradients against central differences on a filtered DNS trajectory.
Outcome gradient_correctness() {
  const Grid fine = make_cube_grid(2, 64);
  const auto map = make_coarsening(fine, 16);
  FlowParams flow{1.0 / 2000, {ForceKind::kolmogorov, 5.0, 4}};
  auto u = project(random_spectral_field<double>(fine, {6.0, 17}));
  std::vector<VectorField<double>> ubar, c;
  const double dns_dt = 1e-3;
  const int stride = 5;
  for (int s = 0; s <= 3; ++s) {
    const FilteredPair fp = filter_and_commutator(u, map, FilterKind::FA, flow);
    ubar.push_back(fp.ubar);
    c.push_back(fp.c);
    if (s < 3) u = integrate(u, stride * dns_dt, fixed_step(dns_dt), wray3_tableau(), flow).u;
  }
  const ClosureParams p = init_params(default_architecture(2), 21);

  std::vector<PriorSample> batch;
  for (std::size_t i = 0; i < ubar.size(); ++i) batch.push_back({&ubar[i], &c[i]});
  const auto vg = loss_prior_grad(batch, p);
  auto prior = [&](const std::vector<double>& th) { return loss_prior(batch, make_params(p.arch, th)); };
  const double gap_prior = gradient_check(prior, p.theta, vg.grad, 20, 1e-5, 101);

  LESModel m;
  m.grid = map.coarse;
  m.flow = flow;
  m.closure = ClosureKind::cnn;
  m.cnn = p;
  double gap_post = 0.0;
  for (Formulation f : {Formulation::DCF, Formulation::DIF}) {
    m.formulation = f;
    const PostLoss l = loss_post(ubar, m, stride * dns_dt, true);
    if (l.blew_up) return {false, "rollout diverged: " + l.diagnostic};
    auto post = [&](const std::vector<double>& th) {
      LESModel q = m;
      q.cnn.theta = th;
      return loss_post(ubar, q, stride * dns_dt, false).value;
    };
    gap_post = std::max(gap_post, gradient_check(post, m.cnn.theta, l.grad, 20, 1e-4, 202));
  }
  return {gap_prior <= 1e-6 && gap_post <= 1e-5,
          "prior gap " + fmt(gap_prior) + " (<= 1e-6), post gap (n_unroll 3, DCF and DIF) " + fmt(gap_post) +
              " (<= 1e-5); 20 coordinates, 16^2"};
}

// 8. Parameter counts and receptive-field locality of the default CNN.
Outcome architecture_fidelity() {
  const std::size_t n2 = param_count(default_architecture(2));
  const std::size_t n3 = param_count(default_architecture(3));
  const int radius = probe_locality_radius(init_params(default_architecture(2), 8), 32, 8);
  return {n2 == 45696 && n3 == 234096 && radius == 9,
          "parameters 2D " + std::to_string(n2) + " (45696), 3D " + std::to_string(n3) +
              " (234096); measured locality radius " + std::to_string(radius) + " (required 9)"};
}

// 9. DCF/FA LES driven by the DNS commutators reproduces the filtered DNS.
Outcome oracle_rollout() {
  const Grid fine = make_cube_grid(2, 128);
  const auto map = make_coarsening(fine, 32);
  FlowParams flow{1.0 / 2000, {ForceKind::kolmogorov, 5.0, 4}};
  const RKTableau tab = wray3_tableau();
  auto u = project(random_spectral_field<double>(fine, {10.0, 9}));
  const double dt = 0.5 * cfl_dt(u, flow, 0.85);
  std::vector<VectorField<double>> ubar{apply_filter(u, map, FilterKind::FA)};
  std::vector<std::vector<VectorField<double>>> c(10);
  for (std::size_t s = 0; s < 10; ++s) {
    const StageHook<double> hook = [&](int, const VectorField<double>& ui) {
      c[s].push_back(commutator(ui, map, FilterKind::FA, flow));
    };
    u = rk_step<double>(u, dt, tab, [&](const VectorField<double>& x) { return rhs(x, flow); }, true, hook);
    ubar.push_back(apply_filter(u, map, FilterKind::FA));
  }
  LESModel m;
  m.grid = map.coarse;
  m.flow = flow;
  m.formulation = Formulation::DCF;
  m.closure = ClosureKind::external;
  m.external = [&](const VectorField<double>&, const StageContext& ctx) {
    return c[static_cast<std::size_t>(ctx.step)][static_cast<std::size_t>(ctx.stage)];
  };
  const auto r = run_les(ubar[0], m, fixed_step(dt), 10 * dt);
  double worst = 0.0;
  for (std::size_t i = 0; i < r.states.size() && i < ubar.size(); ++i) {
    worst = std::max(worst, field_norm(r.states[i] - ubar[i]) / field_norm(ubar[i]));
  }
  m.closure = ClosureKind::none;
  const auto plain = run_les(ubar[0], m, fixed_step(dt), 10 * dt);
  const double drift = field_norm(plain.final - ubar.back()) / field_norm(ubar.back());
  return {r.states.size() == 11 && worst <= 1e-8,
          "max relative error over 10 steps " + fmt(worst) + " (<= 1e-8); without closure " + fmt(drift)};
}

// 10. Desk-scale training and a-posteriori comparison.
Outcome desk_training(const fs::path& out) {
  DatasetConfig dc;
  dc.dns_cells = 256;
  dc.reynolds = 2000;
  dc.force = {ForceKind::kolmogorov, 5.0, 4};
  dc.peak_wavenumber = 10;
  dc.seeds = {1, 2, 3, 4, 5, 6, 7, 8};
  dc.split_counts = {6, 1, 1};
  dc.t_burn = 0.5;
  dc.t_end = 0.74;
  dc.stride = 5;
  dc.coarse_cells = {32};
  dc.filters = {FilterKind::FA};
  const fs::path dir = out / "desk_dataset";
  fs::remove_all(dir);
  const DatasetManifest man = generate_dataset(dc, dir);
  const Dataset d = load_dataset(dir, 32, FilterKind::FA);

  TrainConfig tc = default_train_config(LossKind::prior);
  tc.batch_size = 64;
  tc.iterations = 500;
  tc.seed = 1;
  tc.output_dir = out / "desk_prior";
  fs::remove_all(tc.output_dir);
  fs::create_directories(tc.output_dir);
  const TrainResult tr = train_prior(d, init_params(default_architecture(2), 1), tc);

  const int horizon = 50;
  const auto test = d.split(Split::test);
  if (test.empty() || test[0]->ubar.size() < static_cast<std::size_t>(horizon + 1)) {
    return {false, "test trajectory shorter than the 50-step horizon"};
  }
  const auto& ref = test[0]->ubar;
  const double dt = d.snapshot_dt;
  auto error_at_horizon = [&](const LESTrajectory<double>& r) {
    if (r.unstable || r.states.size() < static_cast<std::size_t>(horizon + 1)) return double(INFINITY);
    double s = 0.0;
    for (int i = 1; i <= horizon; ++i) s += field_norm(r.states[i] - ref[i]) / field_norm(ref[i]);
    return s / horizon;
  };
  LESModel base = dataset_model(d, Formulation::DCF, tr.params);

  LESModel none = base;
  none.closure = ClosureKind::none;
  const double e_none = error_at_horizon(run_les(ref[0], none, fixed_step(dt), horizon * dt));

  const auto grid = default_smagorinsky_grid();
  const SmagorinskySearch ss = smagorinsky_search(d, Formulation::DCF, grid, horizon);
  LESModel smag = base;
  smag.closure = ClosureKind::smagorinsky;
  smag.smagorinsky_theta = ss.theta;
  const double e_smag = error_at_horizon(run_les(ref[0], smag, fixed_step(dt), horizon * dt));

  const double tol = 1e-10 * [&] {
    double m = 0.0;
    for (double v : ref[0].flat()) m = std::max(m, std::abs(v));
    return m;
  }() / d.coarse.h(0);
  double div_dcf = 0.0;
  const auto cnn = run_les<double>(ref[0], base, fixed_step(dt), horizon * dt,
                                   [&](std::int64_t, double, const VectorField<double>& v) {
                                     div_dcf = std::max(div_dcf, divergence_rms(v));
                                   });
  const double e_cnn = error_at_horizon(cnn);

  // Observational only: energy and divergence traces of DCF and DIF with the same CNN.
  const int free_steps = 500;
  std::vector<std::array<double, 4>> trace(free_steps + 1, {NAN, NAN, NAN, NAN});
  LESModel dif = base;
  dif.formulation = Formulation::DIF;
  std::string dif_note = "stable";
  for (int k = 0; k < 2; ++k) {
    const auto r = run_les<double>(ref[0], k == 0 ? base : dif, fixed_step(dt), free_steps * dt,
                                   [&](std::int64_t s, double, const VectorField<double>& v) {
                                     trace[static_cast<std::size_t>(s)][2 * k] = total_energy(v);
                                     trace[static_cast<std::size_t>(s)][2 * k + 1] = divergence_rms(v);
                                   });
    if (k == 1 && r.unstable) dif_note = "blew up at step " + std::to_string(r.steps + 1);
  }
  std::ofstream csv(out / "desk_energy_trace.csv");
  csv.precision(10);
  csv << "step,t,energy_dcf,divergence_dcf,energy_dif,divergence_dif\n";
  for (int s = 0; s <= free_steps; ++s) {
    const auto& t = trace[static_cast<std::size_t>(s)];
    csv << s << ',' << s * dt << ',' << t[0] << ',' << t[1] << ',' << t[2] << ',' << t[3] << '\n';
  }

  const bool a = tr.best_valid < 1.0;
  const bool b = e_cnn < e_none && e_cnn < e_smag;
  const bool c = div_dcf <= 10 * tol;
  std::ostringstream os;
  os << "(a) valid L_prior " << fmt(tr.initial_valid) << " -> " << fmt(tr.best_valid) << " [" << (a ? "ok" : "no")
     << "]; (b) 50-step error CNN " << fmt(e_cnn) << " vs none " << fmt(e_none) << ", Smagorinsky(" << ss.theta
     << ") " << fmt(e_smag) << " [" << (b ? "ok" : "no") << "]; (c) DCF max divergence_rms " << fmt(div_dcf)
     << " <= " << fmt(10 * tol) << " [" << (c ? "ok" : "no") << "]; DIF free run " << dif_note << "; "
     << man.trajectories.size() << " trajectories, snapshot dt " << fmt(dt);
  return {a && b && c, os.str()};
}

// 11. Spectra of filtered fields.
Outcome spectra() {
  const Grid g = make_cube_grid(2, 256);
  const auto u = random_spectral_field<double>(g, {10.0, 11});
  const auto map = make_coarsening(g, 32);
  const auto fa = face_average(u, map);
  const auto va = volume_average(u, map);
  const SpectrumResult su = energy_spectrum(u), sfa = energy_spectrum(fa), sva = energy_spectrum(va);

  double beyond = 0.0;
  for (std::size_t i = 0; i < su.kappa.size(); ++i) {
    if (su.kappa[i] > 16.0) beyond += su.energy[i];
  }
  const bool stop = sfa.kappa.back() <= 16.0 && sva.kappa.back() <= 16.0 && beyond > 0.0;

  double parseval = 0.0;
  for (const auto* f : {&u, &fa, &va}) {
    const double e = total_energy(*f) / f->grid().box_volume();
    parseval = std::max(parseval, std::abs(modal_energy_sum(*f) - e) / e);
  }
  bool ordered = sfa.kappa == sva.kappa;
  double worst = INFINITY;
  for (std::size_t i = 0; ordered && i < sfa.energy.size(); ++i) {
    worst = std::min(worst, sfa.energy[i] - sva.energy[i]);
    if (sfa.energy[i] < sva.energy[i]) ordered = false;
  }
  return {stop && parseval <= 1e-10 && ordered,
          "filtered bins end at kappa " + fmt(sfa.kappa.back()) + " (DNS energy above 16: " + fmt(beyond) +
              "); Parseval " + fmt(parseval) + " (<= 1e-10); min FA - VA bin energy " + fmt(worst) + " (>= 0)"};
}

// 12. Transfer-function ordering with equality exactly on k_alpha = 0.
Outcome transfer_inequality() {
  long violations = 0, equal = 0;
  const double width = 1.0 / 32;
  for (int a = -32; a < 32; ++a) {
    for (int b = -32; b < 32; ++b) {
      const double k[2] = {static_cast<double>(a), static_cast<double>(b)};
      const double gva = transfer_va(k, width);
      for (int alpha = 0; alpha < 2; ++alpha) {
        const double gfa = transfer_fa(k, width, alpha);
        const bool eq = gva == gfa;
        equal += eq;
        if (gva > gfa || eq != (k[alpha] == 0.0)) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations on 64x64 samples, both axes (" +
                               std::to_string(equal) + " equalities)"};
}

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out, "directory for artifacts");
  app.add_option("criteria", only, "criterion numbers to run (default: all)");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  const std::vector<Criterion> all{
      {1, "Taylor-Green discrete commutator exactness", 10, taylor_green_commutator},
      {2, "FA divergence consistency", 30, fa_divergence_consistency},
      {3, "commutator divergence split", 60, commutator_split},
      {4, "projector and operator algebra", 10, operator_algebra},
      {5, "Wray3 order", 30, wray3_order},
      {6, "inviscid energy conservation", 60, inviscid_energy},
      {7, "gradient correctness", 120, gradient_correctness},
      {8, "architecture fidelity", 10, architecture_fidelity},
      {9, "oracle-closure rollout", 60, oracle_rollout},
      {10, "desk-scale training", 1200, [&] { return desk_training(out); }},
      {11, "spectra", 30, spectra},
      {12, "transfer-function inequality", 1, transfer_inequality},
  };

  int ran = 0, passed = 0;
  for (const Criterion& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool ok = o.pass && in_time;
    ++ran;
    passed += ok;
    std::printf("%s %2d %s: %s [%.2f s, limit %g s%s]\n", ok ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), secs,
                c.limit_seconds, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", passed, ran);
  return passed == ran ? 0 : 1;
}
