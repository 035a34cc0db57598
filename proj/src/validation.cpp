#include "sgles/validation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "sgles/analysis.hpp"
#include "sgles/error.hpp"
#include "sgles/filters.hpp"
#include "sgles/initial_conditions.hpp"
#include "sgles/random.hpp"
#include "sgles/training.hpp"

namespace sgles {

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed(); });
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"operators", "filters", "taylor-green", "gradients"};
  return names;
}

double gradient_check(const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& theta,
                      const std::vector<double>& grad, int samples, double h, std::uint64_t seed) {
  if (grad.size() != theta.size()) throw ConfigError("gradient_check: gradient length mismatch");
  if (samples < 1 || static_cast<std::size_t>(samples) > theta.size()) {
    throw ConfigError("gradient_check: sample count out of range");
  }
  std::vector<std::size_t> idx(theta.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Xoshiro256pp rng(seed);
  for (int s = 0; s < samples; ++s) {
    const std::size_t j = static_cast<std::size_t>(s) + rng.below(idx.size() - static_cast<std::size_t>(s));
    std::swap(idx[static_cast<std::size_t>(s)], idx[j]);
  }
  double num = 0.0, den = 0.0;
  for (int s = 0; s < samples; ++s) {
    const std::size_t i = idx[static_cast<std::size_t>(s)];
    auto tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (f(tp) - f(tm)) / (2 * h);
    num += (fd - grad[i]) * (fd - grad[i]);
    den += fd * fd;
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

std::vector<double> amplification_coefficients(const RKTableau& tab) {
  // R(z) = 1 + sum_{k>=1} z^k b^T A^{k-1} 1
  const auto s = static_cast<std::size_t>(tab.stages);
  std::vector<double> out{1.0};
  std::vector<double> v(s, 1.0);
  for (std::size_t k = 1; k <= s; ++k) {
    double bk = 0.0;
    for (std::size_t i = 0; i < s; ++i) bk += tab.b[i] * v[i];
    out.push_back(bk);
    std::vector<double> w(s, 0.0);
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t j = 0; j < s; ++j) w[i] += tab.coeff(static_cast<int>(i), static_cast<int>(j)) * v[j];
    }
    v = std::move(w);
  }
  return out;
}

namespace {

constexpr double kPi = std::numbers::pi;

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

void operators_suite(std::uint64_t seed, std::vector<Check>& out) {
  Xoshiro256pp rng(derive_seed(seed, 1));
  for (int dim : {2, 3}) {
    const Grid g = make_cube_grid(dim, dim == 2 ? 16 : 8);
    const std::string tag = dim == 2 ? "16^2" : "8^3";
    double dp = 0, pp = 0, pg = 0, adj = 0, skew = 0;
    for (int c = 0; c < 20; ++c) {
      const auto u = random_vector(g, rng);
      const auto p = random_scalar(g, rng);
      const auto pu = project(u);
      dp = std::max(dp, field_norm(divergence(pu)) * g.h(0) / field_norm(u));
      pp = std::max(pp, field_norm(project(pu) - pu) / field_norm(pu));
      const auto gp = pressure_gradient(p);
      pg = std::max(pg, field_norm(project(gp)) / field_norm(gp));
      const double a = inner_product(gp, u, Weighting::volume);
      const double b = inner_product(p, divergence(u), Weighting::volume);
      adj = std::max(adj, std::abs(a + b) / (field_norm(gp, Weighting::volume) * field_norm(u, Weighting::volume)));
      const double e = inner_product(pu, convection(pu), Weighting::volume);
      skew = std::max(skew, std::abs(e) / (field_norm(pu, Weighting::volume) *
                                           field_norm(convection(pu), Weighting::volume)));
    }
    out.push_back({"operators", "D(Pu) " + tag, dp, 1e-11});
    out.push_back({"operators", "P(Pu) - Pu " + tag, pp, 1e-11});
    out.push_back({"operators", "P(Gp) " + tag, pg, 1e-11});
    out.push_back({"operators", "<Gp,u> + <p,Du> " + tag, adj, 1e-11});
    out.push_back({"operators", "<u,C(u)> " + tag, skew, 1e-11});
  }
  const auto r = amplification_coefficients(wray3_tableau());
  const double expect[4] = {1.0, 1.0, 0.5, 1.0 / 6.0};
  double err = 0.0;
  for (std::size_t k = 0; k < 4; ++k) err = std::max(err, std::abs(r[k] - expect[k]));
  out.push_back({"operators", "Wray3 amplification polynomial", err, 1e-15});
}

void filters_suite(std::uint64_t seed, std::vector<Check>& out) {
  Xoshiro256pp rng(derive_seed(seed, 2));
  auto rel_div = [](const auto& u) { return field_norm(divergence(u)) / field_norm(u); };
  const FlowParams flow{1e-3, {}};
  for (int dim : {2, 3}) {
    const Grid f = make_cube_grid(dim, dim == 2 ? 128 : 32);
    const std::string tag = dim == 2 ? "128^2" : "32^3";
    const auto raw = random_vector(f, rng);
    const auto u = project(raw);
    const auto u32 = project(cast_field<float>(raw));
    for (std::int64_t m : {2, 4, 8}) {
      const auto map = make_coarsening(f, f.n(0) / m);
      const std::string at = tag + " m=" + std::to_string(m);
      out.push_back({"filters", "FA |Du|/|u| 64-bit " + at, rel_div(face_average(u, map)), 1e-11});
      out.push_back({"filters", "FA |Du|/|u| 32-bit " + at, rel_div(face_average(u32, map)), 1e-4});
      out.push_back({"filters", "VA |Du|/|u| " + at, rel_div(volume_average(u, map)), 1e-2, false});
      if (dim == 2) {
        const auto cfa = commutator(u, map, FilterKind::FA, flow);
        const auto cva = commutator(u, map, FilterKind::VA, flow);
        out.push_back({"filters", "FA |c - Pc|/|c| " + at, field_norm(cfa - project(cfa)) / field_norm(cfa), 1e-9});
        out.push_back({"filters", "VA |c - Pc|/|c| " + at, field_norm(cva - project(cva)) / field_norm(cva), 1e-3,
                       false});
      }
    }
  }
  // VA never exceeds FA; equality exactly when the excluded component vanishes.
  double violations = 0;
  const double width = 1.0 / 16;
  for (int a = -32; a < 32; ++a) {
    for (int b = -32; b < 32; ++b) {
      const double k[2] = {static_cast<double>(a), static_cast<double>(b)};
      const double gva = transfer_va(k, width);
      for (int alpha = 0; alpha < 2; ++alpha) {
        const double gfa = transfer_fa(k, width, alpha);
        if (gva > gfa || ((k[alpha] == 0.0) != (gva == gfa))) ++violations;
      }
    }
  }
  out.push_back({"filters", "transfer G_k <= G^a_k violations (64x64)", violations, 0.0});
}

void taylor_green_suite(std::vector<Check>& out) {
  for (int n : {1, 2, 4}) {
    const TGCrossCheck r = tg_solver_crosscheck(n, 256);
    out.push_back({"taylor-green", "commutator x n=" + std::to_string(n), r.max_error_x, 1e-12});
    out.push_back({"taylor-green", "commutator y n=" + std::to_string(n), r.max_error_y, 1e-12});
  }
  const TGState s = taylor_green(kPi / 2, 0.0, 0.0, 0.01);
  out.push_back({"taylor-green", "u(pi/2, 0, 0) + 1", std::abs(s.u + 1.0), 1e-12});
  out.push_back({"taylor-green", "v(pi/2, 0, 0)", std::abs(s.v), 1e-12});
  out.push_back({"taylor-green", "p(pi/2, 0, 0)", std::abs(s.p), 1e-12});
  const double nu = 0.05, t = 0.3, tau = 0.7;
  auto energy = [&](double time) {
    const TGState q = taylor_green(0.4, 1.1, time, nu);
    return q.u * q.u + q.v * q.v;
  };
  out.push_back({"taylor-green", "energy decay factor", std::abs(energy(t + tau) / energy(t) - std::exp(-4 * nu * tau)),
                 1e-12});
  out.push_back({"taylor-green", "continuous commutator at x=0", std::abs(tg_continuous_commutator(0.3, 0.0, 0.0)[0]),
                 1e-12});
  out.push_back({"taylor-green", "discrete coefficient n=0", std::abs(tg_discrete_commutator_coeff(0, 0.1) -
                                                                      (2.0 - sinc(0.1) - sinc(0.2))),
                 1e-12});
}

void gradients_suite(std::uint64_t seed, std::vector<Check>& out) {
  Xoshiro256pp rng(derive_seed(seed, 3));
  const Grid g = make_cube_grid(2, 16);
  const ClosureParams p = init_params(default_architecture(2), derive_seed(seed, 4));

  std::vector<VectorField<double>> u, c;
  for (int i = 0; i < 2; ++i) {
    u.push_back(project(random_vector(g, rng)));
    c.push_back(0.3 * random_vector(g, rng));
  }
  const PriorSample batch[2] = {{&u[0], &c[0]}, {&u[1], &c[1]}};
  const auto vg = loss_prior_grad(batch, p);
  auto prior = [&](const std::vector<double>& th) { return loss_prior(batch, make_params(p.arch, th)); };
  out.push_back({"gradients", "prior loss gradient vs central differences",
                 gradient_check(prior, p.theta, vg.grad, 20, 1e-5, derive_seed(seed, 5)), 1e-6});

  LESModel m;
  m.grid = g;
  m.closure = ClosureKind::cnn;
  m.cnn = p;
  m.flow.nu = 5e-3;
  m.flow.force = {ForceKind::kolmogorov, 1.0, 1};
  const double dt = 5e-3;
  std::vector<VectorField<double>> traj{project(random_spectral_field<double>(g, SpectrumSpec{3.0, seed}))};
  LESModel plain = m;
  plain.closure = ClosureKind::none;
  for (int i = 0; i < 3; ++i) traj.push_back(les_step(traj.back(), dt, plain));
  for (Formulation f : {Formulation::DCF, Formulation::DIF}) {
    m.formulation = f;
    const PostLoss l = loss_post(traj, m, dt, true);
    if (l.blew_up) throw NumericalError("gradient suite rollout diverged: " + l.diagnostic);
    auto post = [&](const std::vector<double>& th) {
      LESModel q = m;
      q.cnn.theta = th;
      return loss_post(traj, q, dt, false).value;
    };
    out.push_back({"gradients", std::string("post loss gradient (n_unroll=3, ") + formulation_name(f) + ")",
                   gradient_check(post, m.cnn.theta, l.grad, 20, 1e-4, derive_seed(seed, 6)), 1e-5});
  }

  // Convection pullback: quadratic map, so the unit-step central difference is exact.
  const auto x = random_vector(g, rng), v = random_vector(g, rng), w = random_vector(g, rng);
  const auto jv = 0.5 * (convection(x + v) - convection(x - v));
  VectorField<double> jtw(g);
  convection_vjp(x, w, jtw);
  const double lhs = inner_product(w, jv);
  out.push_back({"gradients", "convection pullback dot-product test", std::abs(lhs - inner_product(jtw, v)) /
                                                                            std::abs(lhs),
                 1e-12});
}

}  // namespace

SuiteReport run_suite(const std::string& name, std::uint64_t seed) {
  SuiteReport r;
  if (name == "all") {
    for (const auto& s : suite_names()) {
      const SuiteReport part = run_suite(s, seed);
      r.checks.insert(r.checks.end(), part.checks.begin(), part.checks.end());
    }
  } else if (name == "operators") {
    operators_suite(seed, r.checks);
  } else if (name == "filters") {
    filters_suite(seed, r.checks);
  } else if (name == "taylor-green") {
    taylor_green_suite(r.checks);
  } else if (name == "gradients") {
    gradients_suite(seed, r.checks);
  } else {
    throw ConfigError("unknown validation suite '" + name + "' (expected operators, filters, taylor-green, "
                      "gradients or all)");
  }
  return r;
}

void write_report_csv(const std::filesystem::path& path, const SuiteReport& r) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os.precision(17);
  os << "suite,check,value,bound,relation,pass\n";
  for (const Check& c : r.checks) {
    os << c.suite << ",\"" << c.name << "\"," << c.value << ',' << c.bound << ',' << (c.at_most ? "<=" : ">=") << ','
       << (c.passed() ? 1 : 0) << '\n';
  }
  if (!os) throw ConfigError("failed writing " + path.string());
}

}  // namespace sgles
