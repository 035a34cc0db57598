#include "sgles/operators.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "sgles/fft.hpp"

namespace sgles {

void validate(const FlowParams& p, bool allow_inviscid) {
  if (!std::isfinite(p.nu) || p.nu < 0.0 || (!allow_inviscid && p.nu == 0.0)) {
    throw ConfigError("viscosity must be positive");
  }
  if (!std::isfinite(p.force.amplitude)) throw ConfigError("body force amplitude must be finite");
  if (p.force.kind == ForceKind::kolmogorov && p.force.wavenumber < 1) {
    throw ConfigError("forcing wavenumber must be >= 1");
  }
}

template <class T>
ScalarField<T> divergence(const VectorField<T>& u) {
  const Grid& g = u.grid();
  ScalarField<T> out(g);
  const int d = g.dim();
  T inv_h[3];
  for (int a = 0; a < d; ++a) inv_h[a] = static_cast<T>(1.0 / g.h(a));
  for_each_cell(g, [&](const CellStencil& s) {
    T acc = 0;
    for (int a = 0; a < d; ++a) acc += (u.at(a, s.c) - u.at(a, s.m[a])) * inv_h[a];
    out[s.c] = acc;
  });
  return out;
}

template <class T>
VectorField<T> pressure_gradient(const ScalarField<T>& p) {
  const Grid& g = p.grid();
  VectorField<T> out(g);
  const int d = g.dim();
  T inv_h[3];
  for (int a = 0; a < d; ++a) inv_h[a] = static_cast<T>(1.0 / g.h(a));
  for_each_cell(g, [&](const CellStencil& s) {
    for (int a = 0; a < d; ++a) out.at(a, s.c) = (p[s.p[a]] - p[s.c]) * inv_h[a];
  });
  return out;
}

template <class T>
VectorField<T> convection(const VectorField<T>& u) {
  const Grid& g = u.grid();
  const int d = g.dim();
  const std::size_t n = g.cell_count();
  VectorField<T> out(g);
  std::vector<T> flux(n);
  for (int a = 0; a < d; ++a) {
    auto ua = u.component(a);
    auto oa = out.component(a);
    for (int b = 0; b < d; ++b) {
      auto ub = u.component(b);
      // Flux through the b-face of the u^a control volume.
      for_each_cell(g, [&](const CellStencil& s) {
        flux[s.c] = T(0.25) * (ua[s.c] + ua[s.p[b]]) * (ub[s.c] + ub[s.p[a]]);
      });
      const T inv_h = static_cast<T>(1.0 / g.h(b));
      for_each_cell(g, [&](const CellStencil& s) { oa[s.c] -= (flux[s.c] - flux[s.m[b]]) * inv_h; });
    }
  }
  return out;
}

template <class T>
void convection_vjp(const VectorField<T>& u, const VectorField<T>& w, VectorField<T>& grad) {
  const Grid& g = u.grid();
  require_same_grid(g, w.grid(), "convection_vjp");
  require_same_grid(g, grad.grid(), "convection_vjp");
  const int d = g.dim();
  const std::size_t n = g.cell_count();
  std::vector<T> ga(n), gb(n);
  for (int a = 0; a < d; ++a) {
    auto ua = u.component(a);
    auto wa = w.component(a);
    for (int b = 0; b < d; ++b) {
      auto ub = u.component(b);
      const T inv_h = static_cast<T>(1.0 / g.h(b));
      // gF = -(D-_b)^T w^a; then split the product rule over both averages.
      for_each_cell(g, [&](const CellStencil& s) {
        const T gf = (wa[s.p[b]] - wa[s.c]) * inv_h;
        ga[s.c] = gf * T(0.5) * (ub[s.c] + ub[s.p[a]]);
        gb[s.c] = gf * T(0.5) * (ua[s.c] + ua[s.p[b]]);
      });
      auto gra = grad.component(a);
      for_each_cell(g, [&](const CellStencil& s) { gra[s.c] += T(0.5) * (ga[s.c] + ga[s.m[b]]); });
      auto grb = grad.component(b);
      for_each_cell(g, [&](const CellStencil& s) { grb[s.c] += T(0.5) * (gb[s.c] + gb[s.m[a]]); });
    }
  }
}

template <class T>
VectorField<T> diffusion(const VectorField<T>& u, double nu) {
  const Grid& g = u.grid();
  const int d = g.dim();
  VectorField<T> out(g);
  if (nu == 0.0) return out;
  T c[3];
  for (int b = 0; b < d; ++b) c[b] = static_cast<T>(nu / (g.h(b) * g.h(b)));
  for (int a = 0; a < d; ++a) {
    auto ua = u.component(a);
    auto oa = out.component(a);
    for_each_cell(g, [&](const CellStencil& s) {
      T acc = 0;
      for (int b = 0; b < d; ++b) acc += c[b] * (ua[s.p[b]] - T(2) * ua[s.c] + ua[s.m[b]]);
      oa[s.c] = acc;
    });
  }
  return out;
}

template <class T>
VectorField<T> body_force(const Grid& g, const BodyForceSpec& spec) {
  VectorField<T> out(g);
  if (spec.kind == ForceKind::none) return out;
  const double k = 2.0 * std::numbers::pi * spec.wavenumber;
  auto f = out.component(0);
  for (std::int64_t j = 0; j < g.n(1); ++j) {
    const T v = static_cast<T>(spec.amplitude * std::sin(k * g.center(1, j)));
    for (std::int64_t kk = 0; kk < g.n(2); ++kk) {
      for (std::int64_t i = 0; i < g.n(0); ++i) f[g.index(i, j, kk)] = v;
    }
  }
  return out;
}

template <class T>
VectorField<T> rhs(const VectorField<T>& u, const FlowParams& params) {
  VectorField<T> out = convection(u);
  if (params.nu != 0.0) axpy(T(1), diffusion(u, params.nu), out);
  if (params.force.kind != ForceKind::none) axpy(T(1), body_force<T>(u.grid(), params.force), out);
  return out;
}

namespace {

// Squared modified wavenumbers (2 sin(pi k / N) / h)^2 per axis.
std::vector<double> eigen_axis(const Grid& g, int a, std::int64_t count) {
  std::vector<double> e(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    const double s = 2.0 * std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(g.n(a))) / g.h(a);
    e[static_cast<std::size_t>(k)] = s * s;
  }
  return e;
}

}  // namespace

template <class T>
ScalarField<T> poisson_solve(const ScalarField<T>& b, PoissonReport* report) {
  const Grid& g = b.grid();
  const std::size_t n = g.cell_count();
  double sum = 0.0, sq = 0.0;
  for (T v : b.values()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double mean = sum / static_cast<double>(n);
  const double rms = std::sqrt(sq / static_cast<double>(n));
  const double rel_tol = std::is_same_v<T, float> ? 1e-4 : 1e-9;
  if (report) {
    report->rhs_mean = mean;
    report->rhs_rms = rms;
    report->inconsistent = std::abs(mean) > rel_tol * rms + 1e-300;
  }

  const fft::SpectralShape sh = fft::spectral_shape(g);
  std::vector<std::complex<T>> spec(sh.size());
  fft::forward<T>(g, b.values(), spec);

  const auto e0 = eigen_axis(g, 0, sh.nx_half);
  const auto e1 = eigen_axis(g, 1, g.n(1));
  const auto e2 = eigen_axis(g, 2, g.n(2));
  // Eigenvalues of L are -|Omega| * sum e_a; fold in the 1/N of the inverse transform.
  const double scale = 1.0 / (g.cell_volume() * static_cast<double>(n));
  std::size_t idx = 0;
  for (std::int64_t k2 = 0; k2 < sh.n2; ++k2) {
    for (std::int64_t k1 = 0; k1 < sh.n1; ++k1) {
      for (std::int64_t k0 = 0; k0 < sh.nx_half; ++k0, ++idx) {
        const double lam = e0[static_cast<std::size_t>(k0)] + e1[static_cast<std::size_t>(k1)] +
                           (g.dim() == 3 ? e2[static_cast<std::size_t>(k2)] : 0.0);
        if (idx == 0) {
          spec[idx] = 0;
        } else {
          spec[idx] *= static_cast<T>(-scale / lam);
        }
      }
    }
  }
  ScalarField<T> p(g);
  fft::inverse<T>(g, spec, p.values());
  return p;
}

template <class T>
VectorField<T> project(const VectorField<T>& u, PoissonReport* report) {
  ScalarField<T> div = divergence(u);
  const T vol = static_cast<T>(u.grid().cell_volume());
  for (T& v : div.values()) v *= vol;
  const ScalarField<T> p = poisson_solve(div, report);
  VectorField<T> out = u;
  axpy(T(-1), pressure_gradient(p), out);
  return out;
}

template <class T>
VectorField<T> projected_rhs(const VectorField<T>& u, const FlowParams& params) {
  return project(rhs(u, params));
}

template <class T>
double dissipation(const VectorField<T>& u, double nu) {
  return inner_product(u, diffusion(u, nu), Weighting::volume);
}

#define SGLES_INSTANTIATE(T)                                                                   \
  template ScalarField<T> divergence<T>(const VectorField<T>&);                                \
  template VectorField<T> pressure_gradient<T>(const ScalarField<T>&);                         \
  template VectorField<T> convection<T>(const VectorField<T>&);                                \
  template void convection_vjp<T>(const VectorField<T>&, const VectorField<T>&, VectorField<T>&); \
  template VectorField<T> diffusion<T>(const VectorField<T>&, double);                         \
  template VectorField<T> body_force<T>(const Grid&, const BodyForceSpec&);                    \
  template VectorField<T> rhs<T>(const VectorField<T>&, const FlowParams&);                    \
  template ScalarField<T> poisson_solve<T>(const ScalarField<T>&, PoissonReport*);             \
  template VectorField<T> project<T>(const VectorField<T>&, PoissonReport*);                   \
  template VectorField<T> projected_rhs<T>(const VectorField<T>&, const FlowParams&);          \
  template double dissipation<T>(const VectorField<T>&, double);

SGLES_INSTANTIATE(float)
SGLES_INSTANTIATE(double)
#undef SGLES_INSTANTIATE

}  // namespace sgles
