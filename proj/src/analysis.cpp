#include "sgles/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "sgles/fft.hpp"
#include "sgles/filters.hpp"
#include "sgles/operators.hpp"

namespace sgles {

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

namespace {

// Calls f(|k|, E_k) once per full-spectrum mode.
template <class T, class F>
void for_each_mode_energy(const VectorField<T>& u, F&& f) {
  const Grid& g = u.grid();
  const int d = g.dim();
  const fft::SpectralShape sh = fft::spectral_shape(g);
  const double inv_n = 1.0 / static_cast<double>(g.cell_count());
  std::vector<std::complex<T>> tmp(sh.size());
  std::vector<double> e(sh.size(), 0.0);
  for (int a = 0; a < d; ++a) {
    fft::forward<T>(g, u.component(a), tmp);
    for (std::size_t i = 0; i < sh.size(); ++i) e[i] += 0.5 * std::norm(std::complex<double>(tmp[i])) * inv_n * inv_n;
  }
  std::size_t idx = 0;
  for (std::int64_t i2 = 0; i2 < sh.n2; ++i2) {
    const double k2 = static_cast<double>(fft::signed_wavenumber(i2, g.n(2)));
    for (std::int64_t i1 = 0; i1 < sh.n1; ++i1) {
      const double k1 = static_cast<double>(fft::signed_wavenumber(i1, g.n(1)));
      for (std::int64_t i0 = 0; i0 < sh.nx_half; ++i0, ++idx) {
        const double k0 = static_cast<double>(i0);
        // Columns 1 .. ceil(n0/2)-1 stand for +k and -k.
        const bool self_conjugate = i0 == 0 || (g.n(0) % 2 == 0 && i0 == g.n(0) / 2);
        const double mult = self_conjugate ? 1.0 : 2.0;
        const double kn = std::sqrt(k0 * k0 + k1 * k1 + (d == 3 ? k2 * k2 : 0.0));
        f(kn, mult * e[idx]);
      }
    }
  }
}

}  // namespace

template <class T>
SpectrumResult energy_spectrum(const VectorField<T>& u, double ratio) {
  if (!(ratio > 1.0)) throw ConfigError("spectrum bin ratio must exceed 1");
  const Grid& g = u.grid();
  std::int64_t nmin = g.n(0);
  for (int a = 1; a < g.dim(); ++a) nmin = std::min(nmin, g.n(a));
  const double kcut = static_cast<double>(nmin) / 2.0;
  SpectrumResult r;
  r.ratio = ratio;
  for (double k = 1.0; k <= kcut * (1.0 + 1e-12); k *= ratio) r.kappa.push_back(k);
  r.energy.assign(r.kappa.size(), 0.0);
  for_each_mode_energy(u, [&](double kn, double e) {
    if (kn > kcut || kn == 0.0) return;
    for (std::size_t j = 0; j < r.kappa.size(); ++j) {
      const double kap = r.kappa[j];
      if (kn >= kap / ratio * (1.0 - 1e-12) && kn <= kap * ratio * (1.0 + 1e-12)) r.energy[j] += e;
    }
  });
  return r;
}

template <class T>
double modal_energy_sum(const VectorField<T>& u) {
  double s = 0.0;
  for_each_mode_energy(u, [&](double, double e) { s += e; });
  return s;
}

template <class T>
double total_energy(const VectorField<T>& u) {
  const double n = field_norm(u, Weighting::volume);
  return 0.5 * n * n;
}

double transfer_va(std::span<const double> k, double width) {
  double g = 1.0;
  for (double ka : k) g *= sinc(std::numbers::pi * ka * width / 2.0);
  return g;
}

double transfer_fa(std::span<const double> k, double width, int alpha) {
  double g = 1.0;
  for (std::size_t a = 0; a < k.size(); ++a) {
    if (static_cast<int>(a) != alpha) g *= sinc(std::numbers::pi * k[a] * width / 2.0);
  }
  return g;
}

TGState taylor_green(double x, double y, double t, double nu) {
  const double f = std::exp(-2.0 * nu * t);
  return {-std::sin(x) * std::cos(y) * f, std::cos(x) * std::sin(y) * f,
          0.25 * (std::cos(2 * x) + std::cos(2 * y)) * f * f};
}

std::array<double, 2> tg_continuous_commutator(double width, double x, double y) {
  const double s = std::pow(sinc(width / 2.0), 4) - sinc(width);
  return {-0.5 * s * std::sin(2 * x), -0.5 * s * std::sin(2 * y)};
}

double tophat_gain(int n, double d) {
  double s = 0.0;
  for (int i = -n; i <= n; ++i) s += std::cos(i * d);
  return s / (2 * n + 1);
}

double tg_discrete_commutator_coeff(int n, double d) {
  const double D = 2.0 * n * d;
  const double g = tophat_gain(n, d);
  return std::pow(g, 4) * (sinc(D) + sinc(2 * D)) - tophat_gain(n, 2 * d) * (sinc(d) + sinc(2 * d));
}

TGCrossCheck tg_solver_crosscheck(int n, std::int64_t fine_cells) {
  if (n < 1) throw ConfigError("top-hat half-width must be >= 1");
  if (fine_cells % (2 * n) != 0) throw ConfigError("fine cell count must be divisible by 2n");
  const double L = 2.0 * std::numbers::pi;
  const double d = L / static_cast<double>(fine_cells);
  const std::int64_t coarse_cells = fine_cells / (2 * n);
  const std::array<std::int64_t, 2> nf{fine_cells, fine_cells};

  // Grid A puts u-points at ((i+1) d, j d); grid B puts v-points at (i d, (j+1) d).
  const std::array<Extent, 2> ea{Extent{0.0, L}, Extent{-d / 2, L - d / 2}};
  const std::array<Extent, 2> eb{Extent{-d / 2, L - d / 2}, Extent{0.0, L}};
  const Grid ga = make_grid(2, nf, ea), gb = make_grid(2, nf, eb);
  const Grid gc = make_cube_grid(2, coarse_cells, {0.0, L});

  auto sample = [](const Grid& g) {
    VectorField<double> u(g);
    for_each_cell(g, [&](const CellStencil& s) {
      const auto [i, j, k] = s.ijk;
      u.at(0, s.c) = taylor_green(g.face(0, i), g.center(1, j), 0.0, 0.0).u;
      u.at(1, s.c) = taylor_green(g.center(0, i), g.face(1, j), 0.0, 0.0).v;
    });
    return u;
  };
  const VectorField<double> ua = sample(ga), ub = sample(gb);
  const VectorField<double> fu_a = tophat_same_grid(ua, n), fu_b = tophat_same_grid(ub, n);
  const VectorField<double> fc_a = tophat_same_grid(convection(ua), n);
  const VectorField<double> fc_b = tophat_same_grid(convection(ub), n);

  VectorField<double> ubar(gc), conv_filtered(gc);
  for_each_cell(gc, [&](const CellStencil& s) {
    const std::int64_t I = s.ijk[0], J = s.ijk[1];
    const std::size_t iu = ga.index(2 * n * (I + 1) - 1, (2 * J + 1) * n);
    const std::size_t iv = gb.index((2 * I + 1) * n, 2 * n * (J + 1) - 1);
    ubar.at(0, s.c) = fu_a.at(0, iu);
    ubar.at(1, s.c) = fu_b.at(1, iv);
    conv_filtered.at(0, s.c) = fc_a.at(0, iu);
    conv_filtered.at(1, s.c) = fc_b.at(1, iv);
  });
  const VectorField<double> conv_coarse = convection(ubar);

  TGCrossCheck r;
  r.n = n;
  r.fine_cells = fine_cells;
  r.coeff = tg_discrete_commutator_coeff(n, d);
  for_each_cell(gc, [&](const CellStencil& s) {
    // The solver returns the negated flux divergence, hence the sign flip.
    const double cx = -(conv_filtered.at(0, s.c) - conv_coarse.at(0, s.c));
    const double cy = -(conv_filtered.at(1, s.c) - conv_coarse.at(1, s.c));
    const double x = gc.face(0, s.ijk[0]), y = gc.face(1, s.ijk[1]);
    r.max_error_x = std::max(r.max_error_x, std::abs(cx + 0.25 * r.coeff * std::sin(2 * x)));
    r.max_error_y = std::max(r.max_error_y, std::abs(cy + 0.25 * r.coeff * std::sin(2 * y)));
  });
  return r;
}

template SpectrumResult energy_spectrum<float>(const VectorField<float>&, double);
template SpectrumResult energy_spectrum<double>(const VectorField<double>&, double);
template double modal_energy_sum<float>(const VectorField<float>&);
template double modal_energy_sum<double>(const VectorField<double>&);
template double total_energy<float>(const VectorField<float>&);
template double total_energy<double>(const VectorField<double>&);

}  // namespace sgles
