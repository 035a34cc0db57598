#include "sgles/initial_conditions.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "sgles/fft.hpp"
#include "sgles/operators.hpp"
#include "sgles/random.hpp"

namespace sgles {

double spectrum_profile(double k, double kp) {
  const double pi = std::numbers::pi;
  const double r = k / kp;
  return 8.0 * pi / (3.0 * std::pow(kp, 5)) * std::pow(k, 4) * std::exp(-2.0 * pi * r * r);
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Axes {
  int d;
  std::array<std::int64_t, 3> n;
  std::array<std::int64_t, 3> kmax;  // largest non-Nyquist |k|
};

// Visits k lexicographically with k_1 most significant, |k_a| <= kmax_a.
template <class F>
void for_each_signed_k(const Axes& ax, F&& f) {
  std::array<std::int64_t, 3> k{0, 0, 0};
  const std::int64_t k3lo = ax.d == 3 ? -ax.kmax[2] : 0, k3hi = ax.d == 3 ? ax.kmax[2] : 0;
  for (k[0] = -ax.kmax[0]; k[0] <= ax.kmax[0]; ++k[0]) {
    for (k[1] = -ax.kmax[1]; k[1] <= ax.kmax[1]; ++k[1]) {
      for (k[2] = k3lo; k[2] <= k3hi; ++k[2]) f(k);
    }
  }
}

bool canonical(const std::array<std::int64_t, 3>& k) {
  for (std::int64_t v : k) {
    if (v != 0) return v > 0;
  }
  return false;
}

std::size_t slot(const Grid& g, const std::array<std::int64_t, 3>& k) { return g.index(k[0], k[1], k[2]); }

}  // namespace

SpectralCoefficients random_spectral_coefficients(const Grid& g, const SpectrumSpec& spec) {
  const int d = g.dim();
  Axes ax{d, {g.n(0), g.n(1), g.n(2)}, {0, 0, 0}};
  std::int64_t nmin = g.n(0);
  for (int a = 0; a < d; ++a) {
    ax.kmax[a] = (g.n(a) - 1) / 2;
    nmin = std::min(nmin, g.n(a));
  }
  if (!(spec.peak_wavenumber > 0.0)) throw ConfigError("peak wavenumber must be positive");
  if (spec.peak_wavenumber > static_cast<double>(nmin) / 2.0) {
    throw ConfigError("peak wavenumber lies beyond the grid Nyquist wavenumber");
  }

  // Phase table over non-negative wavenumber vectors.
  const std::array<std::int64_t, 3> span{ax.kmax[0] + 1, ax.kmax[1] + 1, d == 3 ? ax.kmax[2] + 1 : 1};
  auto xi_index = [&](const std::array<std::int64_t, 3>& k) {
    return static_cast<std::size_t>((std::abs(k[0]) * span[1] + std::abs(k[1])) * span[2] + std::abs(k[2]));
  };
  std::vector<double> xi(static_cast<std::size_t>(span[0] * span[1] * span[2] * d));
  {
    Xoshiro256pp rng(derive_seed(spec.seed, 0));
    for (double& v : xi) v = rng.uniform();
  }

  SpectralCoefficients out{g, std::vector<std::vector<std::complex<double>>>(
                                  static_cast<std::size_t>(d), std::vector<std::complex<double>>(g.cell_count()))};
  Xoshiro256pp erng(derive_seed(spec.seed, 1));
  for_each_signed_k(ax, [&](const std::array<std::int64_t, 3>& k) {
    if (!canonical(k)) return;
    std::array<double, 3> e{0, 0, 0};
    if (d == 2) {
      const double phi = kTwoPi * erng.uniform();
      e = {std::cos(phi), std::sin(phi), 0.0};
    } else {
      const double z = 2.0 * erng.uniform() - 1.0, phi = kTwoPi * erng.uniform();
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      e = {r * std::cos(phi), r * std::sin(phi), z};
    }
    // Project onto the plane normal to the physical wavevector and renormalize.
    std::array<double, 3> q{0, 0, 0};
    double qq = 0.0, qe = 0.0, kk = 0.0;
    for (int a = 0; a < d; ++a) {
      q[a] = static_cast<double>(k[a]) / g.length(a);
      qq += q[a] * q[a];
      qe += q[a] * e[a];
      kk += static_cast<double>(k[a] * k[a]);
    }
    double pn = 0.0;
    for (int a = 0; a < d; ++a) {
      e[a] -= q[a] * qe / qq;
      pn += e[a] * e[a];
    }
    pn = std::sqrt(pn);
    if (pn < 1e-12) return;

    const double amp = std::sqrt(2.0 * spectrum_profile(std::sqrt(kk), spec.peak_wavenumber));
    double tau = 0.0;
    for (int a = 0; a < d; ++a) {
      const double s = k[a] > 0 ? 1.0 : (k[a] < 0 ? -1.0 : 0.0);
      tau += s * xi[xi_index(k) * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)];
    }
    const std::complex<double> ph = std::polar(amp, kTwoPi * tau);
    const std::array<std::int64_t, 3> mk{-k[0], -k[1], -k[2]};
    for (int a = 0; a < d; ++a) {
      const std::complex<double> v = ph * (e[a] / pn);
      out.comp[static_cast<std::size_t>(a)][slot(g, k)] = v;
      out.comp[static_cast<std::size_t>(a)][slot(g, mk)] = std::conj(v);
    }
  });
  return out;
}

VectorField<double> sample_staggered(const SpectralCoefficients& c) {
  const Grid& g = c.grid;
  const int d = g.dim();
  const fft::SpectralShape sh = fft::spectral_shape(g);
  VectorField<double> u(g);
  std::vector<std::complex<double>> half(sh.size());
  for (int a = 0; a < d; ++a) {
    std::size_t idx = 0;
    for (std::int64_t i2 = 0; i2 < sh.n2; ++i2) {
      for (std::int64_t i1 = 0; i1 < sh.n1; ++i1) {
        for (std::int64_t i0 = 0; i0 < sh.nx_half; ++i0, ++idx) {
          const std::array<std::int64_t, 3> ii{i0, i1, i2};
          // Offset of the sampling point in cells: 1 on the normal axis (right face), 1/2 elsewhere.
          double theta = 0.0;
          for (int b = 0; b < d; ++b) {
            const double off = b == a ? 1.0 : 0.5;
            theta += kTwoPi * static_cast<double>(fft::signed_wavenumber(ii[b], g.n(b))) * off /
                     static_cast<double>(g.n(b));
          }
          half[idx] = c.comp[static_cast<std::size_t>(a)][g.index(i0, i1, i2)] * std::polar(1.0, theta);
        }
      }
    }
    fft::inverse<double>(g, half, u.component(a));
  }
  return u;
}

template <class T>
VectorField<T> random_spectral_field(const Grid& g, const SpectrumSpec& spec) {
  const VectorField<double> u = project(sample_staggered(random_spectral_coefficients(g, spec)));
  if constexpr (std::is_same_v<T, double>) {
    return u;
  } else {
    return cast_field<T>(u);
  }
}

template VectorField<float> random_spectral_field<float>(const Grid&, const SpectrumSpec&);
template VectorField<double> random_spectral_field<double>(const Grid&, const SpectrumSpec&);

}  // namespace sgles
