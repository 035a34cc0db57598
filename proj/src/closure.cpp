#include "sgles/closure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "sgles/random.hpp"
#include "sgles/simd.hpp"

namespace sgles {

CNNArchitecture default_architecture(int dim) {
  if (dim != 2 && dim != 3) throw ConfigError("CNN dimension must be 2 or 3");
  CNNArchitecture a;
  a.dim = dim;
  a.layers = {{2, dim, 24, Activation::tanh, true},
              {2, 24, 24, Activation::tanh, true},
              {2, 24, 24, Activation::tanh, true},
              {2, 24, 24, Activation::tanh, true},
              {2, 24, dim, Activation::identity, false}};
  return a;
}

void validate(const CNNArchitecture& arch) {
  if (arch.dim != 2 && arch.dim != 3) throw ConfigError("CNN dimension must be 2 or 3");
  if (arch.layers.empty()) throw ConfigError("CNN needs at least one layer");
  if (arch.layers.front().cin != arch.dim) throw ConfigError("first CNN layer must take d input channels");
  const ConvLayer& last = arch.layers.back();
  if (last.cout != arch.dim) throw ConfigError("last CNN layer must produce d channels");
  if (last.act != Activation::identity || last.bias) {
    throw ConfigError("last CNN layer must be linear and bias-free");
  }
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const ConvLayer& L = arch.layers[l];
    if (L.radius < 1 || L.cin < 1 || L.cout < 1) throw ConfigError("CNN layer radius and channels must be >= 1");
    if (l > 0 && arch.layers[l - 1].cout != L.cin) throw ConfigError("CNN layer channel counts do not chain");
  }
}

int tap_count(int radius, int dim) {
  int t = 1;
  for (int a = 0; a < dim; ++a) t *= 2 * radius + 1;
  return t;
}

std::size_t layer_param_count(const ConvLayer& L, int dim) {
  const auto w = static_cast<std::size_t>(tap_count(L.radius, dim)) * static_cast<std::size_t>(L.cin * L.cout);
  return w + (L.bias ? static_cast<std::size_t>(L.cout) : 0);
}

std::size_t param_count(const CNNArchitecture& arch) {
  std::size_t n = 0;
  for (const ConvLayer& L : arch.layers) n += layer_param_count(L, arch.dim);
  return n;
}

int receptive_radius(const CNNArchitecture& arch) {
  int r = 1;  // the two half-cell interpolations
  for (const ConvLayer& L : arch.layers) r += L.radius;
  return r;
}

std::span<const double> ClosureParams::layer(std::size_t l) const {
  return std::span<const double>(theta).subspan(offsets[l], layer_param_count(arch.layers[l], arch.dim));
}

ClosureParams make_params(CNNArchitecture arch, std::vector<double> theta) {
  validate(arch);
  if (theta.size() != param_count(arch)) {
    throw ConfigError("parameter vector has " + std::to_string(theta.size()) + " entries, architecture needs " +
                      std::to_string(param_count(arch)));
  }
  if (!all_finite<double>(theta)) throw ConfigError("non-finite closure parameters");
  ClosureParams p{std::move(arch), std::move(theta), {}};
  std::size_t off = 0;
  for (const ConvLayer& L : p.arch.layers) {
    p.offsets.push_back(off);
    off += layer_param_count(L, p.arch.dim);
  }
  return p;
}

ClosureParams init_params(const CNNArchitecture& arch, std::uint64_t seed) {
  validate(arch);
  std::vector<double> theta;
  theta.reserve(param_count(arch));
  Xoshiro256pp rng(seed);
  for (const ConvLayer& L : arch.layers) {
    const double bound = std::sqrt(1.0 / (tap_count(L.radius, arch.dim) * L.cin));
    const std::size_t n = layer_param_count(L, arch.dim);
    for (std::size_t i = 0; i < n; ++i) theta.push_back(rng.uniform(-bound, bound));
  }
  return make_params(arch, std::move(theta));
}

void save_params(const std::filesystem::path& path, const ClosureParams& p) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  io::write_magic(os, "CNP1");
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.arch.dim));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.arch.layers.size()));
  for (const ConvLayer& L : p.arch.layers) {
    io::write_le<std::int32_t>(os, L.radius);
    io::write_le<std::int32_t>(os, L.cin);
    io::write_le<std::int32_t>(os, L.cout);
    io::write_le<std::int32_t>(os, L.act == Activation::tanh ? 0 : 1);
    io::write_le<std::int32_t>(os, L.bias ? 1 : 0);
  }
  io::write_le<std::uint64_t>(os, p.theta.size());
  for (double v : p.theta) io::write_le<double>(os, v);
  if (!os) throw FormatError("write failed for " + path.string());
}

ClosureParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  const std::string what = path.string();
  io::expect_magic(is, "CNP1", what);
  CNNArchitecture arch;
  arch.dim = static_cast<int>(io::read_le<std::uint32_t>(is, what));
  const auto nl = io::read_le<std::uint32_t>(is, what);
  if (nl > 1024) throw FormatError(what + ": implausible layer count");
  for (std::uint32_t l = 0; l < nl; ++l) {
    ConvLayer L;
    L.radius = io::read_le<std::int32_t>(is, what);
    L.cin = io::read_le<std::int32_t>(is, what);
    L.cout = io::read_le<std::int32_t>(is, what);
    const auto act = io::read_le<std::int32_t>(is, what), bias = io::read_le<std::int32_t>(is, what);
    if ((act != 0 && act != 1) || (bias != 0 && bias != 1)) throw FormatError(what + ": bad layer descriptor");
    L.act = act == 0 ? Activation::tanh : Activation::identity;
    L.bias = bias == 1;
    arch.layers.push_back(L);
  }
  try {
    validate(arch);
  } catch (const ConfigError& e) {
    throw FormatError(what + ": " + e.what());
  }
  const auto n = io::read_le<std::uint64_t>(is, what);
  if (n != param_count(arch)) throw FormatError(what + ": parameter count does not match the architecture");
  std::vector<double> theta(n);
  for (double& v : theta) v = io::read_le<double>(is, what);
  return make_params(std::move(arch), std::move(theta));
}

template <class T>
Channels collocate(const VectorField<T>& u) {
  const Grid& g = u.grid();
  const int d = g.dim();
  Channels w(g, d);
  for_each_cell(g, [&](const CellStencil& s) {
    double* o = w.v.data() + s.c * static_cast<std::size_t>(d);
    for (int a = 0; a < d; ++a) {
      o[a] = 0.5 * (static_cast<double>(u.at(a, s.m[a])) + static_cast<double>(u.at(a, s.c)));
    }
  });
  return w;
}

VectorField<double> decollocate(const Channels& w) {
  const Grid& g = w.grid;
  const int d = g.dim();
  if (w.count != d) throw ConfigError("decollocate needs exactly d channels");
  VectorField<double> u(g);
  for_each_cell(g, [&](const CellStencil& s) {
    for (int a = 0; a < d; ++a) {
      u.at(a, s.c) = 0.5 * (w.v[s.c * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] +
                            w.v[s.p[a] * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)]);
    }
  });
  return u;
}

Channels decollocate_transpose(const VectorField<double>& g) { return collocate(g); }

ShiftTable make_shift_table(const Grid& g, int radius) {
  const int d = g.dim();
  ShiftTable t;
  t.grid = g;
  t.radius = radius;
  t.taps = tap_count(radius, d);
  const std::size_t n = g.cell_count();
  if (n > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("grid too large for 32-bit shift tables");
  t.rows.resize(static_cast<std::size_t>(t.taps) * n);
  const int w = 2 * radius + 1;
  for (int tap = 0; tap < t.taps; ++tap) {
    std::array<std::int64_t, 3> o{0, 0, 0};
    int rem = tap;
    for (int a = 0; a < d; ++a) {
      o[a] = rem % w - radius;
      rem /= w;
    }
    std::uint32_t* rows = t.rows.data() + static_cast<std::size_t>(tap) * n;
    for_each_cell(g, [&](const CellStencil& s) {
      rows[s.c] = static_cast<std::uint32_t>(g.index(s.ijk[0] + o[0], s.ijk[1] + o[1], s.ijk[2] + o[2]));
    });
  }
  return t;
}

Channels conv_forward(const Channels& x, const ConvLayer& L, std::span<const double> p, const ShiftTable& shifts) {
  if (x.count != L.cin) throw ConfigError("convolution input channel mismatch");
  if (shifts.radius != L.radius || !(shifts.grid == x.grid)) throw ConfigError("shift table does not fit the layer");
  const std::size_t n = x.grid.cell_count();
  const auto cin = static_cast<std::size_t>(L.cin), cout = static_cast<std::size_t>(L.cout);
  Channels y(x.grid, L.cout);
  if (L.bias) {
    const double* b = p.data() + static_cast<std::size_t>(shifts.taps) * cin * cout;
    for (std::size_t i = 0; i < n; ++i) std::copy(b, b + cout, y.v.data() + i * cout);
  }
  simd::kernels().conv_gather(n, static_cast<std::size_t>(shifts.taps), cin, cout, x.v.data(), shifts.rows.data(),
                              p.data(), y.v.data());
  return y;
}

void conv_backward(const Channels& x, const ConvLayer& L, std::span<const double> p, const ShiftTable& shifts,
                   const Channels& gy, Channels* gx, std::span<double> gp) {
  const std::size_t n = x.grid.cell_count();
  const auto cin = static_cast<std::size_t>(L.cin), cout = static_cast<std::size_t>(L.cout);
  const simd::KernelTable& k = simd::kernels();
  const auto taps = static_cast<std::size_t>(shifts.taps);
  for (std::size_t t = 0; t < taps; ++t) {
    k.gemm_tn_rows(n, cin, cout, x.v.data(), shifts.tap(static_cast<int>(t)), gy.v.data(), gp.data() + t * cin * cout);
  }
  if (gx != nullptr) {
    // Offsets are enumerated symmetrically, so tap taps-1-t is the shift by -J_t:
    // gx_I = sum_t K_t gy_{I - J_t} is again a gather with transposed, reversed kernels.
    std::vector<double> wt(taps * cin * cout);
    for (std::size_t t = 0; t < taps; ++t) {
      const double* w = p.data() + (taps - 1 - t) * cin * cout;
      double* o = wt.data() + t * cin * cout;
      for (std::size_t r = 0; r < cin; ++r)
        for (std::size_t c = 0; c < cout; ++c) o[c * cin + r] = w[r * cout + c];
    }
    k.conv_gather(n, taps, cout, cin, gy.v.data(), shifts.rows.data(), wt.data(), gx->v.data());
  }
  if (L.bias) {
    double* gb = gp.data() + static_cast<std::size_t>(shifts.taps) * cin * cout;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < cout; ++c) gb[c] += gy.v[i * cout + c];
  }
}

void apply_activation(Activation act, std::span<double> v) {
  if (act == Activation::tanh) {
    for (double& x : v) x = std::tanh(x);
  }
}

template <class T>
VectorField<T> cnn_forward(const VectorField<T>& u, const ClosureParams& p) {
  if (p.arch.dim != u.dim()) throw ConfigError("closure dimension does not match the field");
  if (p.theta.size() != param_count(p.arch)) throw ConfigError("parameter length does not match the architecture");
  Channels x = collocate(u);
  ShiftTable shifts;
  for (std::size_t l = 0; l < p.arch.layers.size(); ++l) {
    const ConvLayer& L = p.arch.layers[l];
    if (shifts.radius != L.radius || !(shifts.grid == x.grid)) shifts = make_shift_table(x.grid, L.radius);
    x = conv_forward(x, L, p.layer(l), shifts);
    apply_activation(L.act, x.v);
  }
  VectorField<double> out = decollocate(x);
  if constexpr (std::is_same_v<T, double>) {
    return out;
  } else {
    return cast_field<T>(out);
  }
}

int probe_locality_radius(const ClosureParams& p, std::int64_t cells, std::uint64_t seed) {
  const int d = p.arch.dim;
  const Grid g = make_cube_grid(d, cells);
  Xoshiro256pp rng(seed);
  VectorField<double> u(g);
  for (double& v : u.flat()) v = rng.uniform(-1.0, 1.0);
  const VectorField<double> base = cnn_forward(u, p);
  const std::int64_t c0 = cells / 2;
  const std::size_t src = g.index(c0, c0, d == 3 ? c0 : 0);
  int radius = -1;
  for (int a = 0; a < d; ++a) {
    VectorField<double> v = u;
    v.at(a, src) += 0.25;
    const VectorField<double> out = cnn_forward(v, p);
    for_each_cell(g, [&](const CellStencil& s) {
      for (int b = 0; b < d; ++b) {
        if (out.at(b, s.c) == base.at(b, s.c)) continue;
        int cheb = 0;
        for (int ax = 0; ax < d; ++ax) {
          std::int64_t dist = std::abs(s.ijk[ax] - (ax == 2 && d == 2 ? 0 : c0));
          dist = std::min(dist, g.n(ax) - dist);
          cheb = std::max(cheb, static_cast<int>(dist));
        }
        radius = std::max(radius, cheb);
      }
    });
  }
  return radius;
}

std::array<std::array<double, 3>, 3> StrainRate::at_center(std::size_t i) const {
  const int d = grid.dim();
  std::array<std::array<double, 3>, 3> s{};
  const auto ijk = grid.coords(i);
  for (int a = 0; a < d; ++a) {
    s[a][a] = diag[a][i];
    for (int b = a + 1; b < d; ++b) {
      auto sh = [&](int da, int db) {
        std::array<std::int64_t, 3> q = ijk;
        q[a] -= da;
        q[b] -= db;
        return off[a][b][grid.index(q[0], q[1], q[2])];
      };
      s[a][b] = s[b][a] = 0.25 * (sh(0, 0) + sh(1, 0) + sh(0, 1) + sh(1, 1));
    }
  }
  return s;
}

template <class T>
StrainRate strain_rate(const VectorField<T>& u) {
  const Grid& g = u.grid();
  const int d = g.dim();
  const std::size_t n = g.cell_count();
  StrainRate s;
  s.grid = g;
  for (int a = 0; a < d; ++a) {
    s.diag[a].assign(n, 0.0);
    for (int b = a + 1; b < d; ++b) s.off[a][b].assign(n, 0.0);
  }
  for_each_cell(g, [&](const CellStencil& c) {
    for (int a = 0; a < d; ++a) {
      s.diag[a][c.c] = (static_cast<double>(u.at(a, c.c)) - static_cast<double>(u.at(a, c.m[a]))) / g.h(a);
      for (int b = a + 1; b < d; ++b) {
        const double dua = (static_cast<double>(u.at(a, c.p[b])) - static_cast<double>(u.at(a, c.c))) / g.h(b);
        const double dub = (static_cast<double>(u.at(b, c.p[a])) - static_cast<double>(u.at(b, c.c))) / g.h(a);
        s.off[a][b][c.c] = 0.5 * (dua + dub);
      }
    }
  });
  return s;
}

namespace {

double filter_width(const Grid& g) {
  double v = 1.0;
  for (int a = 0; a < g.dim(); ++a) v *= g.h(a);
  return std::pow(v, 1.0 / g.dim());
}

ScalarField<double> eddy_viscosity_from(const StrainRate& s, double theta) {
  const Grid& g = s.grid;
  const int d = g.dim();
  const double delta = filter_width(g);
  const double coef = theta * theta * delta * delta;
  ScalarField<double> nu(g);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const auto t = s.at_center(i);
    double ss = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) ss += t[a][b] * t[a][b];
    nu[i] = coef * std::sqrt(2.0 * ss);
  }
  return nu;
}

}  // namespace

template <class T>
ScalarField<double> eddy_viscosity(const VectorField<T>& u, double theta) {
  return eddy_viscosity_from(strain_rate(u), theta);
}

template <class T>
VectorField<T> smagorinsky(const VectorField<T>& u, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("Smagorinsky coefficient must lie in [0, 1]");
  const Grid& g = u.grid();
  const int d = g.dim();
  VectorField<T> out(g);
  if (theta == 0.0) return out;
  const StrainRate s = strain_rate(u);
  const ScalarField<double> nu = eddy_viscosity_from(s, theta);
  const std::size_t n = g.cell_count();

  // Off-diagonal stresses at their edges, with nu_t averaged from the 4 adjacent centres.
  std::array<std::array<std::vector<double>, 3>, 3> tau_off;
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      auto& t = tau_off[a][b];
      t.resize(n);
      for_each_cell(g, [&](const CellStencil& c) {
        const auto [i, j, k] = c.ijk;
        std::array<std::int64_t, 3> q{i, j, k};
        q[a] += 1;
        const std::size_t pa = c.p[a], pb = c.p[b], pab = g.index(q[0] + (b == 0), q[1] + (b == 1), q[2] + (b == 2));
        const double nue = 0.25 * (nu[c.c] + nu[pa] + nu[pb] + nu[pab]);
        t[c.c] = 2.0 * nue * s.off[a][b][c.c];
      });
    }
  }
  for_each_cell(g, [&](const CellStencil& c) {
    for (int a = 0; a < d; ++a) {
      double acc = (2.0 * nu[c.p[a]] * s.diag[a][c.p[a]] - 2.0 * nu[c.c] * s.diag[a][c.c]) / g.h(a);
      for (int b = 0; b < d; ++b) {
        if (b == a) continue;
        const auto& t = tau_off[std::min(a, b)][std::max(a, b)];
        acc += (t[c.c] - t[c.m[b]]) / g.h(b);
      }
      out.at(a, c.c) = static_cast<T>(acc);
    }
  });
  return out;
}

template Channels collocate<float>(const VectorField<float>&);
template Channels collocate<double>(const VectorField<double>&);
template VectorField<float> cnn_forward<float>(const VectorField<float>&, const ClosureParams&);
template VectorField<double> cnn_forward<double>(const VectorField<double>&, const ClosureParams&);
template StrainRate strain_rate<float>(const VectorField<float>&);
template StrainRate strain_rate<double>(const VectorField<double>&);
template ScalarField<double> eddy_viscosity<float>(const VectorField<float>&, double);
template ScalarField<double> eddy_viscosity<double>(const VectorField<double>&, double);
template VectorField<float> smagorinsky<float>(const VectorField<float>&, double);
template VectorField<double> smagorinsky<double>(const VectorField<double>&, double);

}  // namespace sgles
