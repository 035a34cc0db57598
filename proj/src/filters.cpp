#include "sgles/filters.hpp"

#include <string>
#include <utility>
#include <vector>

namespace sgles {

CoarseningMap make_coarsening(const Grid& fine, std::int64_t coarse_cells) {
  std::array<std::int64_t, 3> n{};
  std::array<Extent, 3> e{};
  for (int a = 0; a < fine.dim(); ++a) {
    n[a] = coarse_cells;
    e[a] = {fine.lo(a), fine.hi(a)};
  }
  return make_coarsening(fine, make_grid(fine.dim(), std::span(n).first(fine.dim()), std::span(e).first(fine.dim())));
}

CoarseningMap make_coarsening(const Grid& fine, const Grid& coarse) {
  if (fine.dim() != coarse.dim()) throw ConfigError("coarsening: dimension mismatch");
  CoarseningMap map{fine, coarse, {1, 1, 1}};
  for (int a = 0; a < fine.dim(); ++a) {
    if (fine.lo(a) != coarse.lo(a) || fine.hi(a) != coarse.hi(a)) {
      throw ConfigError("coarsening: fine and coarse boxes differ");
    }
    if (coarse.n(a) > fine.n(a) || fine.n(a) % coarse.n(a) != 0) {
      throw ConfigError("coarsening: fine cell count must be an integer multiple of the coarse count");
    }
    map.m[a] = fine.n(a) / coarse.n(a);
  }
  return map;
}

const char* filter_name(FilterKind k) { return k == FilterKind::FA ? "FA" : "VA"; }

FilterKind parse_filter(const std::string& s) {
  if (s == "FA" || s == "fa") return FilterKind::FA;
  if (s == "VA" || s == "va") return FilterKind::VA;
  throw ConfigError("unknown filter kind '" + s + "' (expected FA or VA)");
}

namespace {

using Taps = std::vector<std::pair<std::int64_t, double>>;

// Normal-direction taps relative to m*J_a for component a.
Taps normal_taps(std::int64_t m, FilterKind kind, VAStencil stencil) {
  Taps t;
  const std::int64_t face = m - 1;
  if (kind == FilterKind::FA) {
    t.emplace_back(face, 1.0);
  } else if (stencil == VAStencil::uniform_offset) {
    for (std::int64_t o = 0; o < m; ++o) t.emplace_back(o, 1.0 / static_cast<double>(m));
  } else if (m % 2 == 0) {
    // Box of width m*h centred on the coarse face: the two outermost face
    // control volumes are cut in half.
    const std::int64_t half = m / 2;
    for (std::int64_t o = -half; o <= half; ++o) {
      t.emplace_back(face + o, (o == -half || o == half ? 0.5 : 1.0) / static_cast<double>(m));
    }
  } else {
    // Odd m: the box covers exactly m whole face control volumes.
    const std::int64_t half = (m - 1) / 2;
    for (std::int64_t o = -half; o <= half; ++o) t.emplace_back(face + o, 1.0 / static_cast<double>(m));
  }
  return t;
}

Taps tangential_taps(std::int64_t m) {
  Taps t;
  for (std::int64_t o = 0; o < m; ++o) t.emplace_back(o, 1.0 / static_cast<double>(m));
  return t;
}

// Calls f(coarse index, component, fine index, weight) for every tap.
template <class F>
void for_each_tap(const CoarseningMap& map, FilterKind kind, VAStencil stencil, F&& f) {
  const Grid& cg = map.coarse;
  const Grid& fg = map.fine;
  const int d = cg.dim();
  for (int a = 0; a < d; ++a) {
    std::array<Taps, 3> taps;
    for (int b = 0; b < 3; ++b) {
      if (b >= d) {
        taps[b] = {{0, 1.0}};
      } else {
        taps[b] = b == a ? normal_taps(map.m[b], kind, stencil) : tangential_taps(map.m[b]);
      }
    }
    for_each_cell(cg, [&](const CellStencil& s) {
      const std::int64_t base0 = map.m[0] * s.ijk[0], base1 = map.m[1] * s.ijk[1], base2 = map.m[2] * s.ijk[2];
      for (const auto& [o2, w2] : taps[2]) {
        for (const auto& [o1, w1] : taps[1]) {
          const double w12 = w1 * w2;
          for (const auto& [o0, w0] : taps[0]) {
            f(s.c, a, fg.index(base0 + o0, base1 + o1, base2 + o2), w0 * w12);
          }
        }
      }
    });
  }
}

template <class T>
VectorField<T> filter_impl(const VectorField<T>& u, const CoarseningMap& map, FilterKind kind, VAStencil stencil) {
  require_same_grid(u.grid(), map.fine, "filter");
  VectorField<T> out(map.coarse);
  for_each_tap(map, kind, stencil, [&](std::size_t J, int a, std::size_t I, double w) {
    out.at(a, J) += static_cast<T>(w) * u.at(a, I);
  });
  return out;
}

template <class T>
void box_average_axis(std::span<T> v, const Grid& g, int axis, int n, std::vector<T>& tmp) {
  tmp.assign(v.begin(), v.end());
  const T w = static_cast<T>(1.0 / (2 * n + 1));
  for_each_cell(g, [&](const CellStencil& s) {
    T acc = 0;
    for (int o = -n; o <= n; ++o) {
      std::array<std::int64_t, 3> q = s.ijk;
      q[axis] += o;
      acc += tmp[g.index(q[0], q[1], q[2])];
    }
    v[s.c] = acc * w;
  });
}

}  // namespace

template <class T>
VectorField<T> face_average(const VectorField<T>& u, const CoarseningMap& map) {
  return filter_impl(u, map, FilterKind::FA, VAStencil::trapezoidal);
}

template <class T>
VectorField<T> volume_average(const VectorField<T>& u, const CoarseningMap& map, VAStencil stencil) {
  return filter_impl(u, map, FilterKind::VA, stencil);
}

template <class T>
VectorField<T> apply_filter(const VectorField<T>& u, const CoarseningMap& map, FilterKind kind) {
  return filter_impl(u, map, kind, VAStencil::trapezoidal);
}

template <class T>
VectorField<T> apply_filter_transpose(const VectorField<T>& w, const CoarseningMap& map, FilterKind kind) {
  require_same_grid(w.grid(), map.coarse, "filter transpose");
  VectorField<T> out(map.fine);
  for_each_tap(map, kind, VAStencil::trapezoidal, [&](std::size_t J, int a, std::size_t I, double wt) {
    out.at(a, I) += static_cast<T>(wt) * w.at(a, J);
  });
  return out;
}

template <class T>
ScalarField<T> pressure_filter(const ScalarField<T>& p, const CoarseningMap& map) {
  require_same_grid(p.grid(), map.fine, "pressure_filter");
  const Grid& fg = map.fine;
  ScalarField<T> out(map.coarse);
  const double w = 1.0 / static_cast<double>(map.m[0] * map.m[1] * map.m[2]);
  for_each_cell(map.coarse, [&](const CellStencil& s) {
    double acc = 0.0;
    for (std::int64_t k = 0; k < map.m[2]; ++k) {
      for (std::int64_t j = 0; j < map.m[1]; ++j) {
        for (std::int64_t i = 0; i < map.m[0]; ++i) {
          acc += p[fg.index(map.m[0] * s.ijk[0] + i, map.m[1] * s.ijk[1] + j, map.m[2] * s.ijk[2] + k)];
        }
      }
    }
    out[s.c] = static_cast<T>(acc * w);
  });
  return out;
}

FilteredPair filter_and_commutator(const VectorField<double>& u, const CoarseningMap& map, FilterKind kind,
                                   const FlowParams& params) {
  FilteredPair r{apply_filter(u, map, kind), VectorField<double>(map.coarse)};
  r.c = apply_filter(projected_rhs(u, params), map, kind);
  axpy(-1.0, projected_rhs(r.ubar, params), r.c);
  return r;
}

VectorField<double> commutator(const VectorField<double>& u, const CoarseningMap& map, FilterKind kind,
                               const FlowParams& params) {
  return filter_and_commutator(u, map, kind, params).c;
}

template <class T>
ScalarField<T> div_commutator_cD(const VectorField<T>& u, const CoarseningMap& map, FilterKind kind) {
  return divergence(apply_filter(u, map, kind)) - pressure_filter(divergence(u), map);
}

template <class T>
VectorField<T> tophat_same_grid(const VectorField<T>& u, int n) {
  const Grid& g = u.grid();
  if (n < 0) throw ConfigError("top-hat half-width must be >= 0");
  for (int a = 0; a < g.dim(); ++a) {
    if (2 * n + 1 > g.n(a)) throw ConfigError("top-hat wider than the grid");
  }
  VectorField<T> out = u;
  if (n == 0) return out;
  std::vector<T> tmp;
  for (int c = 0; c < g.dim(); ++c) {
    for (int a = 0; a < g.dim(); ++a) box_average_axis(out.component(c), g, a, n, tmp);
  }
  return out;
}

template <class T>
ScalarField<T> tophat_same_grid(const ScalarField<T>& p, int n) {
  const Grid& g = p.grid();
  if (n < 0) throw ConfigError("top-hat half-width must be >= 0");
  for (int a = 0; a < g.dim(); ++a) {
    if (2 * n + 1 > g.n(a)) throw ConfigError("top-hat wider than the grid");
  }
  ScalarField<T> out = p;
  if (n == 0) return out;
  std::vector<T> tmp;
  for (int a = 0; a < g.dim(); ++a) box_average_axis(out.values(), g, a, n, tmp);
  return out;
}

#define SGLES_INSTANTIATE(T)                                                                          \
  template VectorField<T> face_average<T>(const VectorField<T>&, const CoarseningMap&);               \
  template VectorField<T> volume_average<T>(const VectorField<T>&, const CoarseningMap&, VAStencil);  \
  template VectorField<T> apply_filter<T>(const VectorField<T>&, const CoarseningMap&, FilterKind);   \
  template VectorField<T> apply_filter_transpose<T>(const VectorField<T>&, const CoarseningMap&, FilterKind); \
  template ScalarField<T> pressure_filter<T>(const ScalarField<T>&, const CoarseningMap&);            \
  template ScalarField<T> div_commutator_cD<T>(const VectorField<T>&, const CoarseningMap&, FilterKind); \
  template VectorField<T> tophat_same_grid<T>(const VectorField<T>&, int);                            \
  template ScalarField<T> tophat_same_grid<T>(const ScalarField<T>&, int);

SGLES_INSTANTIATE(float)
SGLES_INSTANTIATE(double)
#undef SGLES_INSTANTIATE

}  // namespace sgles
