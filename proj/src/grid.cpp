#include "sgles/grid.hpp"

#include <cmath>
#include <string>

#include "sgles/simd.hpp"

namespace sgles {

double Grid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= h_[a];
  return v;
}

double Grid::box_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= length(a);
  return v;
}

namespace {
std::int64_t wrap(std::int64_t i, std::int64_t n) {
  const std::int64_t r = i % n;
  return r < 0 ? r + n : r;
}
}  // namespace

std::size_t Grid::index(std::int64_t i, std::int64_t j, std::int64_t k) const {
  return static_cast<std::size_t>(wrap(i, n_[0]) + n_[0] * (wrap(j, n_[1]) + n_[1] * wrap(k, n_[2])));
}

std::array<std::int64_t, 3> Grid::coords(std::size_t idx) const {
  const auto t = static_cast<std::int64_t>(idx);
  return {t % n_[0], (t / n_[0]) % n_[1], t / (n_[0] * n_[1])};
}

Grid make_grid(int dim, std::span<const std::int64_t> cells, std::span<const Extent> extents) {
  if (dim != 2 && dim != 3) throw ConfigError("grid dimension must be 2 or 3, got " + std::to_string(dim));
  if (cells.size() != static_cast<std::size_t>(dim) || extents.size() != static_cast<std::size_t>(dim)) {
    throw ConfigError("grid needs one cell count and one extent per axis");
  }
  Grid g;
  g.dim_ = dim;
  for (int a = 0; a < dim; ++a) {
    if (cells[a] < 2) throw ConfigError("grid needs at least 2 cells per axis");
    const double lo = extents[a].lo, hi = extents[a].hi;
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
      throw ConfigError("grid extent must satisfy hi > lo");
    }
    g.n_[a] = cells[a];
    g.lo_[a] = lo;
    g.hi_[a] = hi;
    g.h_[a] = (hi - lo) / static_cast<double>(cells[a]);
  }
  return g;
}

Grid make_cube_grid(int dim, std::int64_t cells, Extent extent) {
  const std::array<std::int64_t, 3> n{cells, cells, cells};
  const std::array<Extent, 3> e{extent, extent, extent};
  if (dim != 2 && dim != 3) throw ConfigError("grid dimension must be 2 or 3, got " + std::to_string(dim));
  return make_grid(dim, std::span(n).first(dim), std::span(e).first(dim));
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw ConfigError(std::string(what) + ": fields live on different grids");
}

template <class T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

template <class T>
double weighted(double s, const Grid& g, Weighting w) {
  return w == Weighting::volume ? s * g.cell_volume() : s;
}

template <class T>
void check_finite(std::span<const T> v) {
  if (!all_finite(v)) throw NumericalError("non-finite entry in field");
}

}  // namespace

template <class T>
double field_norm(const VectorField<T>& f, Weighting w) {
  check_finite(f.flat());
  return std::sqrt(weighted<T>(simd::dot(f.flat(), f.flat()), f.grid(), w));
}

template <class T>
double field_norm(const ScalarField<T>& f, Weighting w) {
  check_finite(f.values());
  return std::sqrt(weighted<T>(simd::dot(f.values(), f.values()), f.grid(), w));
}

template <class T>
double inner_product(const VectorField<T>& a, const VectorField<T>& b, Weighting w) {
  require_same_grid(a.grid(), b.grid(), "inner_product");
  return weighted<T>(simd::dot(a.flat(), b.flat()), a.grid(), w);
}

template <class T>
double inner_product(const ScalarField<T>& a, const ScalarField<T>& b, Weighting w) {
  require_same_grid(a.grid(), b.grid(), "inner_product");
  return weighted<T>(simd::dot(a.values(), b.values()), a.grid(), w);
}

template <class T>
void axpy(T a, const VectorField<T>& x, VectorField<T>& y) {
  require_same_grid(x.grid(), y.grid(), "axpy");
  simd::axpy(a, x.flat(), y.flat());
}

template <class T>
VectorField<T> operator+(const VectorField<T>& a, const VectorField<T>& b) {
  VectorField<T> r = a;
  axpy(T(1), b, r);
  return r;
}

template <class T>
VectorField<T> operator-(const VectorField<T>& a, const VectorField<T>& b) {
  VectorField<T> r = a;
  axpy(T(-1), b, r);
  return r;
}

template <class T>
VectorField<T> operator*(T s, const VectorField<T>& a) {
  VectorField<T> r = a;
  for (T& v : r.flat()) v *= s;
  return r;
}

template <class T>
ScalarField<T> operator-(const ScalarField<T>& a, const ScalarField<T>& b) {
  require_same_grid(a.grid(), b.grid(), "subtract");
  ScalarField<T> r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

#define SGLES_INSTANTIATE(T)                                                               \
  template bool all_finite<T>(std::span<const T>);                                         \
  template double field_norm<T>(const VectorField<T>&, Weighting);                         \
  template double field_norm<T>(const ScalarField<T>&, Weighting);                         \
  template double inner_product<T>(const VectorField<T>&, const VectorField<T>&, Weighting); \
  template double inner_product<T>(const ScalarField<T>&, const ScalarField<T>&, Weighting); \
  template void axpy<T>(T, const VectorField<T>&, VectorField<T>&);                         \
  template VectorField<T> operator+ <T>(const VectorField<T>&, const VectorField<T>&);      \
  template VectorField<T> operator- <T>(const VectorField<T>&, const VectorField<T>&);      \
  template VectorField<T> operator* <T>(T, const VectorField<T>&);                          \
  template ScalarField<T> operator- <T>(const ScalarField<T>&, const ScalarField<T>&);

SGLES_INSTANTIATE(float)
SGLES_INSTANTIATE(double)
#undef SGLES_INSTANTIATE

}  // namespace sgles
