#pragma once

// Uniform periodic staggered Cartesian grid and the field types living on it.
//
// Layout: row-major with axis 0 ("axis 1" in the usual x/y/z naming) fastest,
// i.e. flat index = i + n0 * (j + n1 * k). A ScalarField holds one value per
// cell center; a VectorField holds `dim` component arrays back to back, where
// component a at cell I is located on the face x_I + h_a/2 e_a (the right
// a-face of cell I).

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sgles/error.hpp"

namespace sgles {

inline constexpr int kMaxDim = 3;

enum class Precision { f32, f64 };

template <class T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Precision::f32 : Precision::f64;
}

struct Extent {
  double lo = 0.0;
  double hi = 1.0;
};

class Grid {
 public:
  Grid() = default;

  int dim() const { return dim_; }
  // Axes beyond dim() report a single cell so loops can always run over three axes.
  std::int64_t n(int axis) const { return n_[axis]; }
  double h(int axis) const { return h_[axis]; }
  double lo(int axis) const { return lo_[axis]; }
  double hi(int axis) const { return hi_[axis]; }
  double length(int axis) const { return hi_[axis] - lo_[axis]; }

  std::size_t cell_count() const {
    return static_cast<std::size_t>(n_[0] * n_[1] * n_[2]);
  }
  double cell_volume() const;
  double face_area(int axis) const { return cell_volume() / h_[axis]; }
  double box_volume() const;

  std::size_t stride(int axis) const {
    return axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(n_[0])
                                     : static_cast<std::size_t>(n_[0] * n_[1]);
  }

  // Periodic: any integer coordinates are wrapped into range.
  std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k = 0) const;
  std::array<std::int64_t, 3> coords(std::size_t idx) const;

  double center(int axis, std::int64_t i) const { return lo_[axis] + (static_cast<double>(i) + 0.5) * h_[axis]; }
  // Coordinate of the right face of cell i along `axis`.
  double face(int axis, std::int64_t i) const { return lo_[axis] + static_cast<double>(i + 1) * h_[axis]; }
  // Position of velocity component `comp` stored at cell (i, j, k), along `axis`.
  double velocity_point(int comp, int axis, std::int64_t i) const {
    return comp == axis ? face(axis, i) : center(axis, i);
  }

  bool operator==(const Grid& o) const = default;

 private:
  friend Grid make_grid(int dim, std::span<const std::int64_t> cells, std::span<const Extent> extents);

  int dim_ = 0;
  std::array<std::int64_t, 3> n_{1, 1, 1};
  std::array<double, 3> lo_{0.0, 0.0, 0.0};
  std::array<double, 3> hi_{1.0, 1.0, 1.0};
  std::array<double, 3> h_{1.0, 1.0, 1.0};
};

// Throws ConfigError for dim outside {2,3}, fewer than 2 cells on an axis or
// an empty/negative extent.
Grid make_grid(int dim, std::span<const std::int64_t> cells, std::span<const Extent> extents);
// Same cell count and extent on every axis.
Grid make_cube_grid(int dim, std::int64_t cells, Extent extent = {});

// Visits every cell in layout order with the indices of its periodic
// neighbours along each axis (p = +1, m = -1).
struct CellStencil {
  std::size_t c;
  std::array<std::size_t, 3> p;
  std::array<std::size_t, 3> m;
  std::array<std::int64_t, 3> ijk;
};

template <class F>
void for_each_cell(const Grid& g, F&& f) {
  const std::int64_t n0 = g.n(0), n1 = g.n(1), n2 = g.n(2);
  const std::size_t s1 = g.stride(1), s2 = g.stride(2);
  CellStencil st{};
  for (std::int64_t k = 0; k < n2; ++k) {
    const std::size_t zk = static_cast<std::size_t>(k) * s2;
    const std::size_t zkp = static_cast<std::size_t>(k + 1 == n2 ? 0 : k + 1) * s2;
    const std::size_t zkm = static_cast<std::size_t>(k == 0 ? n2 - 1 : k - 1) * s2;
    for (std::int64_t j = 0; j < n1; ++j) {
      const std::size_t yj = static_cast<std::size_t>(j) * s1;
      const std::size_t yjp = static_cast<std::size_t>(j + 1 == n1 ? 0 : j + 1) * s1;
      const std::size_t yjm = static_cast<std::size_t>(j == 0 ? n1 - 1 : j - 1) * s1;
      for (std::int64_t i = 0; i < n0; ++i) {
        const std::size_t xi = static_cast<std::size_t>(i);
        const std::size_t xip = static_cast<std::size_t>(i + 1 == n0 ? 0 : i + 1);
        const std::size_t xim = static_cast<std::size_t>(i == 0 ? n0 - 1 : i - 1);
        st.c = xi + yj + zk;
        st.p = {xip + yj + zk, xi + yjp + zk, xi + yj + zkp};
        st.m = {xim + yj + zk, xi + yjm + zk, xi + yj + zkm};
        st.ijk = {i, j, k};
        f(static_cast<const CellStencil&>(st));
      }
    }
  }
}

template <class T>
class ScalarField {
 public:
  using value_type = T;

  ScalarField() = default;
  explicit ScalarField(Grid grid) : grid_(grid), v_(grid.cell_count(), T(0)) {}
  ScalarField(Grid grid, std::vector<T> values) : grid_(grid), v_(std::move(values)) {
    if (v_.size() != grid_.cell_count()) throw ConfigError("scalar field size does not match grid");
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  std::span<T> values() { return v_; }
  std::span<const T> values() const { return v_; }
  T& operator[](std::size_t i) { return v_[i]; }
  const T& operator[](std::size_t i) const { return v_[i]; }
  std::vector<T> release() && { return std::move(v_); }

 private:
  Grid grid_;
  std::vector<T> v_;
};

template <class T>
class VectorField {
 public:
  using value_type = T;

  VectorField() = default;
  explicit VectorField(Grid grid)
      : grid_(grid), v_(grid.cell_count() * static_cast<std::size_t>(grid.dim()), T(0)) {}
  VectorField(Grid grid, std::vector<T> flat) : grid_(grid), v_(std::move(flat)) {
    if (v_.size() != grid_.cell_count() * static_cast<std::size_t>(grid_.dim())) {
      throw ConfigError("vector field size does not match grid");
    }
  }

  const Grid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  std::size_t cells() const { return grid_.cell_count(); }
  std::size_t size() const { return v_.size(); }

  std::span<T> component(int a) { return std::span<T>(v_).subspan(static_cast<std::size_t>(a) * cells(), cells()); }
  std::span<const T> component(int a) const {
    return std::span<const T>(v_).subspan(static_cast<std::size_t>(a) * cells(), cells());
  }
  std::span<T> flat() { return v_; }
  std::span<const T> flat() const { return v_; }
  T& at(int a, std::size_t i) { return v_[static_cast<std::size_t>(a) * cells() + i]; }
  const T& at(int a, std::size_t i) const { return v_[static_cast<std::size_t>(a) * cells() + i]; }
  std::vector<T> release() && { return std::move(v_); }

 private:
  Grid grid_;
  std::vector<T> v_;
};

enum class Weighting { none, volume };

template <class T>
double field_norm(const VectorField<T>& f, Weighting w = Weighting::none);
template <class T>
double field_norm(const ScalarField<T>& f, Weighting w = Weighting::none);
template <class T>
double inner_product(const VectorField<T>& a, const VectorField<T>& b, Weighting w = Weighting::none);
template <class T>
double inner_product(const ScalarField<T>& a, const ScalarField<T>& b, Weighting w = Weighting::none);

template <class T>
bool all_finite(std::span<const T> values);

// y += a * x (same grid required).
template <class T>
void axpy(T a, const VectorField<T>& x, VectorField<T>& y);
template <class T>
VectorField<T> operator+(const VectorField<T>& a, const VectorField<T>& b);
template <class T>
VectorField<T> operator-(const VectorField<T>& a, const VectorField<T>& b);
template <class T>
VectorField<T> operator*(T s, const VectorField<T>& a);
template <class T>
ScalarField<T> operator-(const ScalarField<T>& a, const ScalarField<T>& b);

template <class To, class From>
VectorField<To> cast_field(const VectorField<From>& f) {
  std::vector<To> out(f.flat().begin(), f.flat().end());
  return VectorField<To>(f.grid(), std::move(out));
}
template <class To, class From>
ScalarField<To> cast_field(const ScalarField<From>& f) {
  std::vector<To> out(f.values().begin(), f.values().end());
  return ScalarField<To>(f.grid(), std::move(out));
}

void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace sgles
