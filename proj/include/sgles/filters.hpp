#pragma once

// Fine-to-coarse discrete filters between nested staggered grids.
//
// Coarse cell J covers fine cells m*J .. m*J + m - 1 along each axis, so the
// right a-face of coarse cell J coincides with the right a-face of fine cell
// m*J_a + m - 1.

#include <array>
#include <cstdint>
#include <string>

#include "sgles/grid.hpp"
#include "sgles/operators.hpp"

namespace sgles {

struct CoarseningMap {
  Grid fine;
  Grid coarse;
  std::array<std::int64_t, 3> m{1, 1, 1};
};

// Throws ConfigError unless every fine count is an integer multiple of the coarse count.
CoarseningMap make_coarsening(const Grid& fine, std::int64_t coarse_cells);
CoarseningMap make_coarsening(const Grid& fine, const Grid& coarse);

enum class FilterKind { FA, VA };
// Normal-direction stencil of the volume average.
enum class VAStencil { trapezoidal, uniform_offset };

const char* filter_name(FilterKind k);
FilterKind parse_filter(const std::string& s);

template <class T>
VectorField<T> face_average(const VectorField<T>& u, const CoarseningMap& map);
// Trapezoidal: m+1 normal faces with end weights 1/2 (symmetric about the coarse face).
// Uniform-offset: the m faces m*J_a .. m*J_a + m - 1 with weight 1/m.
template <class T>
VectorField<T> volume_average(const VectorField<T>& u, const CoarseningMap& map,
                              VAStencil stencil = VAStencil::trapezoidal);
template <class T>
VectorField<T> apply_filter(const VectorField<T>& u, const CoarseningMap& map, FilterKind kind);
// Mean of the m^d fine cells in each coarse cell.
template <class T>
ScalarField<T> pressure_filter(const ScalarField<T>& p, const CoarseningMap& map);

// Transposes with respect to the unweighted inner product (used for pullbacks).
template <class T>
VectorField<T> apply_filter_transpose(const VectorField<T>& w, const CoarseningMap& map, FilterKind kind);

// c(u) = Phi P F(u) - P F(Phi u), evaluated in 64-bit.
VectorField<double> commutator(const VectorField<double>& u, const CoarseningMap& map, FilterKind kind,
                               const FlowParams& params);
// Same, returning the filtered field as well so callers avoid filtering twice.
struct FilteredPair {
  VectorField<double> ubar;
  VectorField<double> c;
};
FilteredPair filter_and_commutator(const VectorField<double>& u, const CoarseningMap& map, FilterKind kind,
                                   const FlowParams& params);

// D(Phi u) - Psi(D u)
template <class T>
ScalarField<T> div_commutator_cD(const VectorField<T>& u, const CoarseningMap& map, FilterKind kind);

// (2n+1)^d moving average on the same grid, periodic. Works on every component.
template <class T>
VectorField<T> tophat_same_grid(const VectorField<T>& u, int n);
template <class T>
ScalarField<T> tophat_same_grid(const ScalarField<T>& p, int n);

}  // namespace sgles
