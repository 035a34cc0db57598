#pragma once

// Closure models m(u, theta) on the coarse staggered grid: Smagorinsky eddy
// viscosity and a convolutional network acting on collocated velocities.
//
// CNN data layout: cell-centred channels, channel index fastest
// (value of channel ch at cell I is v[I * count + ch]). Layer parameters are
// stored contiguously per layer: weights [tap][cin][cout] followed by the
// bias [cout]. Taps enumerate the offsets J in [-r, r]^d with axis 0 fastest;
// a layer computes y_I = b + sum_J K_J^T x_{I+J} with periodic wrap.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sgles/grid.hpp"

namespace sgles {

enum class Activation { tanh, identity };

struct ConvLayer {
  int radius = 2;
  int cin = 0;
  int cout = 0;
  Activation act = Activation::tanh;
  bool bias = true;

  bool operator==(const ConvLayer&) const = default;
};

// The collocation step (faces -> centres before the first layer, centres ->
// faces after the last) is fixed and linear, so it carries no fields.
struct CNNArchitecture {
  int dim = 2;
  std::vector<ConvLayer> layers;

  bool operator==(const CNNArchitecture&) const = default;
};

// d -> 24 -> 24 -> 24 -> 24 -> d, radius 2, tanh with bias inside, linear without bias last.
CNNArchitecture default_architecture(int dim);
// Throws ConfigError when the architecture breaks the d-in/d-out or last-layer rules.
void validate(const CNNArchitecture& arch);
int tap_count(int radius, int dim);
std::size_t layer_param_count(const ConvLayer& layer, int dim);
std::size_t param_count(const CNNArchitecture& arch);
// Chebyshev radius of the dependence of an output face on input faces.
int receptive_radius(const CNNArchitecture& arch);

struct ClosureParams {
  CNNArchitecture arch;
  std::vector<double> theta;
  std::vector<std::size_t> offsets;  // start of each layer block in theta

  std::span<const double> layer(std::size_t l) const;
};

// Throws ConfigError on length mismatch or non-finite entries.
ClosureParams make_params(CNNArchitecture arch, std::vector<double> theta);
// Uniform on +-sqrt(1 / fan_in), fan_in = (2r+1)^d cin, per layer in storage order.
ClosureParams init_params(const CNNArchitecture& arch, std::uint64_t seed);

// CNP1 parameter files.
void save_params(const std::filesystem::path& path, const ClosureParams& p);
ClosureParams load_params(const std::filesystem::path& path);

struct Channels {
  Grid grid;
  int count = 0;
  std::vector<double> v;

  Channels() = default;
  Channels(Grid g, int c) : grid(g), count(c), v(g.cell_count() * static_cast<std::size_t>(c), 0.0) {}
};

// Face -> centre: channel a at I is (u^a[I - e_a] + u^a[I]) / 2.
template <class T>
Channels collocate(const VectorField<T>& u);
// Centre -> face: u^a[I] = (w_a[I] + w_a[I + e_a]) / 2. Also the transpose of collocate.
VectorField<double> decollocate(const Channels& w);
// Transpose of decollocate (equal to collocate of a double field).
Channels decollocate_transpose(const VectorField<double>& g);

// rows[t * n + i] = flat index of cell i shifted by tap offset t.
struct ShiftTable {
  Grid grid;
  int radius = 0;
  int taps = 0;
  std::vector<std::uint32_t> rows;

  const std::uint32_t* tap(int t) const { return rows.data() + static_cast<std::size_t>(t) * grid.cell_count(); }
};
ShiftTable make_shift_table(const Grid& g, int radius);

// Pre-activation output b + sum_J K_J^T x_{I+J}.
Channels conv_forward(const Channels& x, const ConvLayer& layer, std::span<const double> p, const ShiftTable& shifts);
// gx += J_x^T gy (when gx is non-null), gp += J_p^T gy.
void conv_backward(const Channels& x, const ConvLayer& layer, std::span<const double> p, const ShiftTable& shifts,
                   const Channels& gy, Channels* gx, std::span<double> gp);
void apply_activation(Activation act, std::span<double> v);

// decollocate o conv_L o act o ... o conv_1 o collocate, evaluated in 64-bit.
template <class T>
VectorField<T> cnn_forward(const VectorField<T>& u, const ClosureParams& p);

// Largest Chebyshev distance (in cells, periodic) between a perturbed input
// face and any output face that changes, over all input components.
int probe_locality_radius(const ClosureParams& p, std::int64_t cells, std::uint64_t seed);

// Strain rate S = (grad u + grad u^T) / 2. Diagonal entries live at cell
// centres, off-diagonal (a < b) entries at the (+a, +b) edge of each cell.
struct StrainRate {
  Grid grid;
  std::array<std::vector<double>, 3> diag;
  std::array<std::array<std::vector<double>, 3>, 3> off;

  // Full tensor at the centre of cell i (off-diagonals averaged from the 4 surrounding edges).
  std::array<std::array<double, 3>, 3> at_center(std::size_t i) const;
};

template <class T>
StrainRate strain_rate(const VectorField<T>& u);

// nu_t = theta^2 Delta^2 sqrt(2 S:S) at cell centres; Delta = (prod h_a)^(1/d).
template <class T>
ScalarField<double> eddy_viscosity(const VectorField<T>& u, double theta);

// D . (2 nu_t S) at the velocity points. Throws ConfigError unless theta in [0, 1].
template <class T>
VectorField<T> smagorinsky(const VectorField<T>& u, double theta);

}  // namespace sgles
