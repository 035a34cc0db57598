#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sgles/grid.hpp"

namespace sgles {

// Modal energies E_k = 1/2 sum_a |u_hat^a_k|^2, u_hat = (1/N) DFT of each
// component array at its own staggered location, binned over
// { k : kappa / a <= |k| <= kappa a } with kappa = a^j, j = 0, 1, ...,
// kappa <= min N / 2. Modes with |k| > min N / 2 fall outside every bin.
struct SpectrumResult {
  double ratio = 0.0;
  std::vector<double> kappa;
  std::vector<double> energy;
};

inline constexpr double kGoldenRatio = 1.6180339887498948482;

template <class T>
SpectrumResult energy_spectrum(const VectorField<T>& u, double ratio = kGoldenRatio);
// sum_k E_k over every mode; equals total_energy(u) / box volume.
template <class T>
double modal_energy_sum(const VectorField<T>& u);

// 1/2 |u|^2, volume weighted.
template <class T>
double total_energy(const VectorField<T>& u);

// prod_a sinc(pi k_a D / 2), and the same product without axis `alpha`.
double transfer_va(std::span<const double> k, double width);
double transfer_fa(std::span<const double> k, double width, int alpha);

struct TGState {
  double u, v, p;
};
TGState taylor_green(double x, double y, double t, double nu);

// c_x = -1/2 (sinc^4(D/2) - sinc(D)) sin 2x, c_y likewise in y.
std::array<double, 2> tg_continuous_commutator(double width, double x, double y);
// G_{n,d} = 1/(2n+1) sum_{i=-n}^{n} cos(i d)
double tophat_gain(int n, double d);
// E = G_{n,d}^4 (sinc D + sinc 2D) - G_{n,2d} (sinc d + sinc 2d), D = 2 n d.
double tg_discrete_commutator_coeff(int n, double d);

struct TGCrossCheck {
  int n = 0;
  std::int64_t fine_cells = 0;
  double coeff = 0.0;
  double max_error_x = 0.0;
  double max_error_y = 0.0;
};
// Filters Taylor-Green on a fine grid of spacing d = 2 pi / fine_cells with
// the (2n+1)^2 top-hat, evaluates the commutator Phi conv_d - conv_D(Phi u)
// on the coarse staggered grid of spacing D = 2 n d with the solver's
// convection, and compares it to -E/4 (sin 2x, sin 2y).
TGCrossCheck tg_solver_crosscheck(int n, std::int64_t fine_cells);

double sinc(double x);

}  // namespace sgles
