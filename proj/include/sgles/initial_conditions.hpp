#pragma once

// Random solenoidal velocity fields with a prescribed energy spectrum
//   E(k) = (8 pi / (3 kp^5)) k^4 exp(-2 pi (k / kp)^2),
// k measured in integer mode numbers of the periodic box.
//
// Draw order (reproducibility contract): first the phase table xi^a for all
// non-negative wavenumber vectors, then one random unit vector per
// half-space representative of +-k; both loops run lexicographically over
// (k_1, ..., k_d) with k_1 most significant and ascending values, from two
// independent xoshiro256++ streams derived from the seed.

#include <complex>
#include <cstdint>
#include <vector>

#include "sgles/grid.hpp"

namespace sgles {

struct SpectrumSpec {
  double peak_wavenumber = 10.0;
  std::uint64_t seed = 0;
};

double spectrum_profile(double k, double kp);

// Fourier coefficients u_hat^a[k] on the full index space (same layout as a
// field, index i holds wavenumber signed_wavenumber(i, N)), for the field
// sampled at cell centres. u(x) = sum_k u_hat_k exp(2 pi i k.(x - lo)/L).
struct SpectralCoefficients {
  Grid grid;
  std::vector<std::vector<std::complex<double>>> comp;
};

SpectralCoefficients random_spectral_coefficients(const Grid& g, const SpectrumSpec& spec);
// Samples the coefficients at the staggered velocity points, without the
// final discrete projection.
VectorField<double> sample_staggered(const SpectralCoefficients& c);

// P(sample_staggered(random_spectral_coefficients(g, spec))), cast to T.
template <class T>
VectorField<T> random_spectral_field(const Grid& g, const SpectrumSpec& spec);

}  // namespace sgles
