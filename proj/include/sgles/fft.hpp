#pragma once

// Thin wrapper over FFTW real-to-complex transforms on grid-shaped arrays.
//
// Spectral layout: the x axis (fastest in physical space) is halved, so a
// grid n0 x n1 x n2 maps to (n0/2+1) x n1 x n2 complex values with kx fastest.
// Transforms are unnormalized in both directions (inverse(forward(x)) = N x).

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "sgles/grid.hpp"

namespace sgles::fft {

struct SpectralShape {
  std::int64_t nx_half;  // n0/2 + 1
  std::int64_t n1;
  std::int64_t n2;
  std::size_t size() const { return static_cast<std::size_t>(nx_half * n1 * n2); }
};

SpectralShape spectral_shape(const Grid& g);

// Signed wavenumber for index i on an axis with n points.
inline std::int64_t signed_wavenumber(std::int64_t i, std::int64_t n) { return i <= n / 2 ? i : i - n; }

template <class T>
void forward(const Grid& g, std::span<const T> in, std::span<std::complex<T>> out);
// Input is not modified.
template <class T>
void inverse(const Grid& g, std::span<const std::complex<T>> in, std::span<T> out);

}  // namespace sgles::fft
