#pragma once

#include <cmath>
#include <random>

#include "sgles/grid.hpp"
#include "sgles/operators.hpp"

namespace testing {

inline sgles::Grid unit_grid(int dim, std::int64_t n, double length = 1.0) {
  return sgles::make_cube_grid(dim, n, {0.0, length});
}

template <class T = double>
sgles::VectorField<T> random_vector(const sgles::Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  sgles::VectorField<T> u(g);
  for (T& v : u.flat()) v = static_cast<T>(nd(rng));
  return u;
}

template <class T = double>
sgles::ScalarField<T> random_scalar(const sgles::Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  sgles::ScalarField<T> p(g);
  for (T& v : p.values()) v = static_cast<T>(nd(rng));
  return p;
}

template <class T = double>
sgles::VectorField<T> random_solenoidal(const sgles::Grid& g, std::uint64_t seed) {
  return sgles::project(random_vector<T>(g, seed));
}

template <class T>
double max_abs(const sgles::VectorField<T>& f) {
  double m = 0.0;
  for (T v : f.flat()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

template <class T>
double max_abs(const sgles::ScalarField<T>& f) {
  double m = 0.0;
  for (T v : f.values()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

// Relative difference |a-b| / |b| in the unweighted norm.
template <class T>
double rel_diff(const sgles::VectorField<T>& a, const sgles::VectorField<T>& b) {
  return sgles::field_norm(a - b) / sgles::field_norm(b);
}

}  // namespace testing
