#pragma once

// Discrete operators of the staggered second-order finite-volume scheme on a
// uniform periodic grid.
//
//   divergence   (Du)_I      = sum_a (u^a[I] - u^a[I - e_a]) / h_a          (cell centers)
//   gradient     (Gp)^a[I]   = (p[I + e_a] - p[I]) / h_a                    (faces), G = -D^T
//   convection   C^a         = -sum_b D-_b( A_b(u^a) * A_a(u^b) )            (momentum sign)
//   diffusion    nu * sum_b (u[I+e_b] - 2u[I] + u[I-e_b]) / h_b^2
//
// A_b is the half-sum with the +e_b neighbour and D-_b the backward
// difference. Convection returns the term as it appears on the right-hand
// side of the momentum equation, i.e. the negated discrete d(u u)/dx.

#include <optional>

#include "sgles/grid.hpp"

namespace sgles {

enum class ForceKind { none, kolmogorov };

struct BodyForceSpec {
  ForceKind kind = ForceKind::none;
  double amplitude = 1.0;
  int wavenumber = 4;
};

struct FlowParams {
  double nu = 1e-3;
  BodyForceSpec force{};
};

// Throws ConfigError on nu <= 0 (strict = true) or invalid force spec.
void validate(const FlowParams& p, bool allow_inviscid = false);

template <class T>
ScalarField<T> divergence(const VectorField<T>& u);
template <class T>
VectorField<T> pressure_gradient(const ScalarField<T>& p);
template <class T>
VectorField<T> convection(const VectorField<T>& u);
// grad += J_conv(u)^T w
template <class T>
void convection_vjp(const VectorField<T>& u, const VectorField<T>& w, VectorField<T>& grad);
template <class T>
VectorField<T> diffusion(const VectorField<T>& u, double nu);
// Kolmogorov: component 1 = A sin(2 pi kf y) sampled at the u^1 face points.
template <class T>
VectorField<T> body_force(const Grid& g, const BodyForceSpec& spec);
template <class T>
VectorField<T> rhs(const VectorField<T>& u, const FlowParams& params);

struct PoissonReport {
  double rhs_mean = 0.0;
  double rhs_rms = 0.0;
  // Mean of the right-hand side exceeds round-off level; the solve used the
  // mean-free part.
  bool inconsistent = false;
};

// Solves L p = b with L = |Omega| D G, mean(p) = 0.
template <class T>
ScalarField<T> poisson_solve(const ScalarField<T>& b, PoissonReport* report = nullptr);
// P u = u - G L^+ (|Omega| D u)
template <class T>
VectorField<T> project(const VectorField<T>& u, PoissonReport* report = nullptr);
// P F(u)
template <class T>
VectorField<T> projected_rhs(const VectorField<T>& u, const FlowParams& params);
// <u, diffusion(u, nu)>, volume weighted.
template <class T>
double dissipation(const VectorField<T>& u, double nu);

// Divergence-free tolerance used by checks: 1e-10 |u|/h (64-bit), 1e-3 |u|/h (32-bit).
template <class T>
constexpr double divergence_tolerance_factor() {
  return std::is_same_v<T, float> ? 1e-3 : 1e-10;
}

}  // namespace sgles
