#include "sgles/timestepping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sgles {

RKTableau wray3_tableau() {
  RKTableau t;
  t.name = "wray3";
  t.stages = 3;
  t.a = {0.0, 0.0, 0.0,
         8.0 / 15.0, 0.0, 0.0,
         1.0 / 4.0, 5.0 / 12.0, 0.0};
  t.b = {1.0 / 4.0, 0.0, 3.0 / 4.0};
  t.c = {0.0, 8.0 / 15.0, 2.0 / 3.0};
  return t;
}

RKTableau rk4_tableau() {
  RKTableau t;
  t.name = "rk4";
  t.stages = 4;
  t.a = {0.0, 0.0, 0.0, 0.0,
         0.5, 0.0, 0.0, 0.0,
         0.0, 0.5, 0.0, 0.0,
         0.0, 0.0, 1.0, 0.0};
  t.b = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
  t.c = {0.0, 0.5, 0.5, 1.0};
  return t;
}

RKTableau tableau_by_name(const std::string& name) {
  if (name == "wray3") return wray3_tableau();
  if (name == "rk4") return rk4_tableau();
  throw ConfigError("unknown Runge-Kutta scheme '" + name + "' (expected wray3 or rk4)");
}

void validate(const StepControl& c) {
  if (c.mode == StepMode::fixed && !(c.dt > 0.0 && std::isfinite(c.dt))) {
    throw ConfigError("fixed time step must be positive");
  }
  if (!(c.sigma > 0.0 && c.sigma <= 1.0)) throw ConfigError("CFL safety factor must lie in (0, 1]");
  if (c.max_steps < 1) throw ConfigError("max_steps must be >= 1");
}

template <class T>
VectorField<T> rk_step(const VectorField<T>& u, double dt, const RKTableau& tab, const RhsFn<T>& rhs,
                       bool project_each_stage, const StageHook<T>& hook) {
  std::vector<VectorField<T>> k;
  k.reserve(static_cast<std::size_t>(tab.stages));
  for (int i = 0; i < tab.stages; ++i) {
    VectorField<T> ui = u;
    for (int j = 0; j < i; ++j) {
      const double a = tab.coeff(i, j);
      if (a != 0.0) axpy(static_cast<T>(dt * a), k[static_cast<std::size_t>(j)], ui);
    }
    if (hook) hook(i, ui);
    VectorField<T> ki = rhs(ui);
    if (project_each_stage) ki = project(ki);
    if (!all_finite<T>(ki.flat())) {
      throw NumericalError("non-finite values in Runge-Kutta stage " + std::to_string(i + 1) + " (blow-up)");
    }
    k.push_back(std::move(ki));
  }
  VectorField<T> out = u;
  for (int i = 0; i < tab.stages; ++i) {
    const double b = tab.b[static_cast<std::size_t>(i)];
    if (b != 0.0) axpy(static_cast<T>(dt * b), k[static_cast<std::size_t>(i)], out);
  }
  return out;
}

template <class T>
double cfl_dt(const VectorField<T>& u, const FlowParams& params, double sigma) {
  const Grid& g = u.grid();
  const int d = g.dim();
  double dt = std::numeric_limits<double>::infinity();
  for (int a = 0; a < d; ++a) {
    double umax = 0.0;
    for (T v : u.component(a)) umax = std::max(umax, std::abs(static_cast<double>(v)));
    dt = std::min(dt, g.h(a) / (umax + 1e-12));
  }
  if (params.nu > 0.0) {
    for (int a = 0; a < d; ++a) dt = std::min(dt, g.h(a) * g.h(a) / (2.0 * d * params.nu));
  }
  return sigma * dt;
}

template <class T>
IntegrationResult<T> integrate(const VectorField<T>& u0, double t_end, const StepControl& control,
                               const RKTableau& tab, const FlowParams& params,
                               const StepObserver<T>& observer) {
  validate(control);
  if (!(t_end >= 0.0)) throw ConfigError("t_end must be non-negative");
  IntegrationResult<T> r{project(u0), 0, 0.0};
  if (observer) observer(0, 0.0, r.u);
  const RhsFn<T> f = [&params](const VectorField<T>& v) { return rhs(v, params); };
  while (r.t < t_end) {
    if (r.steps >= control.max_steps) throw NumericalError("maximum step count reached before t_end");
    double dt = control.mode == StepMode::fixed ? control.dt : cfl_dt(r.u, params, control.sigma);
    // Clamp onto t_end, absorbing slivers left by floating-point drift.
    const bool last = r.t + dt >= t_end - 1e-12 * t_end;
    if (last) dt = t_end - r.t;
    r.u = rk_step(r.u, dt, tab, f, true);
    ++r.steps;
    r.t = last ? t_end : r.t + dt;
    if (observer) observer(r.steps, r.t, r.u);
  }
  return r;
}

#define SGLES_INSTANTIATE(T)                                                                       \
  template VectorField<T> rk_step<T>(const VectorField<T>&, double, const RKTableau&, const RhsFn<T>&, \
                                     bool, const StageHook<T>&);                                   \
  template double cfl_dt<T>(const VectorField<T>&, const FlowParams&, double);                     \
  template IntegrationResult<T> integrate<T>(const VectorField<T>&, double, const StepControl&,   \
                                             const RKTableau&, const FlowParams&, const StepObserver<T>&);

SGLES_INSTANTIATE(float)
SGLES_INSTANTIATE(double)
#undef SGLES_INSTANTIATE

}  // namespace sgles
