#include "sgles/les.hpp"

#include <cmath>

namespace sgles {

const char* formulation_name(Formulation f) { return f == Formulation::DIF ? "DIF" : "DCF"; }

Formulation parse_formulation(const std::string& s) {
  if (s == "DIF" || s == "dif") return Formulation::DIF;
  if (s == "DCF" || s == "dcf") return Formulation::DCF;
  throw ConfigError("unknown LES formulation '" + s + "' (expected DIF or DCF)");
}

const char* closure_name(ClosureKind k) {
  switch (k) {
    case ClosureKind::none: return "none";
    case ClosureKind::smagorinsky: return "smagorinsky";
    case ClosureKind::cnn: return "cnn";
    case ClosureKind::external: return "external";
  }
  return "?";
}

ClosureKind parse_closure(const std::string& s) {
  if (s == "none") return ClosureKind::none;
  if (s == "smagorinsky") return ClosureKind::smagorinsky;
  if (s == "cnn") return ClosureKind::cnn;
  if (s == "external") return ClosureKind::external;
  throw ConfigError("unknown closure '" + s + "' (expected none, smagorinsky or cnn)");
}

void validate(const LESModel& m) {
  validate(m.flow);
  if (m.grid.dim() < 2) throw ConfigError("LES model needs a 2D or 3D coarse grid");
  switch (m.closure) {
    case ClosureKind::none: break;
    case ClosureKind::smagorinsky:
      if (!(m.smagorinsky_theta >= 0.0 && m.smagorinsky_theta <= 1.0)) {
        throw ConfigError("Smagorinsky coefficient must lie in [0, 1]");
      }
      break;
    case ClosureKind::cnn:
      validate(m.cnn.arch);
      if (m.cnn.arch.dim != m.grid.dim()) throw ConfigError("CNN dimension does not match the LES grid");
      if (m.cnn.theta.size() != param_count(m.cnn.arch)) throw ConfigError("CNN parameter count mismatch");
      break;
    case ClosureKind::external:
      if (!m.external) throw ConfigError("external closure selected without a callback");
      break;
  }
}

template <class T>
VectorField<T> closure_term(const VectorField<T>& v, const LESModel& m, const StageContext& ctx) {
  switch (m.closure) {
    case ClosureKind::none: return VectorField<T>(v.grid());
    case ClosureKind::smagorinsky: return smagorinsky(v, m.smagorinsky_theta);
    case ClosureKind::cnn: return cnn_forward(v, m.cnn);
    case ClosureKind::external: {
      auto c = m.external(cast_field<double>(v), ctx);
      require_same_grid(c.grid(), v.grid(), "external closure");
      return cast_field<T>(c);
    }
  }
  throw ConfigError("invalid closure kind");
}

template <class T>
VectorField<T> les_rhs(const VectorField<T>& v, const LESModel& m, const StageContext& ctx) {
  VectorField<T> f = rhs(v, m.flow);
  if (m.closure == ClosureKind::none) return project(f);
  const VectorField<T> c = closure_term(v, m, ctx);
  if (m.formulation == Formulation::DCF) {
    axpy(T(1), c, f);
    return project(f);
  }
  VectorField<T> out = project(f);
  axpy(T(1), c, out);
  return out;
}

template <class T>
VectorField<T> les_step(const VectorField<T>& v, double dt, const LESModel& m, std::int64_t step) {
  int stage = 0;
  const RhsFn<T> f = [&](const VectorField<T>& x) { return les_rhs(x, m, StageContext{step, stage++}); };
  return rk_step(v, dt, m.tableau, f, false);
}

template <class T>
LESTrajectory<T> run_les(const VectorField<T>& v0, const LESModel& m, const StepControl& control, double t_end,
                         const StepObserver<T>& observer, std::int64_t store_every) {
  validate(m);
  validate(control);
  require_same_grid(v0.grid(), m.grid, "LES initial field");
  if (!(t_end >= 0.0)) throw ConfigError("t_end must be non-negative");
  if (store_every < 0) throw ConfigError("store_every must be >= 0");

  LESTrajectory<T> r;
  r.final = v0;
  if (store_every > 0) {
    r.states.push_back(v0);
    r.times.push_back(0.0);
  }
  if (observer) observer(0, 0.0, v0);
  while (r.t < t_end) {
    if (r.steps >= control.max_steps) throw NumericalError("maximum step count reached before t_end");
    double dt = control.mode == StepMode::fixed ? control.dt : cfl_dt(r.final, m.flow, control.sigma);
    const bool last = r.t + dt >= t_end - 1e-9 * t_end;
    if (last) dt = t_end - r.t;
    try {
      VectorField<T> next = les_step(r.final, dt, m, r.steps);
      if (!all_finite<T>(next.flat())) throw NumericalError("non-finite LES state");
      r.final = std::move(next);
    } catch (const NumericalError& e) {
      r.unstable = true;
      r.diagnostic = "step " + std::to_string(r.steps + 1) + " at t=" + std::to_string(r.t) + ": " + e.what();
      return r;
    }
    ++r.steps;
    r.t = last ? t_end : r.t + dt;
    if (store_every > 0 && r.steps % store_every == 0) {
      r.states.push_back(r.final);
      r.times.push_back(r.t);
    }
    if (observer) observer(r.steps, r.t, r.final);
  }
  return r;
}

template <class T>
double aposteriori_error(const std::vector<VectorField<T>>& v, const std::vector<VectorField<T>>& u) {
  if (v.size() != u.size() || v.empty()) throw ConfigError("a-posteriori error needs aligned, non-empty trajectories");
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    require_same_grid(v[i].grid(), u[i].grid(), "a-posteriori error");
    const double nu = field_norm(u[i]);
    if (nu == 0.0) throw ConfigError("a-posteriori error: reference state " + std::to_string(i) + " is zero");
    s += field_norm(v[i] - u[i]) / nu;
  }
  return s / static_cast<double>(v.size());
}

template <class T>
double divergence_rms(const VectorField<T>& v) {
  const ScalarField<T> d = divergence(v);
  double s = 0.0;
  for (T x : d.values()) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s / static_cast<double>(d.values().size()));
}

#define SGLES_INSTANTIATE(T)                                                                                   \
  template VectorField<T> closure_term<T>(const VectorField<T>&, const LESModel&, const StageContext&);        \
  template VectorField<T> les_rhs<T>(const VectorField<T>&, const LESModel&, const StageContext&);             \
  template VectorField<T> les_step<T>(const VectorField<T>&, double, const LESModel&, std::int64_t);           \
  template LESTrajectory<T> run_les<T>(const VectorField<T>&, const LESModel&, const StepControl&, double,     \
                                       const StepObserver<T>&, std::int64_t);                                  \
  template double aposteriori_error<T>(const std::vector<VectorField<T>>&, const std::vector<VectorField<T>>&); \
  template double divergence_rms<T>(const VectorField<T>&);

SGLES_INSTANTIATE(float)
SGLES_INSTANTIATE(double)
#undef SGLES_INSTANTIATE

namespace ad {

Var les_rhs(Tape& t, Var v, Var theta, const LESModel& m) {
  if (m.closure != ClosureKind::none && m.closure != ClosureKind::cnn) {
    throw ConfigError(std::string("no differentiable form for the ") + closure_name(m.closure) + " closure");
  }
  const Grid g = t.node(v).grid;
  Var f = add(t, convection(t, v), diffusion(t, v, m.flow.nu));
  if (m.flow.force.kind != ForceKind::none) f = add(t, f, t.constant(body_force<double>(g, m.flow.force)));
  if (m.closure == ClosureKind::none) return project(t, f);
  const Var c = cnn(t, v, theta, m.cnn);
  return m.formulation == Formulation::DCF ? project(t, add(t, f, c)) : add(t, project(t, f), c);
}

Var les_step(Tape& t, Var v, Var theta, double dt, const LESModel& m) {
  const RKTableau& tab = m.tableau;
  std::vector<Var> k;
  for (int i = 0; i < tab.stages; ++i) {
    Var ui = v;
    for (int j = 0; j < i; ++j) {
      const double a = tab.coeff(i, j);
      if (a != 0.0) ui = axpy(t, ui, dt * a, k[static_cast<std::size_t>(j)]);
    }
    k.push_back(les_rhs(t, ui, theta, m));
  }
  Var out = v;
  for (int i = 0; i < tab.stages; ++i) {
    const double b = tab.b[static_cast<std::size_t>(i)];
    if (b != 0.0) out = axpy(t, out, dt * b, k[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace ad

}  // namespace sgles
