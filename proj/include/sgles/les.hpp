#pragma once

// Coarse-grid LES models.
//
//   DIF:  dv/dt = P F(v) + m(v)          closure added after the projection
//   DCF:  dv/dt = P (F(v) + m(v))        closure inside the projection
//
// With no closure the two coincide. DIF is stepped without any extra
// projection so its divergence drift stays observable.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgles/autodiff.hpp"
#include "sgles/closure.hpp"
#include "sgles/grid.hpp"
#include "sgles/operators.hpp"
#include "sgles/timestepping.hpp"

namespace sgles {

enum class Formulation { DIF, DCF };
enum class ClosureKind { none, smagorinsky, cnn, external };

const char* formulation_name(Formulation f);
Formulation parse_formulation(const std::string& s);
const char* closure_name(ClosureKind k);
ClosureKind parse_closure(const std::string& s);

// Context handed to an external closure: the step index and RK stage of the
// evaluation being made.
struct StageContext {
  std::int64_t step = 0;
  int stage = 0;
};

using ExternalClosure = std::function<VectorField<double>(const VectorField<double>& v, const StageContext& ctx)>;

struct LESModel {
  Formulation formulation = Formulation::DCF;
  ClosureKind closure = ClosureKind::none;
  double smagorinsky_theta = 0.0;
  ClosureParams cnn;
  ExternalClosure external;
  FlowParams flow;
  Grid grid;
  RKTableau tableau = wray3_tableau();
};

// Throws ConfigError when the closure settings do not fit the coarse grid.
void validate(const LESModel& m);

template <class T>
VectorField<T> closure_term(const VectorField<T>& v, const LESModel& m, const StageContext& ctx = {});

template <class T>
VectorField<T> les_rhs(const VectorField<T>& v, const LESModel& m, const StageContext& ctx = {});

// One RK step of the LES model; stage evaluations get (step, stage) contexts.
template <class T>
VectorField<T> les_step(const VectorField<T>& v, double dt, const LESModel& m, std::int64_t step = 0);

template <class T>
struct LESTrajectory {
  // states[0] is the initial field; further entries every `store_every` steps.
  std::vector<VectorField<T>> states;
  std::vector<double> times;
  VectorField<T> final;
  std::int64_t steps = 0;
  double t = 0.0;
  bool unstable = false;
  std::string diagnostic;
};

// Integrates to t_end, clamping the last step onto it. A non-finite state
// ends the run with unstable = true and the trajectory up to the last finite
// state.
template <class T>
LESTrajectory<T> run_les(const VectorField<T>& v0, const LESModel& m, const StepControl& control, double t_end,
                         const StepObserver<T>& observer = {}, std::int64_t store_every = 1);

// (1/n) sum_i |v_i - u_i| / |u_i| over aligned pairs.
template <class T>
double aposteriori_error(const std::vector<VectorField<T>>& v, const std::vector<VectorField<T>>& u);

// sqrt(mean_I (D v)_I^2)
template <class T>
double divergence_rms(const VectorField<T>& v);

namespace ad {

// Differentiable right-hand side; the closure must be none or cnn.
Var les_rhs(Tape& t, Var v, Var theta, const LESModel& m);
Var les_step(Tape& t, Var v, Var theta, double dt, const LESModel& m);

}  // namespace ad

}  // namespace sgles
