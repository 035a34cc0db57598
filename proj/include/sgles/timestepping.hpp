#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgles/grid.hpp"
#include "sgles/operators.hpp"

namespace sgles {

// Explicit Butcher tableau; a is s x s row-major, strictly lower triangular.
struct RKTableau {
  std::string name;
  int stages = 0;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;

  double coeff(int i, int j) const { return a[static_cast<std::size_t>(i * stages + j)]; }
};

RKTableau wray3_tableau();
RKTableau rk4_tableau();
// "wray3" or "rk4"; throws ConfigError otherwise.
RKTableau tableau_by_name(const std::string& name);

enum class StepMode { fixed, cfl };

struct StepControl {
  StepMode mode = StepMode::cfl;
  double dt = 1e-3;
  double sigma = 0.85;
  std::int64_t max_steps = 10'000'000;
};

void validate(const StepControl& c);

template <class T>
using RhsFn = std::function<VectorField<T>(const VectorField<T>&)>;
// Called with (stage index, stage input) before each right-hand side evaluation.
template <class T>
using StageHook = std::function<void(int, const VectorField<T>&)>;

// u + dt * sum b_i k_i with k_i = rhs(u + dt sum_j a_ij k_j), each k_i
// projected when requested. Throws NumericalError on non-finite stages.
template <class T>
VectorField<T> rk_step(const VectorField<T>& u, double dt, const RKTableau& tab, const RhsFn<T>& rhs,
                       bool project_each_stage, const StageHook<T>& hook = {});

// sigma * min( min_a h_a / (max|u^a| + 1e-12), min_a h_a^2 / (2 d nu) )
template <class T>
double cfl_dt(const VectorField<T>& u, const FlowParams& params, double sigma);

template <class T>
using StepObserver = std::function<void(std::int64_t step, double t, const VectorField<T>& u)>;

template <class T>
struct IntegrationResult {
  VectorField<T> u;
  std::int64_t steps = 0;
  double t = 0.0;
};

// Projects u0, then advances P F(u) to t_end; the final step is clamped to
// land on t_end. The observer also sees the initial state as step 0.
template <class T>
IntegrationResult<T> integrate(const VectorField<T>& u0, double t_end, const StepControl& control,
                               const RKTableau& tab, const FlowParams& params,
                               const StepObserver<T>& observer = {});

}  // namespace sgles
