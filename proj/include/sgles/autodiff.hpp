#pragma once

// Reverse-mode differentiation over field-level primitives (64-bit only).
//
// A Tape records each primitive with its output value and a pullback that
// accumulates input adjoints. Linear solver steps (Poisson solve, projection)
// are single primitives whose pullback reuses the forward solver, since the
// operators are symmetric on a uniform grid. Nodes that do not depend on a
// differentiable leaf are stored as constants without a pullback.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgles/closure.hpp"
#include "sgles/filters.hpp"
#include "sgles/grid.hpp"

namespace sgles::ad {

enum class Kind { scalar, vector, cell, channels, flat };

struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  using Pullback = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    const char* op = "";
    Kind kind = Kind::flat;
    Grid grid;
    int channels = 0;
    bool requires_grad = false;
    std::vector<double> value;
    std::vector<double> adj;
    std::vector<Var> inputs;
    Pullback pullback;
    std::string label;
  };

  // Differentiable leaf.
  Var leaf(std::span<const double> values, Kind kind = Kind::flat, const Grid& grid = {}, int channels = 0);
  Var constant(std::span<const double> values, Kind kind = Kind::flat, const Grid& grid = {}, int channels = 0);
  Var constant(const VectorField<double>& u) { return constant(u.flat(), Kind::vector, u.grid()); }

  // Records a primitive output. The pullback is kept only when an input
  // requires a gradient; recording without one in that case throws.
  Var record(const char* op, Kind kind, const Grid& grid, int channels, std::vector<double> value,
             std::vector<Var> inputs, Pullback pullback);

  const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }
  Node& node_at(std::size_t i) { return nodes_[i]; }
  const std::vector<double>& value(Var v) const { return node(v).value; }
  double scalar(Var v) const;
  VectorField<double> vector_value(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  // Zero-initialised on first use.
  std::vector<double>& adjoint(Var v);
  // Adjoint after backward(); zeros if the node was not reached.
  std::vector<double> gradient(Var v) const;

  // Seeds d loss / d loss = 1 and runs every pullback in reverse order.
  // Throws NumericalError naming the primitive and label on non-finite adjoints.
  void backward(Var loss);

  // Label attached to subsequently recorded nodes (e.g. "step 3 stage 2").
  void set_label(std::string label) { label_ = std::move(label); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t stored_doubles() const;

 private:
  std::vector<Node> nodes_;
  std::string label_;
};

// Arithmetic on equally shaped nodes.
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
// a + s b
Var axpy(Tape& t, Var a, double s, Var b);
Var tanh(Tape& t, Var a);
// sum of squares (scalar result)
Var sum_squares(Tape& t, Var a);
// sum_i a_i w_i with a constant weight vector (scalar result)
Var dot_const(Tape& t, Var a, std::span<const double> w);
Var scalar_add(Tape& t, Var a, Var b);

// Field operators.
Var divergence(Tape& t, Var u);
Var gradient(Tape& t, Var p);
Var convection(Tape& t, Var u);
Var diffusion(Tape& t, Var u, double nu);
Var poisson(Tape& t, Var b);
Var project(Tape& t, Var u);
Var filter(Tape& t, Var u, const CoarseningMap& map, FilterKind kind);

// CNN pieces. `theta` is the flat parameter node; layer l reads theta[offset ...].
Var collocate(Tape& t, Var u);
Var decollocate(Tape& t, Var w);
Var conv(Tape& t, Var x, Var theta, const ConvLayer& layer, std::size_t offset,
         std::shared_ptr<const ShiftTable> shifts);
Var cnn(Tape& t, Var u, Var theta, const ClosureParams& layout);

struct ValueAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// Builds loss = f(tape, theta_leaf) and returns it with d loss / d theta.
ValueAndGrad value_and_grad(const std::function<Var(Tape&, Var)>& f, std::span<const double> theta);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(std::size_t n);
// Bias-corrected Adam update without weight decay.
void adam_step(std::span<double> theta, std::span<const double> grad, AdamState& state, double lr);

// lr_end + (lr_start - lr_end) (1 + cos(pi iter / total)) / 2
double cosine_lr(std::int64_t iter, std::int64_t total, double lr_start, double lr_end);

}  // namespace sgles::ad
