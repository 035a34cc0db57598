#include "sgles/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "sgles/operators.hpp"

namespace sgles::ad {

namespace {

void accumulate(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

void require_same_shape(const Tape& t, Var a, Var b, const char* op) {
  const auto& na = t.node(a);
  const auto& nb = t.node(b);
  if (na.value.size() != nb.value.size() || na.kind != nb.kind) {
    throw ConfigError(std::string(op) + ": operands have different shapes");
  }
}

void require_kind(const Tape& t, Var a, Kind k, const char* op) {
  if (t.node(a).kind != k) throw ConfigError(std::string(op) + ": unexpected operand kind");
}

VectorField<double> vec(const Tape& t, Var v) { return VectorField<double>(t.node(v).grid, t.value(v)); }
VectorField<double> vec_of(const Grid& g, const std::vector<double>& v) { return VectorField<double>(g, v); }
ScalarField<double> cell_of(const Grid& g, const std::vector<double>& v) { return ScalarField<double>(g, v); }

Channels chan(const Tape& t, Var v) {
  const auto& n = t.node(v);
  Channels c;
  c.grid = n.grid;
  c.count = n.channels;
  c.v = n.value;
  return c;
}

}  // namespace

Var Tape::leaf(std::span<const double> values, Kind kind, const Grid& grid, int channels) {
  Node n;
  n.op = "leaf";
  n.kind = kind;
  n.grid = grid;
  n.channels = channels;
  n.requires_grad = true;
  n.value.assign(values.begin(), values.end());
  n.label = label_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::constant(std::span<const double> values, Kind kind, const Grid& grid, int channels) {
  Node n;
  n.op = "constant";
  n.kind = kind;
  n.grid = grid;
  n.channels = channels;
  n.value.assign(values.begin(), values.end());
  n.label = label_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::record(const char* op, Kind kind, const Grid& grid, int channels, std::vector<double> value,
                 std::vector<Var> inputs, Pullback pullback) {
  Node n;
  n.op = op;
  n.kind = kind;
  n.grid = grid;
  n.channels = channels;
  for (Var v : inputs) {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) throw ConfigError(std::string(op) + ": bad input");
    n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(v.id)].requires_grad;
  }
  if (n.requires_grad) {
    if (!pullback) throw ConfigError(std::string("primitive '") + op + "' has no registered pullback");
    n.pullback = std::move(pullback);
    n.inputs = std::move(inputs);
  }
  n.value = std::move(value);
  n.label = label_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

double Tape::scalar(Var v) const {
  const auto& n = node(v);
  if (n.kind != Kind::scalar) throw ConfigError("node is not a scalar");
  return n.value[0];
}

VectorField<double> Tape::vector_value(Var v) const {
  require_kind(*this, v, Kind::vector, "vector_value");
  return vec(*this, v);
}

std::vector<double>& Tape::adjoint(Var v) {
  Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (n.adj.empty()) n.adj.assign(n.value.size(), 0.0);
  return n.adj;
}

std::vector<double> Tape::gradient(Var v) const {
  const Node& n = node(v);
  return n.adj.empty() ? std::vector<double>(n.value.size(), 0.0) : n.adj;
}

std::size_t Tape::stored_doubles() const {
  std::size_t s = 0;
  for (const Node& n : nodes_) s += n.value.size() + n.adj.size();
  return s;
}

void Tape::backward(Var loss) {
  if (node(loss).kind != Kind::scalar) throw ConfigError("backward needs a scalar loss");
  for (Node& n : nodes_) n.adj.clear();
  adjoint(loss)[0] = 1.0;
  for (std::size_t i = static_cast<std::size_t>(loss.id) + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.adj.empty() || !n.pullback) continue;
    if (!all_finite<double>(n.adj)) {
      throw NumericalError(std::string("non-finite adjoint at primitive '") + n.op + "'" +
                           (n.label.empty() ? "" : " (" + n.label + ")"));
    }
    n.pullback(*this, i);
  }
}

Var add(Tape& t, Var a, Var b) {
  require_same_shape(t, a, b, "add");
  const auto& na = t.node(a);
  std::vector<double> v = na.value;
  accumulate(v, t.value(b));
  return t.record("add", na.kind, na.grid, na.channels, std::move(v), {a, b}, [a, b](Tape& tp, std::size_t s) {
    const auto g = tp.node_at(s).adj;
    if (tp.requires_grad(a)) accumulate(tp.adjoint(a), g);
    if (tp.requires_grad(b)) accumulate(tp.adjoint(b), g);
  });
}

Var sub(Tape& t, Var a, Var b) { return axpy(t, a, -1.0, b); }

Var scale(Tape& t, Var a, double s) {
  const auto& na = t.node(a);
  std::vector<double> v = na.value;
  for (double& x : v) x *= s;
  return t.record("scale", na.kind, na.grid, na.channels, std::move(v), {a}, [a, s](Tape& tp, std::size_t self) {
    const auto& g = tp.node_at(self).adj;
    auto& ga = tp.adjoint(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var axpy(Tape& t, Var a, double s, Var b) {
  require_same_shape(t, a, b, "axpy");
  const auto& na = t.node(a);
  std::vector<double> v = na.value;
  const auto& vb = t.value(b);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += s * vb[i];
  return t.record("axpy", na.kind, na.grid, na.channels, std::move(v), {a, b}, [a, s, b](Tape& tp, std::size_t self) {
    const auto g = tp.node_at(self).adj;
    if (tp.requires_grad(a)) accumulate(tp.adjoint(a), g);
    if (tp.requires_grad(b)) {
      auto& gb = tp.adjoint(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += s * g[i];
    }
  });
}

Var tanh(Tape& t, Var a) {
  const auto& na = t.node(a);
  std::vector<double> v = na.value;
  for (double& x : v) x = std::tanh(x);
  return t.record("tanh", na.kind, na.grid, na.channels, std::move(v), {a}, [a](Tape& tp, std::size_t self) {
    const auto& n = tp.node_at(self);
    auto& ga = tp.adjoint(a);
    for (std::size_t i = 0; i < n.adj.size(); ++i) ga[i] += n.adj[i] * (1.0 - n.value[i] * n.value[i]);
  });
}

Var sum_squares(Tape& t, Var a) {
  double s = 0.0;
  for (double x : t.value(a)) s += x * x;
  return t.record("sum_squares", Kind::scalar, {}, 0, {s}, {a}, [a](Tape& tp, std::size_t self) {
    const double g = tp.node_at(self).adj[0];
    const auto& x = tp.value(a);
    auto& ga = tp.adjoint(a);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * g * x[i];
  });
}

Var dot_const(Tape& t, Var a, std::span<const double> w) {
  const auto& x = t.value(a);
  if (w.size() != x.size()) throw ConfigError("dot_const: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w[i];
  std::vector<double> wc(w.begin(), w.end());
  return t.record("dot_const", Kind::scalar, {}, 0, {s}, {a}, [a, wc = std::move(wc)](Tape& tp, std::size_t self) {
    const double g = tp.node_at(self).adj[0];
    auto& ga = tp.adjoint(a);
    for (std::size_t i = 0; i < wc.size(); ++i) ga[i] += g * wc[i];
  });
}

Var scalar_add(Tape& t, Var a, Var b) {
  require_kind(t, a, Kind::scalar, "scalar_add");
  return add(t, a, b);
}

Var divergence(Tape& t, Var u) {
  require_kind(t, u, Kind::vector, "divergence");
  const Grid g = t.node(u).grid;
  auto v = sgles::divergence(vec(t, u)).release();
  return t.record("divergence", Kind::cell, g, 0, std::move(v), {u}, [u, g](Tape& tp, std::size_t self) {
    // D^T = -G
    const auto gp = pressure_gradient(cell_of(g, tp.node_at(self).adj));
    auto& gu = tp.adjoint(u);
    const auto f = gp.flat();
    for (std::size_t i = 0; i < f.size(); ++i) gu[i] -= f[i];
  });
}

Var gradient(Tape& t, Var p) {
  require_kind(t, p, Kind::cell, "gradient");
  const Grid g = t.node(p).grid;
  auto v = pressure_gradient(cell_of(g, t.value(p))).release();
  return t.record("gradient", Kind::vector, g, 0, std::move(v), {p}, [p, g](Tape& tp, std::size_t self) {
    const auto d = sgles::divergence(vec_of(g, tp.node_at(self).adj));
    auto& gp = tp.adjoint(p);
    const auto f = d.values();
    for (std::size_t i = 0; i < f.size(); ++i) gp[i] -= f[i];
  });
}

Var convection(Tape& t, Var u) {
  require_kind(t, u, Kind::vector, "convection");
  const Grid g = t.node(u).grid;
  auto v = sgles::convection(vec(t, u)).release();
  return t.record("convection", Kind::vector, g, 0, std::move(v), {u}, [u, g](Tape& tp, std::size_t self) {
    VectorField<double> gu(g);
    convection_vjp(vec(tp, u), vec_of(g, tp.node_at(self).adj), gu);
    accumulate(tp.adjoint(u), gu.flat());
  });
}

Var diffusion(Tape& t, Var u, double nu) {
  require_kind(t, u, Kind::vector, "diffusion");
  const Grid g = t.node(u).grid;
  auto v = sgles::diffusion(vec(t, u), nu).release();
  return t.record("diffusion", Kind::vector, g, 0, std::move(v), {u}, [u, g, nu](Tape& tp, std::size_t self) {
    // The discrete Laplacian is symmetric.
    accumulate(tp.adjoint(u), sgles::diffusion(vec_of(g, tp.node_at(self).adj), nu).flat());
  });
}

Var poisson(Tape& t, Var b) {
  require_kind(t, b, Kind::cell, "poisson");
  const Grid g = t.node(b).grid;
  auto v = poisson_solve(cell_of(g, t.value(b))).release();
  return t.record("poisson", Kind::cell, g, 0, std::move(v), {b}, [b, g](Tape& tp, std::size_t self) {
    // L^+ is symmetric; the adjoint solve is the same solve.
    accumulate(tp.adjoint(b), poisson_solve(cell_of(g, tp.node_at(self).adj)).values());
  });
}

Var project(Tape& t, Var u) {
  require_kind(t, u, Kind::vector, "project");
  const Grid g = t.node(u).grid;
  auto v = sgles::project(vec(t, u)).release();
  return t.record("project", Kind::vector, g, 0, std::move(v), {u}, [u, g](Tape& tp, std::size_t self) {
    // P is an orthogonal projector on a uniform grid.
    accumulate(tp.adjoint(u), sgles::project(vec_of(g, tp.node_at(self).adj)).flat());
  });
}

Var filter(Tape& t, Var u, const CoarseningMap& map, FilterKind kind) {
  require_kind(t, u, Kind::vector, "filter");
  require_same_grid(t.node(u).grid, map.fine, "filter");
  auto v = apply_filter(vec(t, u), map, kind).release();
  return t.record("filter", Kind::vector, map.coarse, 0, std::move(v), {u}, [u, map, kind](Tape& tp, std::size_t self) {
    accumulate(tp.adjoint(u), apply_filter_transpose(vec_of(map.coarse, tp.node_at(self).adj), map, kind).flat());
  });
}

Var collocate(Tape& t, Var u) {
  require_kind(t, u, Kind::vector, "collocate");
  const Grid g = t.node(u).grid;
  Channels c = sgles::collocate(vec(t, u));
  return t.record("collocate", Kind::channels, g, c.count, std::move(c.v), {u}, [u, g](Tape& tp, std::size_t self) {
    Channels w;
    w.grid = g;
    w.count = g.dim();
    w.v = tp.node_at(self).adj;
    accumulate(tp.adjoint(u), sgles::decollocate(w).flat());
  });
}

Var decollocate(Tape& t, Var w) {
  require_kind(t, w, Kind::channels, "decollocate");
  const Grid g = t.node(w).grid;
  auto v = sgles::decollocate(chan(t, w)).release();
  return t.record("decollocate", Kind::vector, g, 0, std::move(v), {w}, [w, g](Tape& tp, std::size_t self) {
    accumulate(tp.adjoint(w), decollocate_transpose(vec_of(g, tp.node_at(self).adj)).v);
  });
}

Var conv(Tape& t, Var x, Var theta, const ConvLayer& layer, std::size_t offset,
         std::shared_ptr<const ShiftTable> shifts) {
  require_kind(t, x, Kind::channels, "conv");
  const std::size_t np = layer_param_count(layer, t.node(x).grid.dim());
  if (offset + np > t.value(theta).size()) throw ConfigError("conv: parameter slice out of range");
  const Grid g = t.node(x).grid;
  const std::span<const double> p = std::span<const double>(t.value(theta)).subspan(offset, np);
  Channels y = conv_forward(chan(t, x), layer, p, *shifts);
  return t.record("conv", Kind::channels, g, layer.cout, std::move(y.v), {x, theta},
                  [x, theta, layer, offset, np, shifts, g](Tape& tp, std::size_t self) {
                    Channels gy;
                    gy.grid = g;
                    gy.count = layer.cout;
                    gy.v = tp.node_at(self).adj;
                    const std::vector<double> pv(tp.value(theta).begin() + static_cast<std::ptrdiff_t>(offset),
                                                 tp.value(theta).begin() + static_cast<std::ptrdiff_t>(offset + np));
                    std::vector<double> gp(np, 0.0);
                    Channels gx(g, layer.cin);
                    const bool need_x = tp.requires_grad(x);
                    conv_backward(chan(tp, x), layer, pv, *shifts, gy, need_x ? &gx : nullptr, gp);
                    if (need_x) accumulate(tp.adjoint(x), gx.v);
                    if (tp.requires_grad(theta)) {
                      auto& gt = tp.adjoint(theta);
                      for (std::size_t i = 0; i < np; ++i) gt[offset + i] += gp[i];
                    }
                  });
}

Var cnn(Tape& t, Var u, Var theta, const ClosureParams& layout) {
  const Grid g = t.node(u).grid;
  if (layout.arch.dim != g.dim()) throw ConfigError("cnn: architecture dimension does not match the field");
  if (t.value(theta).size() != param_count(layout.arch)) throw ConfigError("cnn: parameter length mismatch");
  Var x = collocate(t, u);
  std::shared_ptr<const ShiftTable> shifts;
  for (std::size_t l = 0; l < layout.arch.layers.size(); ++l) {
    const ConvLayer& L = layout.arch.layers[l];
    if (!shifts || shifts->radius != L.radius) shifts = std::make_shared<const ShiftTable>(make_shift_table(g, L.radius));
    x = conv(t, x, theta, L, layout.offsets[l], shifts);
    if (L.act == Activation::tanh) x = tanh(t, x);
  }
  return decollocate(t, x);
}

ValueAndGrad value_and_grad(const std::function<Var(Tape&, Var)>& f, std::span<const double> theta) {
  Tape t;
  const Var p = t.leaf(theta);
  const Var loss = f(t, p);
  ValueAndGrad r;
  r.value = t.scalar(loss);
  if (!std::isfinite(r.value)) throw NumericalError("non-finite loss value");
  t.backward(loss);
  r.grad = t.gradient(p);
  return r;
}

AdamState make_adam(std::size_t n) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

void adam_step(std::span<double> theta, std::span<const double> grad, AdamState& s, double lr) {
  if (grad.size() != theta.size() || s.m.size() != theta.size()) throw ConfigError("adam_step: length mismatch");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    theta[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + s.eps);
  }
}

double cosine_lr(std::int64_t iter, std::int64_t total, double lr_start, double lr_end) {
  if (total <= 0) return lr_start;
  if (iter < 0 || iter > total) throw ConfigError("cosine_lr: iteration outside [0, total]");
  const double x = static_cast<double>(iter) / static_cast<double>(total);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * x));
}

}  // namespace sgles::ad
