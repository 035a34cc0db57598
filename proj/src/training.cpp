#include "sgles/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>

#include "parallel.hpp"
#include "sgles/random.hpp"

namespace sgles {

const char* loss_name(LossKind k) { return k == LossKind::prior ? "prior" : "post"; }

LossKind parse_loss(const std::string& s) {
  if (s == "prior") return LossKind::prior;
  if (s == "post") return LossKind::post;
  throw ConfigError("unknown loss '" + s + "' (expected prior or post)");
}

TrainConfig default_train_config(LossKind k) {
  TrainConfig c;
  c.loss = k;
  if (k == LossKind::post) {
    c.batch_size = 1;
    c.iterations = 100;
    c.lr_start = 1e-4;
  }
  return c;
}

void validate(const TrainConfig& c) {
  if (c.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (c.iterations < 0) throw ConfigError("iteration budget must be >= 0");
  if (c.n_unroll < 1) throw ConfigError("n_unroll must be >= 1");
  if (!(c.lr_start > 0.0 && c.lr_end > 0.0)) throw ConfigError("learning rates must be positive");
  if (c.validate_every < 1) throw ConfigError("validation cadence must be >= 1");
  if (c.workers < 1) throw ConfigError("worker count must be >= 1");
  if (!(c.clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
}

namespace {

double squared_norm(const VectorField<double>& f) {
  const double n = field_norm(f);
  return n * n;
}

double target_norm2(const PriorSample& s) {
  const double n2 = squared_norm(*s.c);
  if (!(n2 > 0.0)) throw ConfigError("a-priori loss: commutator target with zero norm");
  return n2;
}

// Evenly spaced picks of at most `cap` items out of n (all of them when cap is 0).
std::vector<std::size_t> spread(std::size_t n, std::size_t cap) {
  std::vector<std::size_t> idx;
  if (cap == 0 || cap >= n) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  for (std::size_t k = 0; k < cap; ++k) idx.push_back(k * n / cap);
  return idx;
}

}  // namespace

double loss_prior(std::span<const PriorSample> batch, const ClosureParams& p) {
  if (batch.empty()) throw ConfigError("a-priori loss: empty batch");
  double s = 0.0;
  for (const PriorSample& b : batch) {
    const double n2 = target_norm2(b);
    s += squared_norm(cnn_forward(*b.ubar, p) - *b.c) / n2;
  }
  return s / static_cast<double>(batch.size());
}

ad::ValueAndGrad loss_prior_grad(std::span<const PriorSample> batch, const ClosureParams& p, int workers) {
  if (batch.empty()) throw ConfigError("a-priori loss: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<ad::ValueAndGrad> parts(batch.size());
  detail::parallel_for(batch.size(), workers, [&](std::size_t i) {
    const PriorSample& b = batch[i];
    const double w = inv_b / target_norm2(b);
    parts[i] = ad::value_and_grad(
        [&](ad::Tape& t, ad::Var th) {
          const ad::Var m = ad::cnn(t, t.constant(*b.ubar), th, p);
          return ad::scale(t, ad::sum_squares(t, ad::sub(t, m, t.constant(*b.c))), w);
        },
        p.theta);
  });
  // Fixed summation order keeps the result independent of the worker count.
  ad::ValueAndGrad out{0.0, std::vector<double>(p.theta.size(), 0.0)};
  for (const auto& part : parts) {
    out.value += part.value;
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += part.grad[k];
  }
  return out;
}

PostLoss loss_post(std::span<const VectorField<double>> ubar, const LESModel& m, double dt, bool with_grad) {
  if (ubar.size() < 2) throw ConfigError("a-posteriori loss needs at least two states");
  validate(m);
  const std::size_t n = ubar.size() - 1;
  std::vector<double> w(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    const double n2 = squared_norm(ubar[i]);
    if (!(n2 > 0.0)) throw ConfigError("a-posteriori loss: reference state with zero norm");
    w[i] = 1.0 / (static_cast<double>(n) * n2);
  }
  PostLoss r;
  auto blow_up = [&](std::size_t step, const std::string& why) {
    r = PostLoss{kBlowUpLoss, {}, true, "rollout diverged at step " + std::to_string(step) + ": " + why};
    return r;
  };

  if (!with_grad) {
    VectorField<double> v = ubar[0];
    for (std::size_t i = 1; i <= n; ++i) {
      try {
        v = les_step(v, dt, m, static_cast<std::int64_t>(i - 1));
      } catch (const NumericalError& e) {
        return blow_up(i, e.what());
      }
      if (!all_finite<double>(v.flat())) return blow_up(i, "non-finite state");
      r.value += w[i] * squared_norm(v - ubar[i]);
    }
    if (!std::isfinite(r.value)) return blow_up(n, "non-finite loss");
    return r;
  }

  ad::Tape t;
  const ad::Var th = t.leaf(m.cnn.theta);
  ad::Var v = t.constant(ubar[0]);
  ad::Var total;
  for (std::size_t i = 1; i <= n; ++i) {
    t.set_label("unrolled step " + std::to_string(i));
    v = ad::les_step(t, v, th, dt, m);
    if (!all_finite<double>(t.value(v))) return blow_up(i, "non-finite state");
    const ad::Var term = ad::scale(t, ad::sum_squares(t, ad::sub(t, v, t.constant(ubar[i]))), w[i]);
    total = i == 1 ? term : ad::scalar_add(t, total, term);
  }
  r.value = t.scalar(total);
  if (!std::isfinite(r.value)) return blow_up(n, "non-finite loss");
  try {
    t.backward(total);
  } catch (const NumericalError& e) {
    return blow_up(n, e.what());
  }
  r.grad = t.gradient(th);
  return r;
}

LESModel dataset_model(const Dataset& d, Formulation f, const ClosureParams& p) {
  LESModel m;
  m.formulation = f;
  m.closure = ClosureKind::cnn;
  m.cnn = p;
  m.flow = d.flow;
  m.grid = d.coarse;
  m.tableau = tableau_by_name(d.scheme);
  return m;
}

namespace {

std::vector<PriorSample> prior_samples(const Dataset& d, Split s) {
  std::vector<PriorSample> out;
  for (const TrajectoryData* t : d.split(s)) {
    for (std::size_t k = 0; k < t->ubar.size(); ++k) out.push_back({&t->ubar[k], &t->c[k]});
  }
  return out;
}

struct Window {
  const TrajectoryData* traj;
  std::size_t start;
};

// Windows of n_unroll steps; `step` apart.
std::vector<Window> windows(const Dataset& d, Split s, int n_unroll, std::size_t step) {
  std::vector<Window> out;
  const auto n = static_cast<std::size_t>(n_unroll);
  for (const TrajectoryData* t : d.split(s)) {
    for (std::size_t k = 0; k + n < t->ubar.size(); k += step) out.push_back({t, k});
  }
  return out;
}

std::span<const VectorField<double>> window_states(const Window& w, int n_unroll) {
  return std::span<const VectorField<double>>(w.traj->ubar).subspan(w.start, static_cast<std::size_t>(n_unroll) + 1);
}

struct StepOutcome {
  double loss = 0.0;
  std::vector<double> grad;
  bool rejected = false;
};

using BatchFn = std::function<StepOutcome(std::span<const std::size_t>, const ClosureParams&)>;
using ValidFn = std::function<double(const ClosureParams&)>;

constexpr const char* kMetricsHeader = "iteration,lr,train_loss,valid_loss,wall_seconds\n";

void write_row(std::ostream& os, const MetricRow& r) {
  os << r.iteration << ',' << r.lr << ',' << r.train_loss << ',' << r.valid_loss << ',' << r.wall_seconds << '\n';
}

class MetricsLog {
 public:
  explicit MetricsLog(const std::filesystem::path& dir) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    os_.open(dir / "metrics.csv", std::ios::trunc);
    if (!os_) throw FormatError("cannot write " + (dir / "metrics.csv").string());
    os_ << kMetricsHeader;
    os_.precision(10);
  }
  void add(const MetricRow& r) {
    if (!os_.is_open()) return;
    write_row(os_, r);
    os_.flush();
  }

 private:
  std::ofstream os_;
};

TrainResult run_training(const ClosureParams& init, const TrainConfig& cfg, std::size_t nsamples,
                         const BatchFn& batch_fn, const ValidFn& valid_fn) {
  validate(cfg);
  if (cfg.iterations > 0 && nsamples == 0) throw ConfigError("training split provides no samples");
  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  MetricsLog log(cfg.output_dir);

  TrainResult r;
  r.params = init;
  ClosureParams cur = init;
  r.initial_valid = r.best_valid = valid_fn(cur);
  r.history.push_back({0, cfg.lr_start, nan, r.initial_valid, wall()});
  log.add(r.history.back());
  if (!cfg.output_dir.empty()) save_params(cfg.output_dir / "best.cnp", r.params);

  Xoshiro256pp rng(cfg.seed);
  std::vector<std::size_t> order(nsamples);
  std::iota(order.begin(), order.end(), 0);
  std::size_t pos = nsamples;
  auto next_sample = [&] {
    if (pos == nsamples) {
      for (std::size_t i = nsamples; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      pos = 0;
    }
    return order[pos++];
  };

  ad::AdamState adam = ad::make_adam(cur.theta.size());
  std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch_size));
  for (std::int64_t it = 1; it <= cfg.iterations; ++it) {
    const double lr = cfg.iterations > 1 ? ad::cosine_lr(it - 1, cfg.iterations - 1, cfg.lr_start, cfg.lr_end)
                                         : cfg.lr_start;
    for (auto& b : batch) b = next_sample();
    const StepOutcome out = batch_fn(batch, cur);
    if (out.rejected) {
      ++r.rejected_steps;
    } else {
      std::vector<double> g = out.grad;
      if (cfg.clip_norm > 0.0) {
        double n2 = 0.0;
        for (double x : g) n2 += x * x;
        const double n = std::sqrt(n2);
        if (n > cfg.clip_norm) {
          for (double& x : g) x *= cfg.clip_norm / n;
        }
      }
      ad::adam_step(cur.theta, g, adam, lr);
    }
    MetricRow row{it, lr, out.loss, nan, 0.0};
    if (it % cfg.validate_every == 0 || it == cfg.iterations) {
      row.valid_loss = valid_fn(cur);
      if (row.valid_loss < r.best_valid) {
        r.best_valid = row.valid_loss;
        r.best_iteration = it;
        r.params = cur;
        if (!cfg.output_dir.empty()) save_params(cfg.output_dir / "best.cnp", r.params);
      }
    }
    row.wall_seconds = wall();
    r.history.push_back(row);
    log.add(row);
  }
  return r;
}

}  // namespace

double validation_loss_prior(const Dataset& d, const ClosureParams& p, std::size_t max_samples, int workers) {
  const auto all = prior_samples(d, Split::valid);
  if (all.empty()) throw ConfigError("validation split is empty");
  const auto idx = spread(all.size(), max_samples);
  std::vector<double> part(idx.size());
  detail::parallel_for(idx.size(), workers, [&](std::size_t i) {
    part[i] = loss_prior(std::span<const PriorSample>(&all[idx[i]], 1), p);
  });
  return std::accumulate(part.begin(), part.end(), 0.0) / static_cast<double>(part.size());
}

double validation_loss_post(const Dataset& d, const LESModel& m, int n_unroll, std::size_t max_windows) {
  const auto all = windows(d, Split::valid, n_unroll, static_cast<std::size_t>(n_unroll));
  if (all.empty()) throw ConfigError("validation split is shorter than one unrolled window");
  double s = 0.0;
  const auto idx = spread(all.size(), max_windows);
  for (std::size_t i : idx) s += loss_post(window_states(all[i], n_unroll), m, d.snapshot_dt, false).value;
  return s / static_cast<double>(idx.size());
}

TrainResult train_prior(const Dataset& d, const ClosureParams& init, const TrainConfig& cfg) {
  const auto samples = prior_samples(d, Split::train);
  for (const auto& s : samples) target_norm2(s);
  const BatchFn batch_fn = [&](std::span<const std::size_t> idx, const ClosureParams& p) {
    std::vector<PriorSample> b;
    for (std::size_t i : idx) b.push_back(samples[i]);
    auto vg = loss_prior_grad(b, p, cfg.workers);
    return StepOutcome{vg.value, std::move(vg.grad), false};
  };
  const ValidFn valid_fn = [&](const ClosureParams& p) {
    return validation_loss_prior(d, p, cfg.max_validation_samples, cfg.workers);
  };
  return run_training(init, cfg, samples.size(), batch_fn, valid_fn);
}

TrainResult train_post(const Dataset& d, const ClosureParams& init, const TrainConfig& cfg) {
  validate(cfg);
  const auto samples = windows(d, Split::train, cfg.n_unroll, 1);
  const LESModel base = dataset_model(d, cfg.formulation, init);
  const BatchFn batch_fn = [&](std::span<const std::size_t> idx, const ClosureParams& p) {
    LESModel m = base;
    m.cnn = p;
    std::vector<PostLoss> parts(idx.size());
    detail::parallel_for(idx.size(), cfg.workers, [&](std::size_t i) {
      parts[i] = loss_post(window_states(samples[idx[i]], cfg.n_unroll), m, d.snapshot_dt, true);
    });
    StepOutcome out{0.0, std::vector<double>(p.theta.size(), 0.0), false};
    const double inv = 1.0 / static_cast<double>(idx.size());
    for (const PostLoss& l : parts) {
      if (l.blew_up) {
        out.rejected = true;
        out.loss = kBlowUpLoss;
        return out;
      }
      out.loss += inv * l.value;
      for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += inv * l.grad[k];
    }
    return out;
  };
  const ValidFn valid_fn = [&](const ClosureParams& p) {
    LESModel m = base;
    m.cnn = p;
    return validation_loss_post(d, m, cfg.n_unroll, cfg.max_validation_samples);
  };
  return run_training(init, cfg, samples.size(), batch_fn, valid_fn);
}

std::vector<double> default_smagorinsky_grid() {
  std::vector<double> g(301);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(i) / 1000.0;
  return g;
}

SmagorinskySearch smagorinsky_search(const Dataset& d, Formulation f, std::span<const double> candidates,
                                     int n_unroll, std::size_t max_windows) {
  if (candidates.empty()) throw ConfigError("Smagorinsky search needs candidate coefficients");
  const auto all = windows(d, Split::train, n_unroll, static_cast<std::size_t>(n_unroll));
  if (all.empty()) throw ConfigError("training split is shorter than one unrolled window");
  const auto idx = spread(all.size(), max_windows);
  LESModel m;
  m.formulation = f;
  m.closure = ClosureKind::smagorinsky;
  m.flow = d.flow;
  m.grid = d.coarse;
  m.tableau = tableau_by_name(d.scheme);

  SmagorinskySearch r;
  r.candidates.assign(candidates.begin(), candidates.end());
  r.loss = std::numeric_limits<double>::infinity();
  r.theta = std::numeric_limits<double>::infinity();
  for (double theta : candidates) {
    m.smagorinsky_theta = theta;
    double s = 0.0;
    for (std::size_t i : idx) s += loss_post(window_states(all[i], n_unroll), m, d.snapshot_dt, false).value;
    s /= static_cast<double>(idx.size());
    r.losses.push_back(s);
    if (s < r.loss || (s == r.loss && theta < r.theta)) {
      r.loss = s;
      r.theta = theta;
    }
  }
  return r;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os.precision(10);
  os << kMetricsHeader;
  for (const auto& r : rows) write_row(os, r);
}

}  // namespace sgles
