#pragma once

// Closure training.
//
//   prior:  mean over a batch of |m(ubar) - c|^2 / |c|^2
//   post:   (1/n) sum_{i=1..n} |v_i - ubar_i|^2 / |ubar_i|^2,  v_0 = ubar_0,
//           v_{i+1} = one LES step of the chosen formulation
//
// One iteration consumes one batch; batches are cut from seeded shuffles of
// the training split. Every `validate_every` iterations the validation loss
// is evaluated and the best parameters so far are kept.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sgles/autodiff.hpp"
#include "sgles/closure.hpp"
#include "sgles/les.hpp"
#include "sgles/pipeline.hpp"

namespace sgles {

enum class LossKind { prior, post };
const char* loss_name(LossKind k);
LossKind parse_loss(const std::string& s);

// Returned in place of a diverged rollout loss; the step is rejected.
inline constexpr double kBlowUpLoss = 1e6;

struct TrainConfig {
  LossKind loss = LossKind::prior;
  int batch_size = 64;
  std::int64_t iterations = 500;
  int n_unroll = 50;
  double lr_start = 1e-3;
  double lr_end = 1e-6;
  std::uint64_t seed = 0;
  std::int64_t validate_every = 20;
  Formulation formulation = Formulation::DCF;
  // Rescales the gradient to this 2-norm when it is larger; 0 disables.
  double clip_norm = 0.0;
  // Caps the validation set (evenly spaced picks); 0 uses all of it.
  std::size_t max_validation_samples = 0;
  int workers = 1;
  // When set: metrics.csv and best.cnp are written here.
  std::filesystem::path output_dir;
};

// Desk defaults: prior 500 iterations of 64 pairs, lr 1e-3 -> 1e-6;
// post 100 iterations of one window, n_unroll 50, lr 1e-4 -> 1e-6.
TrainConfig default_train_config(LossKind k);
void validate(const TrainConfig& c);

struct PriorSample {
  const VectorField<double>* ubar = nullptr;
  const VectorField<double>* c = nullptr;
};

// Throws ConfigError on an empty batch or a zero-norm target.
double loss_prior(std::span<const PriorSample> batch, const ClosureParams& p);
ad::ValueAndGrad loss_prior_grad(std::span<const PriorSample> batch, const ClosureParams& p, int workers = 1);

struct PostLoss {
  double value = 0.0;
  std::vector<double> grad;  // empty unless requested
  bool blew_up = false;
  std::string diagnostic;
};

// `ubar` holds n_unroll + 1 consecutive filtered states spaced by dt. The
// gradient (with respect to the CNN parameters of `m`) is only available for
// the none and cnn closures.
PostLoss loss_post(std::span<const VectorField<double>> ubar, const LESModel& m, double dt, bool with_grad);

struct MetricRow {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double valid_loss = 0.0;  // NaN when not evaluated at this iteration
  double wall_seconds = 0.0;
};

struct TrainResult {
  ClosureParams params;
  double initial_valid = 0.0;
  double best_valid = 0.0;
  std::int64_t best_iteration = 0;
  std::int64_t rejected_steps = 0;
  std::vector<MetricRow> history;
};

// LES model on the dataset's coarse grid with the given closure parameters.
LESModel dataset_model(const Dataset& d, Formulation f, const ClosureParams& p);

double validation_loss_prior(const Dataset& d, const ClosureParams& p, std::size_t max_samples, int workers = 1);
double validation_loss_post(const Dataset& d, const LESModel& m, int n_unroll, std::size_t max_windows);

TrainResult train_prior(const Dataset& d, const ClosureParams& init, const TrainConfig& cfg);
// Adam starts from a fresh state regardless of how `init` was obtained.
TrainResult train_post(const Dataset& d, const ClosureParams& init, const TrainConfig& cfg);

std::vector<double> default_smagorinsky_grid();

struct SmagorinskySearch {
  double theta = 0.0;
  double loss = 0.0;
  std::vector<double> candidates;
  std::vector<double> losses;
};

// Mean trajectory loss over training windows for every candidate; ties go to
// the smaller coefficient.
SmagorinskySearch smagorinsky_search(const Dataset& d, Formulation f, std::span<const double> candidates,
                                     int n_unroll, std::size_t max_windows = 0);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

}  // namespace sgles
