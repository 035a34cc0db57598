#pragma once

// Run configuration (TOML). Every section and key is optional; anything not
// listed below is rejected.
//
//   [grid]      dim, dns_cells, length
//   [flow]      reynolds, force ("none" | "kolmogorov"), force_amplitude, force_wavenumber
//   [ic]        peak_wavenumber, seeds
//   [time]      scheme, t_burn, t_end, cfl_sigma
//   [filters]   kinds, coarse_cells
//   [dataset]   dir, stride, splits, split_seed, precision (32 | 64)
//   [closure]   kind, hidden, radius, init_seed, params, smagorinsky_theta
//   [training]  loss, coarse_cells, filter, batch_size, iterations, n_unroll, lr_start, lr_end,
//               seed, validate_every, formulation, clip_norm, max_validation_samples,
//               smagorinsky_max_windows
//   [les]       formulation, closure, coarse_cells, filter, split, trajectory, steps, t_end,
//               save_every
//   [analysis]  input, ratio
//
// Relative paths are resolved against the directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sgles/analysis.hpp"
#include "sgles/closure.hpp"
#include "sgles/les.hpp"
#include "sgles/pipeline.hpp"
#include "sgles/training.hpp"

namespace sgles {

struct ClosureSection {
  ClosureKind kind = ClosureKind::cnn;
  std::vector<int> hidden{24, 24, 24, 24};
  int radius = 2;
  std::uint64_t init_seed = 0;
  std::filesystem::path params;  // CNP1 file; empty means fresh initialization
  double smagorinsky_theta = 0.0;

  CNNArchitecture architecture(int dim) const;
};

struct TrainingSection {
  TrainConfig train;
  std::int64_t coarse_cells = 32;
  FilterKind filter = FilterKind::FA;
  std::size_t smagorinsky_max_windows = 0;
};

struct LesSection {
  Formulation formulation = Formulation::DCF;
  ClosureKind closure = ClosureKind::cnn;
  std::int64_t coarse_cells = 32;
  FilterKind filter = FilterKind::FA;
  Split split = Split::test;
  int trajectory = 0;
  std::int64_t steps = 50;
  double t_end = 0.0;  // > 0 overrides `steps` (rounded to whole snapshot intervals)
  std::int64_t save_every = 0;
};

struct AnalysisSection {
  std::filesystem::path input;  // an SGF1 file or a directory of them
  double ratio = kGoldenRatio;
};

struct RunConfig {
  DatasetConfig dataset;
  std::filesystem::path dataset_dir = "data";
  std::optional<std::uint64_t> split_seed;
  ClosureSection closure;
  TrainingSection training;
  LesSection les;
  AnalysisSection analysis;
};

// Command-line overrides. A seed replaces the trajectory seeds by
// seed, seed + 1, ... and also sets the training and CNN init seeds. A loss
// kind selects that loss's defaults before [training] is read.
struct ConfigOverrides {
  std::optional<LossKind> loss;
  std::optional<std::uint64_t> seed;
  std::optional<Precision> precision;
};

// Throws ConfigError on syntax errors, unknown keys, wrong types or values
// that fail validation.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {},
                       const ConfigOverrides& over = {});
RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& over = {});

// Cross-section checks (dataset, training and closure consistency).
void validate(const RunConfig& c);

// Fully resolved TOML with every key spelled out; parse_config(to_toml(c))
// reproduces `c`.
std::string to_toml(const RunConfig& c);

}  // namespace sgles
