#pragma once

// Dataset generation and persistence.
//
// Field files ("SGF1", little endian):
//   char[4] "SGF1" | u8 kind (0 scalar, 1 vector) | u8 dim | u8 precision (32|64)
//   | u64 cells[dim] | f64 box length[dim] | payload
// The payload holds one block per component, each in grid order (first axis
// fastest). A dataset directory holds a JSON manifest plus one file per
// (trajectory, coarse grid, filter, snapshot, quantity).

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgles/filters.hpp"
#include "sgles/grid.hpp"
#include "sgles/operators.hpp"

namespace sgles {

enum class FieldKind : std::uint8_t { scalar = 0, vector = 1 };

struct FieldHeader {
  FieldKind kind = FieldKind::vector;
  int dim = 2;
  Precision precision = Precision::f64;
  std::array<std::int64_t, 3> cells{1, 1, 1};
  std::array<double, 3> lengths{1, 1, 1};

  Grid grid() const;
  std::size_t header_bytes() const { return 7 + 16 * static_cast<std::size_t>(dim); }
  std::size_t payload_bytes() const;
};

template <class T>
void save_field(const VectorField<T>& f, const std::filesystem::path& path);
template <class T>
void save_field(const ScalarField<T>& f, const std::filesystem::path& path);

FieldHeader read_field_header(const std::filesystem::path& path);
// Values are converted to T when the stored precision differs.
template <class T>
VectorField<T> load_vector_field(const std::filesystem::path& path);
template <class T>
ScalarField<T> load_scalar_field(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t state = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);

enum class Split { train, valid, test };
const char* split_name(Split s);

struct DatasetConfig {
  int dim = 2;
  std::int64_t dns_cells = 256;
  double length = 1.0;
  double reynolds = 2000.0;  // nu = length / Re at unit velocity scale
  BodyForceSpec force{ForceKind::kolmogorov, 5.0, 4};
  double peak_wavenumber = 10.0;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  double t_burn = 0.5;
  double t_end = 1.0;
  // Snapshots every `stride` fixed steps after burn-in; 0 keeps only t_end.
  std::int64_t stride = 10;
  double cfl_sigma = 0.85;
  std::string scheme = "wray3";
  std::vector<std::int64_t> coarse_cells{32};
  std::vector<FilterKind> filters{FilterKind::FA, FilterKind::VA};
  Precision precision = Precision::f64;
  std::array<int, 3> split_counts{2, 1, 1};

  FlowParams flow() const;
  Grid dns_grid() const;
};

void validate(const DatasetConfig& c);

struct SnapshotFiles {
  std::string ubar;
  std::string c;
  std::uint64_t ubar_fnv = 0;
  std::uint64_t c_fnv = 0;
};

struct SeriesIndex {
  std::int64_t coarse_cells = 0;
  FilterKind filter = FilterKind::FA;
  std::vector<SnapshotFiles> snapshots;
};

struct TrajectoryIndex {
  std::uint64_t seed = 0;
  Split split = Split::train;
  std::vector<double> times;
  std::vector<SeriesIndex> series;
};

struct DatasetManifest {
  int schema = 1;
  DatasetConfig config;
  double dns_dt = 0.0;       // fixed DNS step after burn-in
  double snapshot_dt = 0.0;  // stride * dns_dt (t_end - t_burn when stride = 0)
  std::vector<TrajectoryIndex> trajectories;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

using ProgressFn = std::function<void(const std::string&)>;

// Runs the DNS for every seed and writes snapshot files and `manifest.json`
// under `dir`. On failure everything written is removed again.
DatasetManifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& dir, int workers = 1,
                                 const ProgressFn& progress = {});

// Trajectory-level split with the given counts. Without a seed the
// trajectories are assigned in order (first train, then valid, then test);
// with a seed the order is shuffled first.
DatasetManifest split_dataset(const DatasetManifest& m, std::array<int, 3> counts,
                              std::optional<std::uint64_t> shuffle_seed = std::nullopt);

struct TrajectoryData {
  std::uint64_t seed = 0;
  Split split = Split::train;
  std::vector<double> times;
  std::vector<VectorField<double>> ubar;
  std::vector<VectorField<double>> c;
};

struct Dataset {
  Grid coarse;
  FilterKind filter = FilterKind::FA;
  FlowParams flow;
  std::string scheme = "wray3";
  double snapshot_dt = 0.0;
  std::vector<TrajectoryData> trajectories;

  std::vector<const TrajectoryData*> split(Split s) const;
};

// Loads one (coarse grid, filter) series in 64-bit; checksums are verified.
Dataset load_dataset(const std::filesystem::path& dir, std::int64_t coarse_cells, FilterKind filter);

}  // namespace sgles
