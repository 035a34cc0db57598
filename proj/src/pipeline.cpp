#include "sgles/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "json.hpp"
#include "parallel.hpp"
#include "sgles/initial_conditions.hpp"
#include "sgles/random.hpp"
#include "sgles/timestepping.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sgles {

// ---------------------------------------------------------------------------
// SGF1 field files

Grid FieldHeader::grid() const {
  std::array<Extent, 3> ext{};
  for (int a = 0; a < dim; ++a) ext[static_cast<std::size_t>(a)] = Extent{0.0, lengths[static_cast<std::size_t>(a)]};
  return make_grid(dim, std::span<const std::int64_t>(cells.data(), static_cast<std::size_t>(dim)),
                   std::span<const Extent>(ext.data(), static_cast<std::size_t>(dim)));
}

std::size_t FieldHeader::payload_bytes() const {
  std::size_t n = 1;
  for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(cells[static_cast<std::size_t>(a)]);
  if (kind == FieldKind::vector) n *= static_cast<std::size_t>(dim);
  return n * (precision == Precision::f32 ? 4 : 8);
}

namespace {

template <class T>
void write_field(std::ostream& os, FieldKind kind, const Grid& g, std::span<const T> values) {
  io::write_magic(os, "SGF1");
  io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(kind));
  io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(g.dim()));
  io::write_le<std::uint8_t>(os, std::is_same_v<T, float> ? 32 : 64);
  for (int a = 0; a < g.dim(); ++a) io::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(g.n(a)));
  for (int a = 0; a < g.dim(); ++a) io::write_le<double>(os, g.length(a));
  for (T v : values) io::write_le<T>(os, v);
}

FieldHeader read_header(std::istream& is, const std::string& what) {
  io::expect_magic(is, "SGF1", what);
  FieldHeader h;
  const auto kind = io::read_le<std::uint8_t>(is, what);
  if (kind > 1) throw FormatError(what + ": unknown field kind " + std::to_string(kind));
  h.kind = static_cast<FieldKind>(kind);
  h.dim = io::read_le<std::uint8_t>(is, what);
  if (h.dim != 2 && h.dim != 3) throw FormatError(what + ": unsupported dimension " + std::to_string(h.dim));
  const auto prec = io::read_le<std::uint8_t>(is, what);
  if (prec != 32 && prec != 64) throw FormatError(what + ": unsupported precision " + std::to_string(prec));
  h.precision = prec == 32 ? Precision::f32 : Precision::f64;
  for (int a = 0; a < h.dim; ++a) {
    const auto n = io::read_le<std::uint64_t>(is, what);
    if (n < 2 || n > (1u << 20)) throw FormatError(what + ": implausible axis size");
    h.cells[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(n);
  }
  for (int a = 0; a < h.dim; ++a) {
    const double len = io::read_le<double>(is, what);
    if (!(len > 0.0 && std::isfinite(len))) throw FormatError(what + ": invalid box length");
    h.lengths[static_cast<std::size_t>(a)] = len;
  }
  return h;
}

template <class T>
std::vector<T> read_payload(std::istream& is, const FieldHeader& h, const std::string& what) {
  const std::size_t n = h.payload_bytes() / (h.precision == Precision::f32 ? 4 : 8);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = h.precision == Precision::f32 ? static_cast<T>(io::read_le<float>(is, what))
                                           : static_cast<T>(io::read_le<double>(is, what));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError(what + ": trailing bytes after payload");
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is), {});
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("write failed for " + path.string());
}

std::uint64_t fnv1a64_string(const std::string& s) {
  return fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

template <class T>
VectorField<T> vector_from_bytes(const std::string& bytes, const std::string& what) {
  std::istringstream is(bytes);
  const FieldHeader h = read_header(is, what);
  if (h.kind != FieldKind::vector) throw FormatError(what + ": expected a vector field");
  return VectorField<T>(h.grid(), read_payload<T>(is, h, what));
}

}  // namespace

template <class T>
void save_field(const VectorField<T>& f, const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_field<T>(os, FieldKind::vector, f.grid(), f.flat());
  if (!os) throw FormatError("write failed for " + path.string());
}

template <class T>
void save_field(const ScalarField<T>& f, const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_field<T>(os, FieldKind::scalar, f.grid(), f.values());
  if (!os) throw FormatError("write failed for " + path.string());
}

FieldHeader read_field_header(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_header(is, path.string());
}

template <class T>
VectorField<T> load_vector_field(const fs::path& path) {
  return vector_from_bytes<T>(read_file(path), path.string());
}

template <class T>
ScalarField<T> load_scalar_field(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  const FieldHeader h = read_header(is, path.string());
  if (h.kind != FieldKind::scalar) throw FormatError(path.string() + ": expected a scalar field");
  return ScalarField<T>(h.grid(), read_payload<T>(is, h, path.string()));
}

template void save_field<float>(const VectorField<float>&, const fs::path&);
template void save_field<double>(const VectorField<double>&, const fs::path&);
template void save_field<float>(const ScalarField<float>&, const fs::path&);
template void save_field<double>(const ScalarField<double>&, const fs::path&);
template VectorField<float> load_vector_field<float>(const fs::path&);
template VectorField<double> load_vector_field<double>(const fs::path&);
template ScalarField<float> load_scalar_field<float>(const fs::path&);
template ScalarField<double> load_scalar_field<double>(const fs::path&);

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t state) {
  for (unsigned char b : bytes) {
    state ^= b;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::uint64_t fnv1a64_file(const fs::path& path) { return fnv1a64_string(read_file(path)); }

// ---------------------------------------------------------------------------
// Configuration and manifest

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

namespace {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw FormatError("manifest: unknown split '" + s + "'");
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::size_t pos = 0;
  const auto v = std::stoull(s, &pos, 16);
  if (pos != s.size() || s.size() != 16) throw FormatError("manifest: bad checksum '" + s + "'");
  return v;
}

}  // namespace

FlowParams DatasetConfig::flow() const {
  FlowParams p;
  p.nu = length / reynolds;
  p.force = force;
  return p;
}

Grid DatasetConfig::dns_grid() const { return make_cube_grid(dim, dns_cells, Extent{0.0, length}); }

void validate(const DatasetConfig& c) {
  if (c.dim != 2 && c.dim != 3) throw ConfigError("dataset dimension must be 2 or 3");
  if (c.dns_cells < 4) throw ConfigError("DNS grid needs at least 4 cells per axis");
  if (!(c.length > 0.0)) throw ConfigError("box length must be positive");
  if (!(c.reynolds > 0.0 && std::isfinite(c.reynolds))) throw ConfigError("Reynolds number must be positive");
  validate(c.flow());
  if (!(c.peak_wavenumber > 0.0)) throw ConfigError("peak wavenumber must be positive");
  if (c.seeds.empty()) throw ConfigError("dataset needs at least one trajectory seed");
  if (!(c.t_burn >= 0.0 && c.t_end > c.t_burn)) throw ConfigError("need 0 <= t_burn < t_end");
  if (c.stride < 0) throw ConfigError("snapshot stride must be >= 0 (0 = final state only)");
  if (!(c.cfl_sigma > 0.0 && c.cfl_sigma <= 1.0)) throw ConfigError("CFL safety factor must lie in (0, 1]");
  tableau_by_name(c.scheme);
  if (c.coarse_cells.empty() || c.filters.empty()) throw ConfigError("dataset needs coarse grids and filters");
  for (auto n : c.coarse_cells) {
    if (n < 2 || c.dns_cells % n != 0) {
      throw ConfigError("coarse size " + std::to_string(n) + " does not divide the DNS size");
    }
  }
  int sum = 0;
  for (int k : c.split_counts) {
    if (k < 0) throw ConfigError("split counts must be >= 0");
    sum += k;
  }
  if (sum != static_cast<int>(c.seeds.size())) throw ConfigError("split counts must add up to the trajectory count");
}

std::string manifest_to_json(const DatasetManifest& m) {
  const DatasetConfig& c = m.config;
  json j;
  j["schema"] = m.schema;
  j["dns"] = {{"dim", c.dim},
              {"cells", c.dns_cells},
              {"length", c.length},
              {"reynolds", c.reynolds},
              {"nu", c.flow().nu},
              {"force", {{"kind", c.force.kind == ForceKind::none ? "none" : "kolmogorov"},
                         {"amplitude", c.force.amplitude},
                         {"wavenumber", c.force.wavenumber}}},
              {"scheme", c.scheme},
              {"cfl_sigma", c.cfl_sigma},
              {"dt", m.dns_dt}};
  j["ic"] = {{"peak_wavenumber", c.peak_wavenumber}};
  j["t_burn"] = c.t_burn;
  j["t_end"] = c.t_end;
  j["stride"] = c.stride;
  j["snapshot_dt"] = m.snapshot_dt;
  j["coarse_cells"] = c.coarse_cells;
  std::vector<std::string> filters;
  for (FilterKind k : c.filters) filters.emplace_back(filter_name(k));
  j["filters"] = filters;
  j["precision"] = c.precision == Precision::f32 ? 32 : 64;
  j["split_counts"] = c.split_counts;
  j["seeds"] = c.seeds;
  json trajs = json::array();
  for (const TrajectoryIndex& t : m.trajectories) {
    json jt;
    jt["seed"] = t.seed;
    jt["split"] = split_name(t.split);
    jt["times"] = t.times;
    json series = json::array();
    for (const SeriesIndex& s : t.series) {
      json files = json::array();
      for (const SnapshotFiles& f : s.snapshots) {
        files.push_back({{"ubar", f.ubar}, {"ubar_fnv1a", hex64(f.ubar_fnv)}, {"c", f.c}, {"c_fnv1a", hex64(f.c_fnv)}});
      }
      series.push_back({{"coarse_cells", s.coarse_cells}, {"filter", filter_name(s.filter)}, {"snapshots", files}});
    }
    jt["series"] = series;
    trajs.push_back(jt);
  }
  j["trajectories"] = trajs;
  return j.dump(1);
}

DatasetManifest manifest_from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.schema = j.at("schema").get<int>();
    if (m.schema != 1) throw FormatError("manifest: unsupported schema " + std::to_string(m.schema));
    DatasetConfig& c = m.config;
    const json& d = j.at("dns");
    c.dim = d.at("dim").get<int>();
    c.dns_cells = d.at("cells").get<std::int64_t>();
    c.length = d.at("length").get<double>();
    c.reynolds = d.at("reynolds").get<double>();
    const json& f = d.at("force");
    c.force.kind = f.at("kind").get<std::string>() == "none" ? ForceKind::none : ForceKind::kolmogorov;
    c.force.amplitude = f.at("amplitude").get<double>();
    c.force.wavenumber = f.at("wavenumber").get<int>();
    c.scheme = d.at("scheme").get<std::string>();
    c.cfl_sigma = d.at("cfl_sigma").get<double>();
    m.dns_dt = d.at("dt").get<double>();
    c.peak_wavenumber = j.at("ic").at("peak_wavenumber").get<double>();
    c.t_burn = j.at("t_burn").get<double>();
    c.t_end = j.at("t_end").get<double>();
    c.stride = j.at("stride").get<std::int64_t>();
    m.snapshot_dt = j.at("snapshot_dt").get<double>();
    c.coarse_cells = j.at("coarse_cells").get<std::vector<std::int64_t>>();
    c.filters.clear();
    for (const auto& s : j.at("filters")) c.filters.push_back(parse_filter(s.get<std::string>()));
    c.precision = j.at("precision").get<int>() == 32 ? Precision::f32 : Precision::f64;
    c.split_counts = j.at("split_counts").get<std::array<int, 3>>();
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const json& jt : j.at("trajectories")) {
      TrajectoryIndex t;
      t.seed = jt.at("seed").get<std::uint64_t>();
      t.split = parse_split(jt.at("split").get<std::string>());
      t.times = jt.at("times").get<std::vector<double>>();
      for (const json& js : jt.at("series")) {
        SeriesIndex s;
        s.coarse_cells = js.at("coarse_cells").get<std::int64_t>();
        s.filter = parse_filter(js.at("filter").get<std::string>());
        for (const json& jf : js.at("snapshots")) {
          s.snapshots.push_back({jf.at("ubar").get<std::string>(), jf.at("c").get<std::string>(),
                                 parse_hex64(jf.at("ubar_fnv1a").get<std::string>()),
                                 parse_hex64(jf.at("c_fnv1a").get<std::string>())});
        }
        if (s.snapshots.size() != t.times.size()) throw FormatError("manifest: series length differs from times");
        t.series.push_back(std::move(s));
      }
      m.trajectories.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) { write_file(path, manifest_to_json(m) + "\n"); }

DatasetManifest load_manifest(const fs::path& path) { return manifest_from_json(read_file(path)); }

// ---------------------------------------------------------------------------
// Generation

namespace {

std::string snapshot_name(const char* what, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu.sgf", what, k);
  return buf;
}

std::string series_dir(std::uint64_t seed, std::int64_t n, FilterKind f) {
  return "traj_" + std::to_string(seed) + "/n" + std::to_string(n) + "_" + filter_name(f);
}

template <class T>
std::string field_bytes(const VectorField<double>& f) {
  std::ostringstream os(std::ios::binary);
  const VectorField<T> g = cast_field<T>(f);
  write_field<T>(os, FieldKind::vector, g.grid(), g.flat());
  return os.str();
}

template <class T>
DatasetManifest generate_impl(const DatasetConfig& cfg, const fs::path& dir, int workers, const ProgressFn& progress) {
  const Grid g = cfg.dns_grid();
  const FlowParams flow = cfg.flow();
  const RKTableau tab = tableau_by_name(cfg.scheme);
  const std::size_t ntraj = cfg.seeds.size();
  std::mutex log_mu;
  auto log = [&](const std::string& s) {
    if (!progress) return;
    std::lock_guard lock(log_mu);
    progress(s);
  };

  // Burn-in with CFL steps.
  std::vector<VectorField<T>> states(ntraj);
  detail::parallel_for(ntraj, workers, [&](std::size_t i) {
    StepControl ctl;
    ctl.mode = StepMode::cfl;
    ctl.sigma = cfg.cfl_sigma;
    const auto u0 = random_spectral_field<T>(g, SpectrumSpec{cfg.peak_wavenumber, cfg.seeds[i]});
    auto r = integrate<T>(u0, cfg.t_burn, ctl, tab, flow);
    states[i] = std::move(r.u);
    log("seed " + std::to_string(cfg.seeds[i]) + ": burn-in done after " + std::to_string(r.steps) + " steps");
  });

  // One fixed step for every trajectory: the smallest CFL step after burn-in,
  // shortened so that t_end - t_burn is a whole number of steps.
  double dt_cfl = std::numeric_limits<double>::infinity();
  for (const auto& u : states) dt_cfl = std::min(dt_cfl, cfl_dt(u, flow, cfg.cfl_sigma));
  const double span = cfg.t_end - cfg.t_burn;
  const auto nsteps = static_cast<std::int64_t>(std::ceil(span / dt_cfl - 1e-9));
  const double dt = span / static_cast<double>(nsteps);

  DatasetManifest m;
  m.config = cfg;
  m.dns_dt = dt;
  m.snapshot_dt = cfg.stride == 0 ? span : dt * static_cast<double>(cfg.stride);
  m.trajectories.resize(ntraj);
  std::vector<CoarseningMap> maps;
  for (auto n : cfg.coarse_cells) maps.push_back(make_coarsening(g, n));

  detail::parallel_for(ntraj, workers, [&](std::size_t i) {
    TrajectoryIndex& ti = m.trajectories[i];
    ti.seed = cfg.seeds[i];
    for (std::size_t k = 0; k < maps.size(); ++k) {
      for (FilterKind f : cfg.filters) {
        ti.series.push_back(SeriesIndex{cfg.coarse_cells[k], f, {}});
        fs::create_directories(dir / series_dir(ti.seed, cfg.coarse_cells[k], f));
      }
    }
    auto capture = [&](std::int64_t step, const VectorField<T>& u) {
      const auto ud = cast_field<double>(u);
      const std::size_t snap = ti.times.size();
      ti.times.push_back(cfg.t_burn + static_cast<double>(step) * dt);
      std::size_t s = 0;
      for (std::size_t k = 0; k < maps.size(); ++k) {
        for (FilterKind f : cfg.filters) {
          const FilteredPair fp = filter_and_commutator(ud, maps[k], f, flow);
          const std::string sub = series_dir(ti.seed, cfg.coarse_cells[k], f) + "/";
          SnapshotFiles files{sub + snapshot_name("ubar", snap), sub + snapshot_name("c", snap), 0, 0};
          const std::string ub = field_bytes<T>(fp.ubar), cb = field_bytes<T>(fp.c);
          write_file(dir / files.ubar, ub);
          write_file(dir / files.c, cb);
          files.ubar_fnv = fnv1a64_string(ub);
          files.c_fnv = fnv1a64_string(cb);
          ti.series[s++].snapshots.push_back(std::move(files));
        }
      }
    };
    VectorField<T> u = std::move(states[i]);
    const RhsFn<T> f = [&flow](const VectorField<T>& v) { return rhs(v, flow); };
    if (cfg.stride > 0) capture(0, u);
    for (std::int64_t step = 1; step <= nsteps; ++step) {
      u = rk_step(u, dt, tab, f, true);
      const bool due = cfg.stride > 0 ? step % cfg.stride == 0 : step == nsteps;
      if (due) capture(step, u);
    }
    log("seed " + std::to_string(ti.seed) + ": " + std::to_string(nsteps) + " steps, " +
        std::to_string(ti.times.size()) + " snapshots");
  });
  return split_dataset(m, cfg.split_counts);
}

}  // namespace

DatasetManifest generate_dataset(const DatasetConfig& config, const fs::path& dir, int workers,
                                 const ProgressFn& progress) {
  validate(config);
  const bool existed = fs::exists(dir);
  if (existed && fs::exists(dir / "manifest.json")) {
    throw ConfigError("output directory " + dir.string() + " already holds a dataset");
  }
  fs::create_directories(dir);
  try {
    DatasetManifest m = config.precision == Precision::f32 ? generate_impl<float>(config, dir, workers, progress)
                                                           : generate_impl<double>(config, dir, workers, progress);
    save_manifest(m, dir / "manifest.json");
    return m;
  } catch (...) {
    std::error_code ec;
    if (!existed) {
      fs::remove_all(dir, ec);
    } else {
      for (auto seed : config.seeds) fs::remove_all(dir / ("traj_" + std::to_string(seed)), ec);
      fs::remove(dir / "manifest.json", ec);
    }
    throw;
  }
}

DatasetManifest split_dataset(const DatasetManifest& m, std::array<int, 3> counts,
                              std::optional<std::uint64_t> shuffle_seed) {
  const std::size_t n = m.trajectories.size();
  int nonzero = 0, sum = 0;
  for (int k : counts) {
    if (k < 0) throw ConfigError("split counts must be >= 0");
    nonzero += k > 0;
    sum += k;
  }
  if (n < static_cast<std::size_t>(nonzero)) throw ConfigError("fewer trajectories than requested splits");
  if (static_cast<std::size_t>(sum) != n) throw ConfigError("split counts must add up to the trajectory count");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) {
    Xoshiro256pp rng(*shuffle_seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  }
  DatasetManifest out = m;
  out.config.split_counts = counts;
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s) {
    for (int k = 0; k < counts[static_cast<std::size_t>(s)]; ++k) out.trajectories[order[pos++]].split = static_cast<Split>(s);
  }
  return out;
}

std::vector<const TrajectoryData*> Dataset::split(Split s) const {
  std::vector<const TrajectoryData*> out;
  for (const auto& t : trajectories) {
    if (t.split == s) out.push_back(&t);
  }
  return out;
}

Dataset load_dataset(const fs::path& dir, std::int64_t coarse_cells, FilterKind filter) {
  const DatasetManifest m = load_manifest(dir / "manifest.json");
  Dataset d;
  d.filter = filter;
  d.flow = m.config.flow();
  d.scheme = m.config.scheme;
  d.snapshot_dt = m.snapshot_dt;
  d.coarse = make_cube_grid(m.config.dim, coarse_cells, Extent{0.0, m.config.length});
  auto load = [&](const std::string& rel, std::uint64_t fnv) {
    const std::string bytes = read_file(dir / rel);
    if (fnv1a64_string(bytes) != fnv) throw FormatError(rel + ": checksum mismatch");
    auto f = vector_from_bytes<double>(bytes, rel);
    require_same_grid(f.grid(), d.coarse, rel.c_str());
    return f;
  };
  for (const TrajectoryIndex& t : m.trajectories) {
    const SeriesIndex* s = nullptr;
    for (const auto& x : t.series) {
      if (x.coarse_cells == coarse_cells && x.filter == filter) s = &x;
    }
    if (s == nullptr) {
      throw ConfigError("dataset has no series for " + std::to_string(coarse_cells) + " cells / " + filter_name(filter));
    }
    TrajectoryData td{t.seed, t.split, t.times, {}, {}};
    for (const SnapshotFiles& f : s->snapshots) {
      td.ubar.push_back(load(f.ubar, f.ubar_fnv));
      td.c.push_back(load(f.c, f.c_fnv));
    }
    d.trajectories.push_back(std::move(td));
  }
  return d;
}

}  // namespace sgles
