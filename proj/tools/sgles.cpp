// sgles: dataset generation, closure training, LES runs, analysis and
// self-validation from one TOML config.
//
// Exit codes: 0 success, 1 usage/config/input error, 2 numerical failure,
// 3 validation-suite failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgles/analysis.hpp"
#include "sgles/config.hpp"
#include "sgles/validation.hpp"

#ifndef SGLES_VERSION
#define SGLES_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sgles;

namespace {

constexpr int kOk = 0, kConfigExit = 1, kNumericalExit = 2, kValidationExit = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> precision;
  int workers = 1;
  std::string output;
  std::string command_line;
};

struct Run {
  RunConfig cfg;
  fs::path dir;
};

Run prepare(const Options& o, const std::string& command, const ConfigOverrides& extra = {}) {
  ConfigOverrides over = extra;
  over.seed = o.seed;
  if (o.precision) over.precision = *o.precision == 32 ? Precision::f32 : Precision::f64;
  Run r;
  r.cfg = o.config.empty() ? parse_config("", {}, over) : load_config(o.config, over);
  if (!o.output.empty()) {
    r.dir = o.output;
  } else if (command == "generate") {
    r.dir = r.cfg.dataset_dir;
  } else {
    r.dir = fs::path("runs") / command;
  }
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw FormatError("cannot write " + path.string());
}

void write_provenance(const Run& r, const Options& o) {
  fs::create_directories(r.dir);
  write_text(r.dir / "config.toml", "# resolved configuration\n" + to_toml(r.cfg));
  write_text(r.dir / "version.txt", std::string("sgles ") + SGLES_VERSION + "\n" + o.command_line + "\n");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void progress(const std::string& msg) { std::cerr << msg << std::endl; }

int cmd_generate(const Options& o) {
  const Run r = prepare(o, "generate");
  DatasetManifest m = generate_dataset(r.cfg.dataset, r.dir, o.workers, progress);
  if (r.cfg.split_seed) {
    m = split_dataset(m, r.cfg.dataset.split_counts, r.cfg.split_seed);
    save_manifest(m, r.dir / "manifest.json");
  }
  write_provenance(r, o);
  std::cout << "dataset: " << m.trajectories.size() << " trajectories, dns dt " << m.dns_dt << ", snapshot dt "
            << m.snapshot_dt << " -> " << r.dir.string() << "\n";
  return kOk;
}

Dataset open_dataset(const RunConfig& cfg, std::int64_t coarse, FilterKind filter) {
  if (!fs::exists(cfg.dataset_dir / "manifest.json")) {
    throw ConfigError("no dataset manifest under " + cfg.dataset_dir.string() + " (run `sgles generate` first)");
  }
  return load_dataset(cfg.dataset_dir, coarse, filter);
}

ClosureParams closure_params(const RunConfig& cfg, bool required) {
  const CNNArchitecture arch = cfg.closure.architecture(cfg.dataset.dim);
  if (cfg.closure.params.empty()) {
    if (required) throw ConfigError("closure.params must point to a trained parameter file");
    return init_params(arch, cfg.closure.init_seed);
  }
  ClosureParams p = load_params(cfg.closure.params);
  if (!(p.arch == arch)) throw ConfigError("parameter file does not match the [closure] architecture");
  return p;
}

int cmd_train(const Options& o, const std::string& loss) {
  ConfigOverrides over;
  if (!loss.empty()) over.loss = parse_loss(loss);
  const Run r = prepare(o, "train", over);
  if (o.precision && *o.precision == 32) throw ConfigError("training runs in 64-bit only");
  const TrainingSection& ts = r.cfg.training;
  if (ts.train.loss == LossKind::post && r.cfg.closure.kind == ClosureKind::none) {
    throw ConfigError("nothing to train for closure 'none'");
  }
  const Dataset d = open_dataset(r.cfg, ts.coarse_cells, ts.filter);
  write_provenance(r, o);

  TrainConfig tc = ts.train;
  tc.workers = o.workers;
  tc.output_dir = r.dir;
  json summary{{"loss", loss_name(tc.loss)}, {"coarse_cells", ts.coarse_cells}, {"filter", filter_name(ts.filter)}};

  if (tc.loss == LossKind::post && r.cfg.closure.kind == ClosureKind::smagorinsky) {
    const auto grid = default_smagorinsky_grid();
    const SmagorinskySearch s = smagorinsky_search(d, tc.formulation, grid, tc.n_unroll, ts.smagorinsky_max_windows);
    std::ofstream os(r.dir / "smagorinsky.csv");
    os.precision(10);
    os << "theta,loss\n";
    for (std::size_t i = 0; i < s.candidates.size(); ++i) os << s.candidates[i] << ',' << s.losses[i] << '\n';
    summary["smagorinsky_theta"] = s.theta;
    summary["smagorinsky_loss"] = s.loss;
    write_json(r.dir / "summary.json", summary);
    std::cout << "smagorinsky theta* = " << s.theta << " (loss " << s.loss << ")\n";
    return kOk;
  }

  const ClosureParams init = closure_params(r.cfg, false);
  const TrainResult res = tc.loss == LossKind::prior ? train_prior(d, init, tc) : train_post(d, init, tc);
  save_params(r.dir / "best.cnp", res.params);
  summary["initial_valid"] = res.initial_valid;
  summary["best_valid"] = res.best_valid;
  summary["best_iteration"] = res.best_iteration;
  summary["rejected_steps"] = res.rejected_steps;
  write_json(r.dir / "summary.json", summary);
  std::cout << "validation loss " << res.initial_valid << " -> " << res.best_valid << " (iteration "
            << res.best_iteration << ")\n";
  return kOk;
}

template <class T>
int run_les_cmd(const Run& r, const LESModel& m, const std::vector<VectorField<double>>& ref, std::int64_t n,
                double dt) {
  const LesSection& ls = r.cfg.les;
  const fs::path fields = r.dir / "fields";
  if (ls.save_every > 0) fs::create_directories(fields);
  std::ofstream csv(r.dir / "les.csv");
  csv.precision(12);
  csv << "step,t,energy,divergence_rms,rel_error\n";
  std::vector<double> errors;
  const StepObserver<T> obs = [&](std::int64_t step, double t, const VectorField<T>& v) {
    csv << step << ',' << t << ',' << total_energy(v) << ',' << divergence_rms(v) << ',';
    const auto k = static_cast<std::size_t>(step);
    if (k < ref.size()) {
      const double e = field_norm(cast_field<double>(v) - ref[k]) / field_norm(ref[k]);
      csv << e;
      if (step > 0) errors.push_back(e);
    }
    csv << '\n';
    if (ls.save_every > 0 && step % ls.save_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "v_%05lld.sgf", static_cast<long long>(step));
      save_field(v, fields / name);
    }
  };
  StepControl control;
  control.mode = StepMode::fixed;
  control.dt = dt;
  const LESTrajectory<T> traj = run_les(cast_field<T>(ref.front()), m, control, static_cast<double>(n) * dt, obs, 0);

  json summary{{"formulation", formulation_name(m.formulation)},
               {"closure", closure_name(m.closure)},
               {"steps", traj.steps},
               {"dt", dt},
               {"unstable", traj.unstable}};
  if (!errors.empty()) {
    double s = 0.0;
    for (double e : errors) s += e;
    summary["aposteriori_error"] = s / static_cast<double>(errors.size());
    summary["reference_steps"] = errors.size();
  }
  if (traj.unstable) summary["diagnostic"] = traj.diagnostic;
  write_json(r.dir / "summary.json", summary);
  if (traj.unstable) {
    std::cerr << "LES blew up: " << traj.diagnostic << "\n";
    return kNumericalExit;
  }
  std::cout << "LES " << formulation_name(m.formulation) << "/" << closure_name(m.closure) << ": " << traj.steps
            << " steps";
  if (summary.contains("aposteriori_error")) std::cout << ", a-posteriori error " << summary["aposteriori_error"];
  std::cout << "\n";
  return kOk;
}

int cmd_les(const Options& o, const std::string& closure, const std::string& formulation) {
  Run r = prepare(o, "les");
  LesSection& ls = r.cfg.les;
  if (!closure.empty()) ls.closure = parse_closure(closure);
  if (!formulation.empty()) ls.formulation = parse_formulation(formulation);
  validate(r.cfg);
  const Dataset d = open_dataset(r.cfg, ls.coarse_cells, ls.filter);
  const auto trajs = d.split(ls.split);
  if (static_cast<std::size_t>(ls.trajectory) >= trajs.size()) {
    throw ConfigError("les.trajectory out of range: split '" + std::string(split_name(ls.split)) + "' has " +
                      std::to_string(trajs.size()) + " trajectories");
  }
  const TrajectoryData& td = *trajs[static_cast<std::size_t>(ls.trajectory)];

  LESModel m;
  m.formulation = ls.formulation;
  m.closure = ls.closure;
  m.flow = d.flow;
  m.grid = d.coarse;
  m.tableau = tableau_by_name(d.scheme);
  m.smagorinsky_theta = r.cfg.closure.smagorinsky_theta;
  if (m.closure == ClosureKind::cnn) m.cnn = closure_params(r.cfg, true);
  validate(m);

  const double dt = d.snapshot_dt;
  const std::int64_t n = ls.t_end > 0.0 ? std::max<std::int64_t>(1, std::llround(ls.t_end / dt)) : ls.steps;
  write_provenance(r, o);
  const bool f32 = o.precision && *o.precision == 32;
  return f32 ? run_les_cmd<float>(r, m, td.ubar, n, dt) : run_les_cmd<double>(r, m, td.ubar, n, dt);
}

std::vector<fs::path> sgf_inputs(const fs::path& input) {
  if (input.empty()) throw ConfigError("analysis.input is not set");
  if (!fs::exists(input)) throw ConfigError("analysis input " + input.string() + " does not exist");
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      if (e.is_regular_file() && e.path().extension() == ".sgf") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(input);
  }
  if (files.empty()) throw ConfigError("no .sgf files under " + input.string());
  return files;
}

int cmd_analyze(const Options& o, const std::string& what) {
  const Run r = prepare(o, "analyze");
  const auto files = sgf_inputs(r.cfg.analysis.input);
  for (const auto& f : files) {
    if (read_field_header(f).kind != FieldKind::vector) throw ConfigError(f.string() + " is not a vector field");
  }
  write_provenance(r, o);
  if (what == "spectrum") {
    for (const auto& f : files) {
      const SpectrumResult s = energy_spectrum(load_vector_field<double>(f), r.cfg.analysis.ratio);
      std::ofstream os(r.dir / ("spectrum_" + f.stem().string() + ".csv"));
      os.precision(12);
      os << "kappa,energy\n";
      for (std::size_t i = 0; i < s.kappa.size(); ++i) os << s.kappa[i] << ',' << s.energy[i] << '\n';
    }
  } else {
    std::ofstream os(r.dir / (what + ".csv"));
    os.precision(12);
    os << "file," << (what == "energy" ? "energy" : "divergence_rms") << '\n';
    for (const auto& f : files) {
      const auto v = load_vector_field<double>(f);
      os << f.filename().string() << ',' << (what == "energy" ? total_energy(v) : divergence_rms(v)) << '\n';
    }
  }
  std::cout << "analyzed " << files.size() << " field(s) -> " << r.dir.string() << "\n";
  return kOk;
}

int cmd_validate(const Options& o, const std::string& suite) {
  const Run r = prepare(o, "validate");
  if (suite != "all" && std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end()) {
    throw ConfigError("unknown validation suite '" + suite + "'");
  }
  write_provenance(r, o);
  const SuiteReport rep = run_suite(suite, o.seed.value_or(0));
  write_report_csv(r.dir / (suite + ".csv"), rep);
  for (const Check& c : rep.checks) {
    std::cout << (c.passed() ? "PASS " : "FAIL ") << c.suite << ": " << c.name << " = " << c.value
              << (c.at_most ? " <= " : " >= ") << c.bound << "\n";
  }
  return rep.passed() ? kOk : kValidationExit;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  for (int i = 0; i < argc; ++i) o.command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"sgles: staggered-grid LES closure toolkit"};
  app.set_version_flag("--version", std::string("sgles ") + SGLES_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", o.config, "TOML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "override seeds (trajectories, training, init)");
  app.add_option("--precision", o.precision, "field precision, 32 or 64")->check(CLI::IsMember({32, 64}));
  app.add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output", o.output, "run directory");

  auto* gen = app.add_subcommand("generate", "run the DNS and write a filtered dataset");
  std::string loss;
  auto* train = app.add_subcommand("train", "train a closure (prior or post loss) or search the Smagorinsky coefficient");
  train->add_option("--loss", loss, "prior | post")->check(CLI::IsMember({"prior", "post"}));
  std::string closure, formulation;
  auto* les = app.add_subcommand("les", "run an LES from a dataset snapshot");
  les->add_option("--closure", closure, "none | smagorinsky | cnn")->check(CLI::IsMember({"none", "smagorinsky", "cnn"}));
  les->add_option("--formulation", formulation, "DIF | DCF")->check(CLI::IsMember({"DIF", "DCF", "dif", "dcf"}));
  std::string what;
  auto* analyze = app.add_subcommand("analyze", "spectra, energies or divergence of stored fields");
  analyze->add_option("--what", what, "spectrum | energy | divergence")
      ->required()
      ->check(CLI::IsMember({"spectrum", "energy", "divergence"}));
  std::string suite = "all";
  auto* val = app.add_subcommand("validate", "run the built-in validation suites");
  val->add_option("--suite", suite, "operators | filters | taylor-green | gradients | all")
      ->check(CLI::IsMember({"operators", "filters", "taylor-green", "gradients", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (train->parsed()) return cmd_train(o, loss);
    if (les->parsed()) return cmd_les(o, closure, formulation);
    if (analyze->parsed()) return cmd_analyze(o, what);
    if (val->parsed()) return cmd_validate(o, suite);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "file system error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalExit;
  }
  return kConfigExit;
}
