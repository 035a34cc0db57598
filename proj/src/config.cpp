#include "sgles/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

namespace sgles {

CNNArchitecture ClosureSection::architecture(int dim) const {
  if (hidden.empty()) throw ConfigError("closure.hidden needs at least one layer width");
  CNNArchitecture a;
  a.dim = dim;
  int cin = dim;
  for (int h : hidden) {
    a.layers.push_back({radius, cin, h, Activation::tanh, true});
    cin = h;
  }
  a.layers.push_back({radius, cin, dim, Activation::identity, false});
  validate(a);
  return a;
}

namespace {

// Reads typed keys from one table and remembers which ones were consumed.
class Section {
 public:
  Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  bool has(const char* key) const { return t_ && t_->contains(key); }

  void get(const char* key, double& out) {
    if (const toml::node* n = take(key)) {
      if (auto v = n->value_exact<double>()) {
        out = *v;
      } else if (auto i = n->value_exact<std::int64_t>()) {
        out = static_cast<double>(*i);
      } else {
        type_error(key, "a number");
      }
    }
  }

  void get(const char* key, std::int64_t& out) {
    if (const toml::node* n = take(key)) {
      auto v = n->value_exact<std::int64_t>();
      if (!v) type_error(key, "an integer");
      out = *v;
    }
  }

  void get(const char* key, int& out) {
    std::int64_t v = out;
    get(key, v);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) type_error(key, "a 32-bit integer");
    out = static_cast<int>(v);
  }

  void get(const char* key, std::uint64_t& out) {
    std::int64_t v = static_cast<std::int64_t>(out);
    get(key, v);
    if (v < 0) type_error(key, "a non-negative integer");
    out = static_cast<std::uint64_t>(v);
  }

  void get(const char* key, std::string& out) {
    if (const toml::node* n = take(key)) {
      auto v = n->value_exact<std::string>();
      if (!v) type_error(key, "a string");
      out = *v;
    }
  }

  template <class T>
  void get_array(const char* key, std::vector<T>& out) {
    const toml::node* n = take(key);
    if (!n) return;
    const toml::array* a = n->as_array();
    if (!a) type_error(key, "an array");
    std::vector<T> v;
    for (const toml::node& e : *a) {
      if constexpr (std::is_same_v<T, std::string>) {
        auto s = e.value_exact<std::string>();
        if (!s) type_error(key, "an array of strings");
        v.push_back(*s);
      } else {
        auto i = e.value_exact<std::int64_t>();
        if (!i || (std::is_unsigned_v<T> && *i < 0)) type_error(key, "an array of non-negative integers");
        v.push_back(static_cast<T>(*i));
      }
    }
    out = std::move(v);
  }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, v] : *t_) {
      if (!used_.count(std::string(k.str()))) {
        throw ConfigError("unknown key '" + name_ + "." + std::string(k.str()) + "'");
      }
    }
  }

 private:
  const toml::node* take(const char* key) {
    if (!t_) return nullptr;
    used_.insert(key);
    return t_->get(key);
  }

  [[noreturn]] void type_error(const char* key, const char* expected) const {
    throw ConfigError("'" + name_ + "." + key + "' must be " + expected);
  }

  const toml::table* t_;
  std::string name_;
  std::set<std::string> used_;
};

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "' (expected train, valid or test)");
}

ForceKind parse_force(const std::string& s) {
  if (s == "none") return ForceKind::none;
  if (s == "kolmogorov") return ForceKind::kolmogorov;
  throw ConfigError("unknown force '" + s + "' (expected none or kolmogorov)");
}

Precision parse_precision(std::int64_t bits) {
  if (bits == 32) return Precision::f32;
  if (bits == 64) return Precision::f64;
  throw ConfigError("precision must be 32 or 64");
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                       const ConfigOverrides& over) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config syntax error: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }

  static const std::set<std::string> kSections{"grid",    "flow",    "ic",       "time", "filters",
                                               "dataset", "closure", "training", "les",  "analysis"};
  for (const auto& [k, v] : root) {
    const std::string key(k.str());
    if (!kSections.count(key)) throw ConfigError("unknown section '" + key + "'");
    if (!v.is_table()) throw ConfigError("'" + key + "' must be a table");
  }
  auto section = [&](const char* name) { return Section(root[name].as_table(), name); };

  RunConfig c;
  DatasetConfig& d = c.dataset;

  Section grid = section("grid");
  grid.get("dim", d.dim);
  grid.get("dns_cells", d.dns_cells);
  grid.get("length", d.length);
  grid.finish();

  Section flow = section("flow");
  flow.get("reynolds", d.reynolds);
  std::string force = d.force.kind == ForceKind::none ? "none" : "kolmogorov";
  flow.get("force", force);
  d.force.kind = parse_force(force);
  flow.get("force_amplitude", d.force.amplitude);
  flow.get("force_wavenumber", d.force.wavenumber);
  flow.finish();

  Section ic = section("ic");
  ic.get("peak_wavenumber", d.peak_wavenumber);
  ic.get_array("seeds", d.seeds);
  ic.finish();

  Section time = section("time");
  time.get("scheme", d.scheme);
  time.get("t_burn", d.t_burn);
  time.get("t_end", d.t_end);
  time.get("cfl_sigma", d.cfl_sigma);
  time.finish();

  Section filters = section("filters");
  std::vector<std::string> kinds;
  for (FilterKind k : d.filters) kinds.emplace_back(filter_name(k));
  filters.get_array("kinds", kinds);
  d.filters.clear();
  for (const auto& k : kinds) d.filters.push_back(parse_filter(k));
  filters.get_array("coarse_cells", d.coarse_cells);
  filters.finish();

  Section dataset = section("dataset");
  std::string dir = c.dataset_dir.string();
  dataset.get("dir", dir);
  c.dataset_dir = resolve(dir, base_dir);
  dataset.get("stride", d.stride);
  std::vector<int> splits(d.split_counts.begin(), d.split_counts.end());
  dataset.get_array("splits", splits);
  if (splits.size() != 3) throw ConfigError("dataset.splits must list three counts (train, valid, test)");
  d.split_counts = {splits[0], splits[1], splits[2]};
  if (dataset.has("split_seed")) {
    std::uint64_t s = 0;
    dataset.get("split_seed", s);
    c.split_seed = s;
  }
  std::int64_t bits = d.precision == Precision::f32 ? 32 : 64;
  dataset.get("precision", bits);
  d.precision = parse_precision(bits);
  dataset.finish();

  Section closure = section("closure");
  std::string ck = closure_name(c.closure.kind);
  closure.get("kind", ck);
  c.closure.kind = parse_closure(ck);
  closure.get_array("hidden", c.closure.hidden);
  closure.get("radius", c.closure.radius);
  closure.get("init_seed", c.closure.init_seed);
  std::string params;
  closure.get("params", params);
  c.closure.params = resolve(params, base_dir);
  closure.get("smagorinsky_theta", c.closure.smagorinsky_theta);
  closure.finish();

  Section training = section("training");
  TrainingSection& ts = c.training;
  std::string loss = loss_name(ts.train.loss);
  training.get("loss", loss);
  // Post-loss defaults differ; apply them before reading explicit values.
  ts.train = default_train_config(over.loss ? *over.loss : parse_loss(loss));
  training.get("coarse_cells", ts.coarse_cells);
  std::string tf = filter_name(ts.filter);
  training.get("filter", tf);
  ts.filter = parse_filter(tf);
  training.get("batch_size", ts.train.batch_size);
  training.get("iterations", ts.train.iterations);
  training.get("n_unroll", ts.train.n_unroll);
  training.get("lr_start", ts.train.lr_start);
  training.get("lr_end", ts.train.lr_end);
  training.get("seed", ts.train.seed);
  training.get("validate_every", ts.train.validate_every);
  std::string tform = formulation_name(ts.train.formulation);
  training.get("formulation", tform);
  ts.train.formulation = parse_formulation(tform);
  training.get("clip_norm", ts.train.clip_norm);
  std::uint64_t mvs = ts.train.max_validation_samples, smw = ts.smagorinsky_max_windows;
  training.get("max_validation_samples", mvs);
  training.get("smagorinsky_max_windows", smw);
  ts.train.max_validation_samples = static_cast<std::size_t>(mvs);
  ts.smagorinsky_max_windows = static_cast<std::size_t>(smw);
  training.finish();

  Section les = section("les");
  std::string lf = formulation_name(c.les.formulation);
  les.get("formulation", lf);
  c.les.formulation = parse_formulation(lf);
  std::string lc = closure_name(c.les.closure);
  les.get("closure", lc);
  c.les.closure = parse_closure(lc);
  les.get("coarse_cells", c.les.coarse_cells);
  std::string lfil = filter_name(c.les.filter);
  les.get("filter", lfil);
  c.les.filter = parse_filter(lfil);
  std::string split = split_name(c.les.split);
  les.get("split", split);
  c.les.split = parse_split(split);
  les.get("trajectory", c.les.trajectory);
  les.get("steps", c.les.steps);
  les.get("t_end", c.les.t_end);
  les.get("save_every", c.les.save_every);
  les.finish();

  Section analysis = section("analysis");
  std::string input;
  analysis.get("input", input);
  c.analysis.input = resolve(input, base_dir);
  analysis.get("ratio", c.analysis.ratio);
  analysis.finish();

  if (over.seed) {
    for (std::size_t i = 0; i < d.seeds.size(); ++i) d.seeds[i] = *over.seed + i;
    ts.train.seed = *over.seed;
    c.closure.init_seed = *over.seed;
  }
  if (over.precision) d.precision = *over.precision;

  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& over) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), path.parent_path(), over);
}

void validate(const RunConfig& c) {
  validate(c.dataset);
  c.closure.architecture(c.dataset.dim);
  if (c.closure.kind == ClosureKind::external) throw ConfigError("closure.kind 'external' is only available in code");
  if (!(c.closure.smagorinsky_theta >= 0.0 && c.closure.smagorinsky_theta <= 1.0)) {
    throw ConfigError("closure.smagorinsky_theta must lie in [0, 1]");
  }
  validate(c.training.train);
  if (c.training.train.loss == LossKind::prior && c.closure.kind == ClosureKind::smagorinsky) {
    throw ConfigError("the prior loss trains a CNN; use --loss post for the Smagorinsky search");
  }
  if (c.les.closure == ClosureKind::external) throw ConfigError("les.closure 'external' is only available in code");
  if (c.les.steps < 1) throw ConfigError("les.steps must be >= 1");
  if (!(c.les.t_end >= 0.0)) throw ConfigError("les.t_end must be >= 0");
  if (c.les.trajectory < 0) throw ConfigError("les.trajectory must be >= 0");
  if (c.les.save_every < 0) throw ConfigError("les.save_every must be >= 0");
  if (!(c.analysis.ratio > 1.0)) throw ConfigError("analysis.ratio must exceed 1");
}

std::string to_toml(const RunConfig& c) {
  const DatasetConfig& d = c.dataset;
  auto ints = [](const auto& v) {
    toml::array a;
    for (auto x : v) a.push_back(static_cast<std::int64_t>(x));
    return a;
  };

  toml::array kinds;
  for (FilterKind k : d.filters) kinds.push_back(filter_name(k));

  toml::table dataset{{"dir", c.dataset_dir.string()},
                      {"stride", d.stride},
                      {"splits", ints(d.split_counts)},
                      {"precision", d.precision == Precision::f32 ? 32 : 64}};
  if (c.split_seed) dataset.insert("split_seed", static_cast<std::int64_t>(*c.split_seed));

  const TrainConfig& t = c.training.train;
  toml::table root{
      {"grid", toml::table{{"dim", d.dim}, {"dns_cells", d.dns_cells}, {"length", d.length}}},
      {"flow", toml::table{{"reynolds", d.reynolds},
                           {"force", d.force.kind == ForceKind::none ? "none" : "kolmogorov"},
                           {"force_amplitude", d.force.amplitude},
                           {"force_wavenumber", d.force.wavenumber}}},
      {"ic", toml::table{{"peak_wavenumber", d.peak_wavenumber}, {"seeds", ints(d.seeds)}}},
      {"time", toml::table{{"scheme", d.scheme}, {"t_burn", d.t_burn}, {"t_end", d.t_end}, {"cfl_sigma", d.cfl_sigma}}},
      {"filters", toml::table{{"kinds", kinds}, {"coarse_cells", ints(d.coarse_cells)}}},
      {"dataset", dataset},
      {"closure", toml::table{{"kind", closure_name(c.closure.kind)},
                              {"hidden", ints(c.closure.hidden)},
                              {"radius", c.closure.radius},
                              {"init_seed", static_cast<std::int64_t>(c.closure.init_seed)},
                              {"params", c.closure.params.string()},
                              {"smagorinsky_theta", c.closure.smagorinsky_theta}}},
      {"training", toml::table{{"loss", loss_name(t.loss)},
                               {"coarse_cells", c.training.coarse_cells},
                               {"filter", filter_name(c.training.filter)},
                               {"batch_size", t.batch_size},
                               {"iterations", t.iterations},
                               {"n_unroll", t.n_unroll},
                               {"lr_start", t.lr_start},
                               {"lr_end", t.lr_end},
                               {"seed", static_cast<std::int64_t>(t.seed)},
                               {"validate_every", t.validate_every},
                               {"formulation", formulation_name(t.formulation)},
                               {"clip_norm", t.clip_norm},
                               {"max_validation_samples", static_cast<std::int64_t>(t.max_validation_samples)},
                               {"smagorinsky_max_windows", static_cast<std::int64_t>(c.training.smagorinsky_max_windows)}}},
      {"les", toml::table{{"formulation", formulation_name(c.les.formulation)},
                          {"closure", closure_name(c.les.closure)},
                          {"coarse_cells", c.les.coarse_cells},
                          {"filter", filter_name(c.les.filter)},
                          {"split", split_name(c.les.split)},
                          {"trajectory", c.les.trajectory},
                          {"steps", c.les.steps},
                          {"t_end", c.les.t_end},
                          {"save_every", c.les.save_every}}},
      {"analysis", toml::table{{"input", c.analysis.input.string()}, {"ratio", c.analysis.ratio}}},
  };
  std::ostringstream os;
  os << root << "\n";
  return os.str();
}

}  // namespace sgles
