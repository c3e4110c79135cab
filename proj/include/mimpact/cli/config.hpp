#pragma once

// Experiment configuration: JSON documents validated field by field into
// typed blocks. Every diagnostic carries the dotted path of the offending
// field.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mimpact/diffusivity.hpp"
#include "mimpact/linmodels.hpp"
#include "mimpact/marketdata.hpp"
#include "mimpact/mtim_discrete.hpp"

namespace mimpact::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Read access to one JSON object that remembers which keys were consumed,
/// so that leftovers can be reported as unknown fields.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_->contains(key); }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_->contains(key)) throw ConfigError(field(key), "required field is missing");
    return j_->at(key);
  }

  double number(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double def) { return has(key) ? number(key) : (used_.insert(key), def); }

  std::uint64_t unsigned_int(const std::string& key) {
    const auto& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    // Sweep grids carry doubles; accept integral values that are exact in a double.
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (x >= 0.0 && x <= 9007199254740992.0 && std::floor(x) == x) return static_cast<std::uint64_t>(x);
    }
    throw ConfigError(field(key), "expected a non-negative integer");
  }
  std::uint64_t unsigned_int(const std::string& key, std::uint64_t def) {
    return has(key) ? unsigned_int(key) : (used_.insert(key), def);
  }
  std::size_t size(const std::string& key) { return static_cast<std::size_t>(unsigned_int(key)); }
  std::size_t size(const std::string& key, std::size_t def) { return static_cast<std::size_t>(unsigned_int(key, def)); }

  bool boolean(const std::string& key, bool def) {
    used_.insert(key);
    if (!has(key)) return def;
    const auto& v = j_->at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& def) { return has(key) ? string(key) : (used_.insert(key), def); }

  /// A number or a non-empty array of numbers.
  std::vector<double> numbers(const std::string& key) {
    const auto& v = raw(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) throw ConfigError(field(key), "expected a number or a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    return has(key) ? numbers(key) : (used_.insert(key), def);
  }

  Fields object(const std::string& key) { return Fields(raw(key), field(key)); }

  template <class T>
  T choice(const std::string& key, const std::vector<std::pair<std::string, T>>& options, std::optional<T> def = {}) {
    if (!has(key) && def) {
      used_.insert(key);
      return *def;
    }
    const std::string s = string(key);
    std::string names;
    for (const auto& [name, value] : options) {
      if (name == s) return value;
      names += (names.empty() ? "" : ", ") + name;
    }
    throw ConfigError(field(key), "unknown value '" + s + "' (expected one of: " + names + ")");
  }

  /// Throws for the first key that was never read.
  void finish() const {
    for (const auto& [k, v] : j_->items())
      if (!used_.count(k)) throw ConfigError(field(k), "unknown field");
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

/// Where a linear model comes from. An optional fit step simulates `n`
/// observations from the source model and re-estimates it with `p` lags.
struct ModelSource {
  struct PowerLaw {
    std::size_t p = 0;
    double d_sum = 0.0, d_exponent = 0.0, b_exponent = 0.0, b_scale = 1.0;
  };
  struct FitStep {
    std::size_t n = 0;
    std::size_t p = 0;
    ModelKind kind = ModelKind::TIM;
  };
  std::variant<fs::path, LinearModel, PowerLaw> source;
  std::optional<FitStep> fit;
};

inline ModelKind parse_kind(Fields& f, const std::string& key) {
  return f.choice<ModelKind>(key, {{"TIM", ModelKind::TIM}, {"Hasbrouck", ModelKind::Hasbrouck}}, ModelKind::TIM);
}

inline ModelSource parse_model_source(Fields f, const fs::path& base_dir) {
  ModelSource m;
  const int kinds = f.has("file") + f.has("coefficients") + f.has("power_law");
  if (kinds != 1) throw ConfigError(f.path(), "exactly one of 'file', 'coefficients', 'power_law' is required");
  if (f.has("file")) {
    m.source = base_dir / f.string("file");
  } else if (f.has("coefficients")) {
    auto c = f.object("coefficients");
    const auto kind = parse_kind(c, "kind");
    auto b = c.numbers("b");
    auto d = c.numbers("d");
    if (b.size() != d.size() + 1) throw ConfigError(c.field("b"), "must have one more entry than 'd'");
    auto model = LinearModel::zeros(kind, d.size());
    model.b = b;
    model.d = d;
    if (kind == ModelKind::Hasbrouck) {
      model.a = c.numbers("a");
      model.c = c.numbers("c");
      if (model.a.size() != d.size() || model.c.size() != d.size())
        throw ConfigError(c.path(), "'a' and 'c' must have as many entries as 'd'");
    }
    c.finish();
    m.source = std::move(model);
  } else {
    auto pl = f.object("power_law");
    ModelSource::PowerLaw g;
    g.p = pl.size("p");
    if (g.p == 0) throw ConfigError(pl.field("p"), "must be >= 1");
    g.d_sum = pl.number("d_sum");
    g.d_exponent = pl.number("d_exponent");
    g.b_exponent = pl.number("b_exponent");
    g.b_scale = pl.number("b_scale", 1.0);
    pl.finish();
    m.source = g;
  }
  if (f.has("fit")) {
    auto ft = f.object("fit");
    ModelSource::FitStep s;
    s.n = ft.size("n");
    s.p = ft.size("p");
    s.kind = parse_kind(ft, "kind");
    if (s.p == 0) throw ConfigError(ft.field("p"), "must be >= 1");
    ft.finish();
    m.fit = s;
  }
  f.finish();
  return m;
}

inline KernelSpec parse_kernel(Fields f, KernelRole role) {
  const std::string type = f.string("type");
  KernelSpec k;
  if (type == "exponential") k = KernelSpec::exponential(f.number("rate"), role);
  else if (type == "power_law") k = KernelSpec::power_law(f.number("exponent"), role);
  else throw ConfigError(f.field("type"), "unknown kernel type '" + type + "' (expected exponential or power_law)");
  f.finish();
  return k;
}

// ---------------------------------------------------------------------------
// Command blocks
// ---------------------------------------------------------------------------

struct IngestConfig {
  std::optional<fs::path> messages, orderbook;
  std::optional<LmfFlowParams> lmf;
  LobsterOptions lobster;
  bool merge = true;
  std::chrono::nanoseconds clip_head{std::chrono::minutes(30)}, clip_tail{std::chrono::minutes(30)};
  PriceConvention convention = PriceConvention::PostTrade;
};

struct CalibrateConfig {
  std::optional<fs::path> data;
  std::optional<ModelSource> simulate_from;
  std::size_t n = 0;
  std::size_t p = 1;
  ModelKind kind = ModelKind::TIM;
  bool standard_errors = true;
};

struct TrajectoryConfig {
  ModelSource model;
  std::size_t T = 1, horizon = 1;
  std::vector<double> delta_v{1.0};
  std::vector<int> kappa{1};
  enum class Method { Auto, Closed, Iter } method = Method::Auto;
};

struct ContinuousConfig {
  std::vector<double> alpha{1.0};
  double V = 1.0, lam = 1.0, beta = 1.0, rho = 1.0, T = 1.0;
  double t_max = 0.0;  // 0: 3T
  double dt = 0.0;     // 0: t_max / 1000
  std::optional<double> oracle_dt;
};

struct DiscreteConfig {
  DiscreteParams params;
  std::size_t paths = 0;
};

struct DiffusivityConfig {
  StationaryFlowParams flow;
  KernelSpec kernel_g = KernelSpec::power_law(0.25, KernelRole::PriceG);
  LongMemoryOptions options;
};

struct SweepConfig {
  std::string target;
  json base;
  std::vector<std::pair<std::string, std::vector<double>>> axes;  // sorted by name, values ascending
  std::vector<std::string> metrics;
  std::size_t max_cells = 100'000;
};

using CommandBlock = std::variant<IngestConfig, CalibrateConfig, TrajectoryConfig, ContinuousConfig, DiscreteConfig,
                                  DiffusivityConfig, SweepConfig>;

struct ExperimentConfig {
  int format_version = 1;
  fs::path output_dir;
  std::uint64_t seed = 0;
  std::string command;
  CommandBlock block;
  fs::path base_dir;  // directory of the config file; relative input paths resolve here
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"ingest",     "calibrate",   "trajectory", "continuous",
                                              "discrete",   "diffusivity", "sweep"};
  return names;
}

// ---------------------------------------------------------------------------
// Block parsers
// ---------------------------------------------------------------------------

inline IngestConfig parse_ingest(Fields f, const fs::path& base_dir) {
  IngestConfig c;
  const bool lobster = f.has("messages") || f.has("orderbook");
  if (lobster == f.has("lmf")) throw ConfigError(f.path(), "give either 'messages' + 'orderbook' or 'lmf'");
  if (lobster) {
    c.messages = base_dir / f.string("messages");
    c.orderbook = base_dir / f.string("orderbook");
    c.lobster.asset_id = f.string("asset_id", "");
    const double start = f.number("session_start_s", 34200.0), end = f.number("session_end_s", 57600.0);
    if (!(end > start)) throw ConfigError(f.field("session_end_s"), "must exceed session_start_s");
    c.lobster.session = {static_cast<std::int64_t>(std::llround(start * 1e9)),
                         static_cast<std::int64_t>(std::llround(end * 1e9))};
    c.lobster.include_hidden = f.boolean("include_hidden", c.lobster.include_hidden);
    c.lobster.drop_odd_lots = f.boolean("drop_odd_lots", c.lobster.drop_odd_lots);
    c.lobster.sign = f.choice<ExecutionSign>(
        "sign", {{"limit_order_side", ExecutionSign::LimitOrderSide}, {"as_recorded", ExecutionSign::AsRecorded}},
        ExecutionSign::LimitOrderSide);
  } else {
    auto l = f.object("lmf");
    LmfFlowParams p;
    p.n_metaorders = l.size("n_metaorders");
    p.size_tail_exponent = l.number("size_tail_exponent");
    p.horizon = l.size("horizon");
    p.child_size = static_cast<std::int64_t>(l.unsigned_int("child_size", 1));
    p.max_length = l.size("max_length", 0);
    l.finish();
    c.lmf = p;
  }
  c.merge = f.boolean("merge", true);
  // Synthetic flow has no trading session to trim, so clipping defaults off there.
  const double clip_default = lobster ? 30.0 : 0.0;
  const double head = f.number("clip_head_min", clip_default), tail = f.number("clip_tail_min", clip_default);
  if (head < 0 || tail < 0) throw ConfigError(f.field("clip_head_min"), "clip durations must be >= 0");
  c.clip_head = std::chrono::nanoseconds(std::llround(head * 60e9));
  c.clip_tail = std::chrono::nanoseconds(std::llround(tail * 60e9));
  c.convention = f.choice<PriceConvention>(
      "convention", {{"post_trade", PriceConvention::PostTrade}, {"pre_trade", PriceConvention::PreTrade}},
      PriceConvention::PostTrade);
  f.finish();
  return c;
}

inline CalibrateConfig parse_calibrate(Fields f, const fs::path& base_dir) {
  CalibrateConfig c;
  if (f.has("data") == f.has("simulate")) throw ConfigError(f.path(), "give exactly one of 'data' or 'simulate'");
  if (f.has("data")) {
    c.data = base_dir / f.string("data");
  } else {
    auto s = f.object("simulate");
    c.simulate_from = parse_model_source(s.object("model"), base_dir);
    c.n = s.size("n");
    s.finish();
  }
  c.p = f.size("p");
  if (c.p == 0) throw ConfigError(f.field("p"), "must be >= 1");
  c.kind = parse_kind(f, "kind");
  c.standard_errors = f.boolean("standard_errors", true);
  f.finish();
  return c;
}

inline TrajectoryConfig parse_trajectory(Fields f, const fs::path& base_dir) {
  TrajectoryConfig c;
  c.model = parse_model_source(f.object("model"), base_dir);
  c.T = f.size("T");
  c.horizon = f.size("horizon");
  if (c.T == 0) throw ConfigError(f.field("T"), "must be >= 1");
  if (c.horizon < c.T) throw ConfigError(f.field("horizon"), "must be >= T");
  c.delta_v = f.numbers("delta_v", {1.0});
  c.kappa.clear();
  for (double k : f.numbers("kappa", {1.0})) {
    if (k != 0.0 && k != 1.0) throw ConfigError(f.field("kappa"), "entries must be 0 or 1");
    c.kappa.push_back(static_cast<int>(k));
  }
  c.method = f.choice<TrajectoryConfig::Method>("method",
                                                {{"auto", TrajectoryConfig::Method::Auto},
                                                 {"closed", TrajectoryConfig::Method::Closed},
                                                 {"iter", TrajectoryConfig::Method::Iter}},
                                                TrajectoryConfig::Method::Auto);
  f.finish();
  return c;
}

inline ContinuousConfig parse_continuous(Fields f) {
  ContinuousConfig c;
  c.alpha = f.numbers("alpha");
  c.V = f.number("V", 1.0);
  c.lam = f.number("lam");
  c.beta = f.number("beta");
  c.rho = f.number("rho");
  c.T = f.number("T");
  c.t_max = f.number("t_max", 0.0);
  c.dt = f.number("dt", 0.0);
  if (c.t_max < 0) throw ConfigError(f.field("t_max"), "must be >= 0");
  if (c.dt < 0) throw ConfigError(f.field("dt"), "must be >= 0");
  if (f.has("oracle_dt")) {
    c.oracle_dt = f.number("oracle_dt");
    if (!(*c.oracle_dt > 0)) throw ConfigError(f.field("oracle_dt"), "must be > 0");
  }
  f.finish();
  return c;
}

inline DiscreteConfig parse_discrete(Fields f) {
  DiscreteConfig c;
  auto& p = c.params;
  p.kernel_d = parse_kernel(f.object("kernel_d"), KernelRole::VolumeD);
  p.kernel_g = parse_kernel(f.object("kernel_g"), KernelRole::PriceG);
  p.lam = f.number("lam");
  p.alpha = f.number("alpha", 1.0);
  p.V = f.number("V", 1.0);
  p.T = f.size("T");
  p.horizon = f.size("horizon");
  p.dt = f.number("dt", 1.0);
  if (f.has("noise")) {
    auto n = f.object("noise");
    p.noise.price = n.number("price", 0.0);
    p.noise.volume = n.number("volume", 0.0);
    n.finish();
  }
  c.paths = f.size("paths", 0);
  if (c.paths == 1) throw ConfigError(f.field("paths"), "must be 0 (single path) or >= 2");
  f.finish();
  return c;
}

inline DiffusivityConfig parse_diffusivity(Fields f) {
  DiffusivityConfig c;
  c.flow.horizon = f.size("n");
  c.flow.ar_coeffs = f.has("ar") ? f.numbers("ar") : std::vector<double>{};
  c.flow.alpha = f.number("alpha", 1.0);
  c.flow.noise_std = f.number("noise_std", 0.0);
  c.flow.burn_in = f.size("burn_in", 1000);
  auto l = f.object("lmf");
  c.flow.metaorder_flow.n_metaorders = l.size("n_metaorders");
  c.flow.metaorder_flow.size_tail_exponent = l.number("size_tail_exponent");
  c.flow.metaorder_flow.child_size = static_cast<std::int64_t>(l.unsigned_int("child_size", 1));
  c.flow.metaorder_flow.max_length = l.size("max_length", 0);
  l.finish();
  c.kernel_g = parse_kernel(f.object("kernel_g"), KernelRole::PriceG);
  c.options.lag_lo = f.size("lag_lo", 10);
  c.options.lag_hi = f.size("lag_hi", 1000);
  if (f.has("spectral")) {
    auto s = f.object("spectral");
    c.options.spectral.segments = s.size("segments", 8);
    c.options.spectral.lo_bin = s.size("lo_bin", 64);
    c.options.spectral.hi_bin = s.size("hi_bin", 640);
    s.finish();
  }
  f.finish();
  return c;
}

inline SweepConfig parse_sweep(Fields f) {
  SweepConfig c;
  c.target = f.string("target");
  if (c.target != "trajectory" && c.target != "continuous" && c.target != "discrete" && c.target != "diffusivity")
    throw ConfigError(f.field("target"), "must be one of trajectory, continuous, discrete, diffusivity");
  c.base = f.raw("base");
  if (!c.base.is_object()) throw ConfigError(f.field("base"), "expected an object");
  auto g = f.object("grid");
  const json& grid = f.raw("grid");
  if (grid.empty()) throw ConfigError(f.field("grid"), "needs at least one axis");
  for (const auto& [name, vals] : grid.items()) {
    auto values = g.numbers(name);
    std::sort(values.begin(), values.end());
    c.axes.emplace_back(name, std::move(values));
  }
  std::sort(c.axes.begin(), c.axes.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  const json& metrics = f.raw("metrics");
  if (!metrics.is_array() || metrics.empty())
    throw ConfigError(f.field("metrics"), "expected a non-empty array of metric names");
  for (const auto& m : metrics) {
    if (!m.is_string()) throw ConfigError(f.field("metrics"), "metric names must be strings");
    c.metrics.push_back(m.get<std::string>());
  }
  c.max_cells = f.size("max_cells", 100'000);
  f.finish();
  return c;
}

/// Parses the block of the named command (also used per sweep cell).
inline CommandBlock parse_block(const std::string& command, const json& j, const std::string& path,
                                const fs::path& base_dir) {
  Fields f(j, path);
  if (command == "ingest") return parse_ingest(f, base_dir);
  if (command == "calibrate") return parse_calibrate(f, base_dir);
  if (command == "trajectory") return parse_trajectory(f, base_dir);
  if (command == "continuous") return parse_continuous(f);
  if (command == "discrete") return parse_discrete(f);
  if (command == "diffusivity") return parse_diffusivity(f);
  if (command == "sweep") return parse_sweep(f);
  throw ConfigError(path, "unknown command");
}

inline ExperimentConfig parse_config(const json& doc, const fs::path& base_dir = ".") {
  if (!doc.is_object() || doc.empty()) throw ConfigError("", "empty configuration; expected an object with format_version, "
                                                             "output_dir, seed and one command block");
  Fields f(doc, "");
  ExperimentConfig c;
  c.base_dir = base_dir;
  const auto version = f.unsigned_int("format_version");
  if (version != 1) throw ConfigError("format_version", "unsupported version " + std::to_string(version) + " (expected 1)");
  c.output_dir = f.string("output_dir");
  if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  c.seed = f.unsigned_int("seed", 0);

  std::vector<std::string> present;
  for (const auto& name : command_names())
    if (doc.contains(name)) present.push_back(name);
  if (present.size() != 1) {
    std::string all;
    for (const auto& n : command_names()) all += (all.empty() ? "" : ", ") + n;
    throw ConfigError("", present.empty() ? "no command block (expected exactly one of: " + all + ")"
                                          : "more than one command block ('" + present[0] + "' and '" + present[1] + "')");
  }
  c.command = present[0];
  c.block = parse_block(c.command, f.raw(c.command), c.command, base_dir);
  f.finish();
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("", "config file " + path.string() + " is empty");
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

}  // namespace mimpact::cli
