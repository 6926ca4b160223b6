#pragma once

// Run configuration (JSON) and experiment dispatch for the command line.

#include "dressed/ensemble.hpp"
#include "dressed/experiments.hpp"
#include "dressed/io.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#ifndef DRESSED_VERSION
#define DRESSED_VERSION "0.0.0"
#endif

namespace dressed {

inline constexpr const char* summary_schema = "dressed-summary/1";

/// Invalid configuration; `field` is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct DeerBlock {
  Basis basis = Basis::SQ;
  std::vector<double> tau;
};

struct RamseyBlock {
  Basis basis = Basis::SQ;
  RamseyControl control = Level::plus;
  std::vector<double> tau;
  double reference_offset = 1.5;
  RamseyOptions options;
};

struct AlphaBlock {
  std::vector<double> alpha;
  double omega_scale = 10.0;
  AlphaSweepOptions options;
};

struct HhSweepBlock {
  std::vector<double> omega_A;
  DrivePair drive;
  std::optional<double> tau_fixed;
  HhSweepOptions options;
};

struct HhTransferBlock {
  std::optional<double> omega_A;  // default: matching condition
  DrivePair drive;
  std::vector<double> tau;
};

struct EnsembleBlock {
  EnsembleConfig config;
  double omega_plus = 10.0;
  std::vector<double> omega_minus;
  PdfOptions pdf;
  bool raw_samples = false;
};

using ExperimentBlock = std::variant<DeerBlock, RamseyBlock, AlphaBlock, HhSweepBlock, HhTransferBlock, EnsembleBlock>;

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"deer", "ramsey", "alpha_sweep", "hh_sweep", "hh_transfer", "ensemble"};
  return names;
}

struct RunConfig {
  std::string experiment;
  SystemParams system;
  ExperimentBlock block;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  EvolutionMode mode = EvolutionMode::rwa;
  unsigned threads = 0;
  int shots = 0;
  bool t2star_envelope = false;
  bool plot = false;
  json source;  // the configuration as read, with command-line overrides applied
};

namespace config_detail {

/// Object view that records consumed keys and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key), "missing required key");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(field(key), "must be finite");
    return d;
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : (used_.insert(key), fallback); }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) throw ConfigError(field(key), "must be positive");
    return v;
  }
  double non_negative(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v >= 0.0)) throw ConfigError(field(key), "must be non-negative");
    return v;
  }

  long integer(const std::string& key, long fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed) {
    const std::string v = text(key, fallback);
    for (const auto& a : allowed) {
      if (a == v) return v;
    }
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError(field(key), "'" + v + "' is not one of: " + list);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError(field(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

/// A grid is an explicit array or {start, stop, step|points}.
inline std::vector<double> read_grid(Reader& r, const std::string& key, bool positive, std::size_t min_points) {
  const std::string f = r.field(key);
  const json& v = r.raw(key);
  std::vector<double> g;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(f + "[" + std::to_string(i) + "]", "expected a number");
      g.push_back(v[i].get<double>());
    }
  } else if (v.is_object()) {
    Reader gr(v, f);
    const double a = gr.number("start"), b = gr.number("stop");
    if (gr.has("step") == gr.has("points")) throw ConfigError(f, "give exactly one of step and points");
    long n;
    if (gr.has("step")) {
      const double step = gr.positive("step", 1.0);
      n = std::lround((b - a) / step);
      if (n < 0 || std::abs(a + n * step - b) > 1e-9 * std::max(1.0, std::abs(b))) {
        throw ConfigError(f, "stop - start must be a non-negative multiple of step");
      }
      for (long i = 0; i <= n; ++i) g.push_back(a + static_cast<double>(i) * step);
    } else {
      n = gr.integer("points", 0);
      if (n < 1) throw ConfigError(f + ".points", "must be >= 1");
      for (long i = 0; i < n; ++i) g.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / (n - 1));
    }
    gr.finish();
  } else {
    throw ConfigError(f, "expected an array or {start, stop, step}");
  }
  if (g.size() < min_points) throw ConfigError(f, "needs at least " + std::to_string(min_points) + " points");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) throw ConfigError(f, "values must be finite");
    if (positive && !(g[i] > 0.0)) throw ConfigError(f, "values must be positive");
    if (i > 0 && !(g[i] > g[i - 1])) throw ConfigError(f, "values must be strictly increasing");
  }
  return g;
}

inline DrivePair read_drive(Reader& r, const std::string& key) {
  const std::string f = r.field(key);
  const json& v = r.raw(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(f, "expected [omega_plus, omega_minus] in MHz");
  }
  DrivePair d{v[0].get<double>(), v[1].get<double>()};
  if (!(d.omega_plus >= 0.0) || !(d.omega_minus >= 0.0) || !std::isfinite(d.omega_plus) ||
      !std::isfinite(d.omega_minus)) {
    throw ConfigError(f, "amplitudes must be finite and non-negative");
  }
  return d;
}

inline Basis read_basis(Reader& r) { return r.choice("basis", "SQ", {"SQ", "DQ"}) == "SQ" ? Basis::SQ : Basis::DQ; }

inline SystemParams read_system(const json& j) {
  Reader r(j, "system");
  SystemParams p;
  p.D = r.positive("D", p.D);
  p.zeeman_A = r.number("zeeman_A", p.zeeman_A);
  p.zeeman_B = r.number("zeeman_B", p.zeeman_B);
  p.nu_dip = r.number("nu_dip", p.nu_dip);
  if (r.has("t2star_A")) p.t2star_A = r.positive("t2star_A", 1.0);
  if (r.has("t2star_B")) p.t2star_B = r.positive("t2star_B", 1.0);
  r.finish();
  return p;
}

inline ExperimentBlock read_block(const std::string& kind, const json& j) {
  Reader r(j, kind);
  if (kind == "deer") {
    DeerBlock b;
    b.basis = read_basis(r);
    b.tau = read_grid(r, "tau", true, 8);
    r.finish();
    return b;
  }
  if (kind == "ramsey") {
    RamseyBlock b;
    b.basis = read_basis(r);
    const bool has_level = r.has("control_level"), has_drive = r.has("control_drive");
    if (has_level && has_drive) throw ConfigError(r.field("control_level"), "give control_level or control_drive, not both");
    if (has_drive) {
      b.control = read_drive(r, "control_drive");
    } else {
      const auto lv = r.choice("control_level", "+1", {"+1", "0", "-1"});
      b.control = lv == "+1" ? Level::plus : lv == "0" ? Level::zero : Level::minus;
    }
    b.tau = read_grid(r, "tau", true, 8);
    b.reference_offset = r.number("reference_offset", b.reference_offset);
    b.options.window = r.choice("window", "hann", {"hann", "rect"}) == "hann" ? Window::hann : Window::rect;
    b.options.zero_pad_factor = static_cast<int>(r.integer("zero_pad_factor", b.options.zero_pad_factor));
    if (b.options.zero_pad_factor < 1) throw ConfigError(r.field("zero_pad_factor"), "must be >= 1");
    b.options.band = r.non_negative("band", b.options.band);
    r.finish();
    return b;
  }
  if (kind == "alpha_sweep") {
    AlphaBlock b;
    b.alpha = read_grid(r, "alpha", false, 1);
    for (double a : b.alpha) {
      if (a < -1.0 || a > 1.0) throw ConfigError(r.field("alpha"), "values must lie in [-1, 1]");
    }
    b.omega_scale = r.positive("omega_scale", b.omega_scale);
    b.options.reference_offset = r.number("reference_offset", b.options.reference_offset);
    b.options.dt = r.positive("dt", b.options.dt);
    b.options.record = r.positive("record", b.options.record);
    r.finish();
    return b;
  }
  if (kind == "hh_sweep") {
    HhSweepBlock b;
    b.omega_A = read_grid(r, "omega_A", true, 5);
    b.drive = read_drive(r, "drive");
    if (r.has("tau_fixed")) b.tau_fixed = r.positive("tau_fixed", 1.0);
    b.options.noise_floor = r.non_negative("noise_floor", b.options.noise_floor);
    if (r.has("crosstalk_detuning")) {
      b.options.crosstalk_detuning = r.number("crosstalk_detuning");
      if (*b.options.crosstalk_detuning == 0.0) throw ConfigError(r.field("crosstalk_detuning"), "must be nonzero");
    }
    r.finish();
    return b;
  }
  if (kind == "hh_transfer") {
    HhTransferBlock b;
    b.drive = read_drive(r, "drive");
    if (r.has("omega_A")) b.omega_A = r.positive("omega_A", 1.0);
    b.tau = read_grid(r, "tau", true, 8);
    r.finish();
    return b;
  }
  EnsembleBlock b;
  auto& c = b.config;
  c.density_ppm = r.positive("density_ppm", c.density_ppm);
  c.box_edge = r.positive("box_edge", c.box_edge);
  c.cutoff_radius = r.positive("cutoff_radius", c.cutoff_radius);
  const long n = r.integer("n_configs", c.n_configs);
  if (n < 1 || n > 100000000) throw ConfigError(r.field("n_configs"), "must be between 1 and 1e8");
  c.n_configs = static_cast<int>(n);
  const long cls = r.integer("central_axis_class", c.central_axis_class);
  if (cls < 0 || cls > 3) throw ConfigError(r.field("central_axis_class"), "must be 0..3");
  c.central_axis_class = static_cast<int>(cls);
  c.rdd_mode = r.choice("rdd_mode", "per_configuration", {"per_configuration", "per_spin"}) == "per_spin"
                   ? RddMode::per_spin
                   : RddMode::per_configuration;
  if (!(c.box_edge > 2.0 * c.cutoff_radius)) throw ConfigError(r.field("box_edge"), "must exceed 2 * cutoff_radius");
  b.omega_plus = r.non_negative("omega_plus", b.omega_plus);
  if (r.has("omega_minus")) b.omega_minus = read_grid(r, "omega_minus", false, 1);
  else b.omega_minus = {0.0, 8.0};
  for (double om : b.omega_minus) {
    if (om < 0.0) throw ConfigError(r.field("omega_minus"), "values must be non-negative");
    if (om + b.omega_plus == 0.0) throw ConfigError(r.field("omega_minus"), "drive amplitudes are both zero");
  }
  const long bins = r.integer("bins", 0);
  if (bins < 0) throw ConfigError(r.field("bins"), "must be >= 0 (0 chooses automatically)");
  b.pdf.bins = static_cast<int>(bins);
  b.raw_samples = r.boolean("raw_samples", false);
  r.finish();
  return b;
}

}  // namespace config_detail

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> mode;
  bool plot = false;
};

/// Validates a whole configuration tree; nothing is computed here.
inline RunConfig parse_run_config(json j, const Overrides& ov = {}) {
  using namespace config_detail;
  if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
  if (ov.seed) j["seed"] = *ov.seed;
  if (ov.output_dir) j["output_dir"] = *ov.output_dir;
  if (ov.mode) j["mode"] = *ov.mode;
  if (ov.plot) j["plot"] = true;

  Reader r(j, "");
  RunConfig c;
  c.experiment = r.choice("experiment", "", experiment_names());
  c.system = r.has("system") ? read_system(r.raw("system")) : SystemParams{};
  if (!r.has(c.experiment)) throw ConfigError(c.experiment, "missing parameter block for this experiment");
  c.block = read_block(c.experiment, r.raw(c.experiment));
  c.output_dir = r.text("output_dir", c.output_dir);
  const long seed = r.integer("seed", 0);
  if (seed < 0) throw ConfigError("seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.mode = r.choice("mode", "rwa", {"rwa", "lab"}) == "lab" ? EvolutionMode::lab : EvolutionMode::rwa;
  if (c.mode == EvolutionMode::lab && c.experiment == "ensemble") {
    throw ConfigError("mode", "the ensemble experiment has no time evolution");
  }
  const long threads = r.integer("threads", 0);
  if (threads < 0) throw ConfigError("threads", "must be non-negative");
  c.threads = static_cast<unsigned>(threads);
  const long shots = r.integer("shots", 0);
  if (shots < 0) throw ConfigError("shots", "must be non-negative");
  c.shots = static_cast<int>(shots);
  c.t2star_envelope = r.boolean("t2star_envelope", false);
  if (c.t2star_envelope && !c.system.t2star_A) throw ConfigError("t2star_envelope", "needs system.t2star_A");
  c.plot = r.boolean("plot", false);
  r.finish();
  c.source = std::move(j);
  return c;
}

inline RunConfig parse_run_config_text(const std::string& text, const Overrides& ov = {}) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("not valid JSON: ") + e.what());
  }
  return parse_run_config(std::move(j), ov);
}

/// Files produced by one run, keyed by file name, plus the summary record.
struct RunOutput {
  std::vector<std::pair<std::string, std::string>> files;
  json summary;
  std::vector<std::string> warnings;
};

/// {measured, expected, tolerance, pass}; a missing measurement fails.
inline json criterion(std::optional<double> measured, double expected, double tolerance) {
  const bool pass = measured && std::abs(*measured - expected) <= tolerance;
  return json{{"measured", json_optional(measured)},
              {"expected", json_number(expected)},
              {"tolerance", json_number(tolerance)},
              {"pass", pass}};
}

namespace run_detail {

inline std::optional<double> extracted(const SweepResult& r, const std::string& key) {
  const auto it = r.extracted.find(key);
  if (it == r.extracted.end()) return std::nullopt;
  return it->second.value;
}

inline double level_value(Level m) { return m == Level::plus ? 1.0 : m == Level::minus ? -1.0 : 0.0; }

inline json sweep_criteria(const RunConfig& c, const SweepResult& r) {
  json cr = json::object();
  const double nu = c.system.nu_dip;
  if (c.experiment == "deer") {
    const double e = *extracted(r, "expected_freq");
    cr["frequency"] = criterion(extracted(r, "freq"), e, 0.02 * e);
  } else if (c.experiment == "ramsey") {
    const auto& b = std::get<RamseyBlock>(c.block);
    const double basis = b.basis == Basis::SQ ? 1.0 : 2.0;
    double m_eff;
    if (const auto* lv = std::get_if<Level>(&b.control)) {
      m_eff = level_value(*lv);
    } else {
      const auto& d = std::get<DrivePair>(b.control);
      m_eff = (d.omega_plus + d.omega_minus) > 0.0 ? effective_coupling_factor(d.omega_plus, d.omega_minus) : 0.0;
    }
    cr["shift"] = criterion(extracted(r, "shift"), basis * m_eff * nu, 0.01);
  } else if (c.experiment == "alpha_sweep") {
    cr["max_abs_error"] = criterion(extracted(r, "max_abs_error"), 0.0, 0.05 * std::abs(nu) / 2.0);
  } else if (c.experiment == "hh_sweep") {
    if (const auto e = extracted(r, "expected_center")) cr["dip_center"] = criterion(extracted(r, "center"), *e, 0.05);
  } else if (c.experiment == "hh_transfer") {
    if (const auto e = extracted(r, "expected_freq")) {
      cr["transfer_frequency"] = criterion(extracted(r, "freq"), *e, 0.1 * std::abs(*e));
    }
  }
  return cr;
}

inline SweepResult run_sweep(const RunConfig& c, const ExperimentOptions& opt) {
  return std::visit(
      [&](const auto& b) -> SweepResult {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, DeerBlock>) {
          return run_deer_scan(c.system, b.basis, b.tau, opt);
        } else if constexpr (std::is_same_v<B, RamseyBlock>) {
          return run_ramsey_scan(c.system, b.basis, b.control, b.tau, b.reference_offset, opt, b.options);
        } else if constexpr (std::is_same_v<B, AlphaBlock>) {
          return run_alpha_sweep(c.system, b.alpha, b.omega_scale, opt, b.options);
        } else if constexpr (std::is_same_v<B, HhSweepBlock>) {
          const double tau = b.tau_fixed ? *b.tau_fixed : default_hh_tau(c.system, b.drive);
          return run_hh_rabi_sweep(c.system, b.omega_A, b.drive, tau, opt, b.options);
        } else if constexpr (std::is_same_v<B, HhTransferBlock>) {
          const double omega_A = b.omega_A ? *b.omega_A : hh_matching(b.drive.omega_plus, b.drive.omega_minus);
          return run_hh_transfer(c.system, omega_A, b.drive, b.tau, opt);
        } else {
          throw std::logic_error("run_sweep: not a sweep experiment");
        }
      },
      c.block);
}

inline RunOutput run_ensemble_block(const RunConfig& c, const EnsembleBlock& b) {
  EnsembleConfig cfg = b.config;
  cfg.seed = c.seed;
  const auto drives = sweep_drives(b.omega_plus, b.omega_minus);
  const auto run = run_ensemble(cfg, drives, c.threads);
  const auto rows = summarize_drives(run, b.pdf);

  RunOutput out;
  out.files.push_back({"signal.csv", ensemble_csv(rows)});
  std::vector<std::pair<std::string, PdfSummary>> hist_delta, hist_all;
  for (const auto& row : rows) {
    hist_delta.push_back({"delta " + drive_label(row.drive), row.delta});
    hist_all.push_back({"delta " + drive_label(row.drive), row.delta});
    hist_all.push_back({"rdd " + drive_label(row.drive), row.rdd});
  }
  out.files.push_back({"histogram.csv", histogram_csv(hist_all)});
  if (b.raw_samples) out.files.push_back({"samples.csv", ensemble_samples_csv(run)});
  if (c.plot) out.files.push_back({"plot.svg", pdf_svg("ensemble: Delta distribution", hist_delta)});

  json ex = json::object();
  ex["experiment"] = "ensemble";
  ex["outcome"] = "ok";
  json jrows = json::array();
  json cr = json::object();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    jrows.push_back(json{{"drive", drive_label(row.drive)},
                         {"delta", pdf_json(row.delta)},
                         {"rdd", pdf_json(row.rdd)},
                         {"delta_peak_ratio", json_optional(row.delta_peak_ratio)},
                         {"delta_fwhm_ratio", json_optional(row.delta_fwhm_ratio)},
                         {"rdd_peak_ratio", json_optional(row.rdd_peak_ratio)},
                         {"rdd_fwhm_ratio", json_optional(row.rdd_fwhm_ratio)},
                         {"rdd_missing_configurations", run.per_drive[i].rdd_missing}});
    if (row.drive) {
      const double f = std::abs(effective_coupling_factor(row.drive->omega_plus, row.drive->omega_minus));
      const std::string label = drive_label(row.drive);
      cr["delta_peak_ratio " + label] = criterion(row.delta_peak_ratio, f, 0.02);
      cr["rdd_peak_ratio " + label] = criterion(row.rdd_peak_ratio, f, 0.02);
    }
  }
  ex["rows"] = jrows;
  double mean = 0.0, var = 0.0;
  const auto& nn = run.mean_nn_distance;
  for (double v : nn) mean += v;
  if (!nn.empty()) mean /= static_cast<double>(nn.size());
  for (double v : nn) var += (v - mean) * (v - mean);
  const double sem = nn.size() > 1 ? std::sqrt(var / static_cast<double>(nn.size() - 1) / static_cast<double>(nn.size())) : 0.0;
  ex["mean_nearest_neighbour_distance"] =
      nn.empty() ? json(nullptr) : quantity_json(Quantity{mean, sem, "nm"});
  ex["warnings"] = json::array();
  out.summary = json{{"extracted", ex}, {"criteria", cr}};
  return out;
}

}  // namespace run_detail

/// Runs the configured experiment. Output file contents depend only on the
/// configuration (seed included) and the software version.
inline RunOutput execute(const RunConfig& c) {
  RunOutput out;
  json extracted, criteria;
  if (const auto* eb = std::get_if<EnsembleBlock>(&c.block)) {
    out = run_detail::run_ensemble_block(c, *eb);
    extracted = out.summary["extracted"];
    criteria = out.summary["criteria"];
  } else {
    ExperimentOptions opt;
    opt.mode = c.mode;
    opt.threads = c.threads;
    opt.shots = c.shots;
    opt.seed = c.seed;
    opt.t2star_envelope = c.t2star_envelope;
    const SweepResult r = run_detail::run_sweep(c, opt);
    out.files.push_back({"signal.csv", sweep_csv(r)});
    if (c.plot) out.files.push_back({"plot.svg", sweep_svg(r)});
    extracted = sweep_extracted_json(r);
    criteria = run_detail::sweep_criteria(c, r);
    out.warnings = r.warnings;
  }
  out.summary = json{{"config", c.source},
                     {"extracted", extracted},
                     {"criteria", criteria},
                     {"version", json{{"software", DRESSED_VERSION}, {"schema", summary_schema}}},
                     {"seed", c.seed}};
  out.files.push_back({"summary.json", out.summary.dump(2) + "\n"});
  return out;
}

inline void write_run_output(const RunOutput& out, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : out.files) write_text_file((std::filesystem::path(dir) / name).string(), content);
}

}  // namespace dressed
