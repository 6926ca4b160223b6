#pragma once

// Acceptance scenarios: each criterion runs its scenario set, times itself
// and reports per-check measured/expected values. Shared by the acceptance
// binary and the reproduce-paper command.

#include "dressed/analysis.hpp"
#include "dressed/ensemble.hpp"
#include "dressed/experiments.hpp"
#include "dressed/propagate.hpp"

#include <chrono>
#include <complex>
#include <cstdio>
#include <numbers>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace dressed {

struct Check {
  std::string label;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string unit;
  std::string context;  // published value for comparison, if any
  bool pass = false;
  bool upper_bound = false;  // pass means measured <= expected
};

inline Check make_check(std::string label, double measured, double expected, double tolerance, std::string unit = "",
                        std::string context = "") {
  Check c{std::move(label), measured, expected, tolerance, std::move(unit), std::move(context), false};
  c.pass = std::isfinite(measured) && std::abs(measured - expected) <= tolerance;
  return c;
}

/// measured <= limit (expected reported as the limit).
inline Check make_bound_check(std::string label, double measured, double limit, std::string unit = "",
                              std::string context = "") {
  Check c{std::move(label), measured, limit, 0.0, std::move(unit), std::move(context), false, true};
  c.pass = std::isfinite(measured) && measured <= limit;
  return c;
}

struct CriterionOutcome {
  int id = 0;
  std::string title;
  double limit_seconds = 0.0;
  double seconds = 0.0;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  std::vector<std::pair<std::string, SweepResult>> sweeps;  // plotted artifacts
  std::vector<DriveSweepRow> ensemble_rows;

  bool checks_pass() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return !checks.empty();
  }
  bool within_time() const { return seconds < limit_seconds; }
  bool pass() const { return checks_pass() && within_time(); }
};

/// Random instruction list: preps, rotations, dephasing and driven segments
/// with at most one drive per transition.
inline PulseSequence random_sequence(std::mt19937_64& rng, int n_instructions) {
  std::uniform_int_distribution<int> kind(0, 9), spin(0, 1), axis(0, 6), tr(0, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PulseSequence seq;
  for (int k = 0; k < n_instructions; ++k) {
    const Spin s = spin(rng) ? Spin::B : Spin::A;
    const int c = kind(rng);
    if (c == 0) {
      seq.instructions.push_back(Prep{s, static_cast<PrepState>(axis(rng) % 5)});
    } else if (c <= 2) {
      seq.instructions.push_back(Rotate{s, static_cast<Axis>(axis(rng)), 6.0 * u(rng)});
    } else if (c == 3) {
      seq.instructions.push_back(Dephase{s, Level::zero, spin(rng) ? Level::plus : Level::minus});
    } else {
      Segment seg{2.0 * u(rng), {}};
      bool used[4] = {};
      for (int d = 0; d < 3; ++d) {
        DriveSpec ds{spin(rng) ? Spin::B : Spin::A, tr(rng) ? Transition::plus : Transition::minus, 10.0 * u(rng),
                     2.0 * u(rng) - 1.0, 6.0 * u(rng)};
        const int slot = (ds.spin == Spin::A ? 0 : 2) + (ds.transition == Transition::plus ? 0 : 1);
        if (used[slot]) continue;
        used[slot] = true;
        seg.drives.push_back(ds);
      }
      seq.instructions.push_back(seg);
    }
  }
  seq.instructions.push_back(Readout{Spin::A, ReadoutKind::P0});
  return seq;
}

namespace criteria_detail {

inline std::vector<double> grid(double a, double b, double step) {
  std::vector<double> g;
  const long n = std::lround((b - a) / step);
  for (long i = 0; i <= n; ++i) g.push_back(a + static_cast<double>(i) * step);
  return g;
}

inline SystemParams with_nu(double nu) {
  SystemParams p;
  p.nu_dip = nu;
  return p;
}

inline double value_or_nan(const SweepResult& r, const std::string& key) {
  const auto it = r.extracted.find(key);
  return it == r.extracted.end() ? std::nan("") : it->second.value;
}

template <typename F>
CriterionOutcome timed(int id, std::string title, double limit, F&& body) {
  CriterionOutcome out;
  out.id = id;
  out.title = std::move(title);
  out.limit_seconds = limit;
  const auto t0 = std::chrono::steady_clock::now();
  body(out);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline double op_unitarity_error(const Op9& u) { return (u.adjoint() * u - Op9::Identity()).cwiseAbs().maxCoeff(); }

}  // namespace criteria_detail

inline CriterionOutcome criterion_deer() {
  using namespace criteria_detail;
  return timed(1, "DEER frequencies (nu_dip = 0.250 MHz)", 10.0, [](CriterionOutcome& o) {
    const auto p = with_nu(0.25);
    const auto tau = grid(0.1, 20.0, 0.1);
    const auto sq = run_deer_scan(p, Basis::SQ, tau);
    const auto dq = run_deer_scan(p, Basis::DQ, tau);
    o.checks.push_back(make_check("SQ frequency", value_or_nan(sq, "freq"), 0.125, 0.02 * 0.125, "MHz",
                                  "0.125 +- 0.01 measured"));
    o.checks.push_back(make_check("DQ frequency", value_or_nan(dq, "freq"), 0.5, 0.02 * 0.5, "MHz",
                                  "0.495 +- 0.031 measured"));
    o.sweeps.push_back({"deer_sq", sq});
    o.sweeps.push_back({"deer_dq", dq});
  });
}

inline CriterionOutcome criterion_ramsey() {
  using namespace criteria_detail;
  return timed(2, "Ramsey shifts (nu_dip = 0.26 MHz, 100 us records)", 30.0, [](CriterionOutcome& o) {
    const auto p = with_nu(0.26);
    const auto tau = grid(0.05, 100.0, 0.05);
    struct Case {
      const char* name;
      Basis basis;
      Level level;
      double expected;
      const char* context;
    };
    const Case cases[] = {{"SQ, B in |+1>", Basis::SQ, Level::plus, 0.26, "0.26 +- 0.02 measured"},
                          {"SQ, B in |-1>", Basis::SQ, Level::minus, -0.26, "0.26 +- 0.02 measured"},
                          {"DQ, B in |+1>", Basis::DQ, Level::plus, 0.52, "0.52 +- 0.02 measured"},
                          {"DQ, B in |-1>", Basis::DQ, Level::minus, -0.52, "0.52 +- 0.02 measured"}};
    for (const auto& c : cases) {
      const auto r = run_ramsey_scan(p, c.basis, c.level, tau, 1.5);
      o.checks.push_back(make_check(std::string(c.name) + " shift", value_or_nan(r, "shift"), c.expected, 0.01, "MHz",
                                    c.context));
      if (c.level == Level::plus) o.sweeps.push_back({c.basis == Basis::SQ ? "ramsey_sq" : "ramsey_dq", r});
    }
  });
}

inline CriterionOutcome criterion_alpha() {
  using namespace criteria_detail;
  return timed(3, "alpha sweep of nu_eff (11 points)", 120.0, [](CriterionOutcome& o) {
    const auto p = with_nu(0.26);
    const auto alphas = grid(-1.0, 1.0, 0.2);
    const double tol = 0.05 * p.nu_dip / 2.0;
    for (double scale : {2.0, 10.0}) {
      const auto r = run_alpha_sweep(p, alphas, scale);
      const std::string tag = "omega_scale " + std::to_string(static_cast<int>(scale)) + " MHz";
      o.checks.push_back(make_bound_check(tag + ": max |nu_eff - law|", value_or_nan(r, "max_abs_error"), tol, "MHz"));
      const auto& dq = r.column("dq_shift");
      o.checks.push_back(make_check(tag + ": DQ shift at alpha = +1", dq.back(), p.nu_dip, 0.01, "MHz"));
      o.checks.push_back(make_check(tag + ": DQ shift at alpha = -1", dq.front(), -p.nu_dip, 0.01, "MHz"));
      if (scale == 10.0) o.sweeps.push_back({"alpha_sweep", r});
    }
  });
}

inline CriterionOutcome criterion_hh_matching() {
  using namespace criteria_detail;
  return timed(4, "Hartmann-Hahn dip centers", 120.0, [](CriterionOutcome& o) {
    const auto p = with_nu(0.26);
    const DrivePair shh{7.56, 0.0}, dhh{9.59, 4.13};
    const auto a = run_hh_rabi_sweep(p, grid(6.5, 8.5, 0.02), shh, default_hh_tau(p, shh));
    const auto b = run_hh_rabi_sweep(p, grid(9.5, 11.5, 0.02), dhh, default_hh_tau(p, dhh));
    o.checks.push_back(make_check("SHH dip center", value_or_nan(a, "center"), 7.56, 0.05, "MHz", "7.66 measured"));
    o.checks.push_back(make_check("DHH dip center", value_or_nan(b, "center"), 10.44, 0.05, "MHz", "10.51 measured"));
    o.sweeps.push_back({"hh_sweep_single", a});
    o.sweeps.push_back({"hh_sweep_double", b});
  });
}

inline CriterionOutcome criterion_transfer() {
  using namespace criteria_detail;
  return timed(5, "Polarization transfer rates", 120.0, [](CriterionOutcome& o) {
    const auto p = with_nu(0.26);
    const auto tau = grid(0.2, 40.0, 0.2);
    const auto s = run_hh_transfer(p, 7.56, {7.56, 0.0}, tau);
    const auto d = run_hh_transfer(p, hh_matching(9.59, 4.13), {9.59, 4.13}, tau);
    const double fs = value_or_nan(s, "freq"), fd = value_or_nan(d, "freq");
    o.checks.push_back(make_check("SHH transfer frequency", fs, 0.130, 0.1 * 0.130, "MHz", "about 130 kHz"));
    o.checks.push_back(make_check("DHH / SHH frequency ratio", fd / fs, 0.687, 0.05, "", "89 / 130 kHz"));
    o.notes.push_back("DHH transfer frequency " + std::to_string(fd) + " MHz");
    o.sweeps.push_back({"hh_transfer_single", s});
    o.sweeps.push_back({"hh_transfer_double", d});
  });
}

inline CriterionOutcome criterion_ensemble(int n_configs = 2000) {
  using namespace criteria_detail;
  return timed(6, "Ensemble Delta and R_dd scaling (50 ppm)", 300.0, [n_configs](CriterionOutcome& o) {
    EnsembleConfig cfg;
    cfg.density_ppm = 50.0;
    cfg.n_configs = n_configs;
    cfg.seed = 2024;
    const auto run = run_ensemble(cfg, sweep_drives(10.0, {0.0, 8.0}));
    const auto rows = summarize_drives(run);
    auto val = [](const std::optional<double>& v) { return v ? *v : std::nan(""); };
    o.checks.push_back(make_check("Delta peak ratio (10, 0) / ND", val(rows[1].delta_peak_ratio), 0.50, 0.05, "",
                                  "reduced by almost half"));
    o.checks.push_back(make_check("Delta peak ratio (10, 8) / ND", val(rows[2].delta_peak_ratio), 0.110, 0.02, "",
                                  "48 +- 10 / 390 kHz"));
    o.checks.push_back(make_check("R_dd peak ratio (10, 0) / ND", val(rows[1].rdd_peak_ratio), 0.50, 0.05));
    o.checks.push_back(make_check("R_dd peak ratio (10, 8) / ND", val(rows[2].rdd_peak_ratio), 0.110, 0.02));
    o.notes.push_back("ND Delta peak " + std::to_string(val(rows[0].delta.peak)) + " MHz, FWHM " +
                      std::to_string(val(rows[0].delta.fwhm)) + " MHz (published: 390 kHz peak)");
    o.notes.push_back("ND R_dd peak " + std::to_string(val(rows[0].rdd.peak)) + " MHz, FWHM " +
                      std::to_string(val(rows[0].rdd.fwhm)) + " MHz (published FWHM: 973 kHz)");
    o.ensemble_rows = rows;
  });
}

inline CriterionOutcome criterion_properties(int n_sequences = 1000, int n_triples = 10000) {
  using namespace criteria_detail;
  return timed(7, "Property suite", 300.0, [=](CriterionOutcome& o) {
    // Invariants over random sequences.
    {
      SystemParams p;
      p.nu_dip = -0.4;
      std::mt19937_64 rng(77);
      double worst_u = 0.0, worst_trace = 0.0, worst_eig = 0.0, worst_prob = 0.0;
      for (int k = 0; k < n_sequences; ++k) {
        const auto seq = random_sequence(rng, 20);
        for (const auto& ins : seq.instructions) {
          if (const auto* seg = std::get_if<Segment>(&ins)) {
            worst_u = std::max(worst_u, op_unitarity_error(segment_propagator(p, *seg, EvolutionMode::rwa)));
          }
        }
        const auto start = k % 2 ? TwoSpinState::maximally_mixed() : TwoSpinState{};
        const auto out = evolve(p, start, seq);
        worst_trace = std::max(worst_trace, out.trace_error());
        worst_eig = std::max(worst_eig, -out.min_eigenvalue());
        const double prob = observe(out, readout_projector(seq.readout()));
        worst_prob = std::max({worst_prob, -prob, prob - 1.0});
      }
      o.checks.push_back(make_bound_check("random sequences: max |U^dag U - 1|", worst_u, 1e-10));
      o.checks.push_back(make_bound_check("random sequences: max trace error", worst_trace, 1e-9));
      o.checks.push_back(make_bound_check("random sequences: max negative eigenvalue", worst_eig, 1e-9));
      o.checks.push_back(make_bound_check("random sequences: readout outside [0, 1]", worst_prob, 1e-12));
    }
    // Rotating-wave against full lab-frame dynamics at 60 MHz Zeeman offset.
    {
      SystemParams p;  // zeeman_A - zeeman_B = 60 MHz
      p.nu_dip = 0.26;
      const double pi = std::numbers::pi;
      struct Scenario {
        const char* name;
        TwoSpinState start;
        Segment seg;
      };
      const auto plus_x = QutritState(Ket3(std::complex<double>(0, -1) / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0));
      const Scenario scenarios[] = {
          {"single-drive spin lock", TwoSpinState::product(plus_x, QutritState::basis(Level::zero)),
           Segment{2.0 / 7.56,
                   {{Spin::A, Transition::plus, 7.56, 0.0, pi / 2}, {Spin::B, Transition::plus, 7.56, 0.0, 0.0}}}},
          {"double-drive spin lock", TwoSpinState::product(plus_x, QutritState::basis(Level::zero)),
           Segment{2.0 / 4.13,
                   {{Spin::A, Transition::plus, 10.0, 0.0, pi / 2},
                    {Spin::B, Transition::plus, 9.59, 0.0, 0.0},
                    {Spin::B, Transition::minus, 4.13, 0.0, 0.0}}}},
          {"both transitions of A", TwoSpinState::product(QutritState::bright(), QutritState::basis(Level::plus)),
           Segment{2.0 / 6.0,
                   {{Spin::A, Transition::plus, 8.0, 0.0, 0.3}, {Spin::A, Transition::minus, 6.0, 0.0, 1.1}}}},
          {"drive of A leaking to B at 60 MHz", TwoSpinState::product(plus_x, QutritState::basis(Level::zero)),
           Segment{2.0 / 10.0,
                   {{Spin::A, Transition::plus, 10.0, 0.0, pi / 2}, {Spin::B, Transition::plus, 10.0, 60.0, pi / 2}}}},
          {"detuned drives on both spins",
           TwoSpinState::product(QutritState::basis(Level::zero), QutritState::bright()),
           Segment{2.0 / 6.0,
                   {{Spin::A, Transition::plus, 6.0, 2.0, 0.0}, {Spin::B, Transition::minus, 9.0, -1.5, 0.7}}}},
      };
      for (const auto& s : scenarios) {
        PulseSequence seq;
        seq.instructions.push_back(s.seg);
        seq.instructions.push_back(Readout{Spin::A, ReadoutKind::P0});
        const auto rwa = evolve(p, s.start, seq, EvolutionMode::rwa);
        const auto lab = evolve(p, s.start, seq, EvolutionMode::lab);
        Check c = make_check(std::string("RWA vs lab fidelity: ") + s.name, fidelity(rwa, lab), 1.0, 0.01);
        o.checks.push_back(c);
      }
    }
    // Effective coupling law over random triples.
    {
      std::mt19937_64 rng(99);
      std::uniform_real_distribution<double> om(0.0, 20.0), nu(-1.0, 1.0), k(0.1, 10.0);
      double anti = 0.0, scale = 0.0, bound = 0.0;
      for (int i = 0; i < n_triples; ++i) {
        const double a = om(rng), b = om(rng), v = nu(rng), s = k(rng);
        if (a + b == 0.0) continue;
        const double f = effective_coupling(a, b, v);
        anti = std::max(anti, std::abs(f + effective_coupling(b, a, v)));
        scale = std::max(scale, std::abs(f - effective_coupling(s * a, s * b, v)));
        bound = std::max(bound, std::abs(f) - std::abs(v) / 2.0);
      }
      o.checks.push_back(make_bound_check("coupling law antisymmetry residual", anti, 1e-12, "MHz"));
      o.checks.push_back(make_bound_check("coupling law scale-invariance residual", scale, 1e-12, "MHz"));
      o.checks.push_back(make_bound_check("coupling law: max(|nu_eff| - |nu|/2)", bound, 1e-15, "MHz"));
    }
    // Fits recover noise-free synthetic data.
    {
      std::mt19937_64 rng(5);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      double worst_l = 0.0, worst_c = 0.0;
      for (int i = 0; i < 20; ++i) {
        const LorentzianParams tl{6.0 + 4.0 * u(rng), 0.05 + 0.2 * u(rng), 0.1 + 0.4 * u(rng), 0.6 + 0.4 * u(rng)};
        std::vector<double> x, y;
        for (double v = tl.center - 1.0; v <= tl.center + 1.0 + 1e-12; v += 0.02) {
          x.push_back(v);
          y.push_back(lorentzian_dip(tl, v));
        }
        const auto fl = fit_lorentzian(x, y, guess_lorentzian(x, y));
        const double truth[] = {tl.center, tl.hwhm, tl.depth, tl.offset};
        for (int k = 0; k < 4; ++k) {
          worst_l = std::max(worst_l, std::abs(fl.values[static_cast<std::size_t>(k)] - truth[k]) / std::abs(truth[k]));
        }

        const DampedCosineParams tc{0.05 + 0.5 * u(rng), 0.1 * u(rng), 0.2 + 0.3 * u(rng), 0.4 + 0.2 * u(rng),
                                    -3.0 + 6.0 * u(rng)};
        std::vector<double> t, s;
        for (int k = 1; k <= 200; ++k) {
          t.push_back(0.2 * k);
          s.push_back(damped_cosine(tc, 0.2 * k));
        }
        const auto fc = fit_damped_cosine(t, s, guess_damped_cosine(t, s));
        const double ct[] = {tc.freq, tc.decay_rate, tc.amp, tc.offset};
        for (int k = 0; k < 4; ++k) {
          const double scale_k = std::max(std::abs(ct[k]), 1e-3);
          worst_c = std::max(worst_c, std::abs(fc.values[static_cast<std::size_t>(k)] - ct[k]) / scale_k);
        }
        worst_c = std::max(worst_c, std::abs(wrap_phase(fc.values[4] - tc.phase)));
      }
      o.checks.push_back(make_bound_check("Lorentzian fit: max relative parameter error", worst_l, 1e-6));
      o.checks.push_back(make_bound_check("damped-cosine fit: max relative parameter error", worst_c, 1e-6));
    }
  });
}

inline CriterionOutcome criterion_crosstalk() {
  using namespace criteria_detail;
  return timed(8, "Cross-talk bound and dip shift", 120.0, [](CriterionOutcome& o) {
    o.checks.push_back(make_check("crosstalk_bound(10.44, 60)", crosstalk_bound(10.44, 60.0), 0.030, 0.001, "",
                                  "about 0.03"));
    const auto p = with_nu(0.26);
    const DrivePair dhh{9.59, 4.13};
    const auto g = grid(9.9, 11.0, 0.02);
    const double tau = default_hh_tau(p, dhh);
    HhSweepOptions leak;
    leak.crosstalk_detuning = 60.0;
    const auto clean = run_hh_rabi_sweep(p, g, dhh, tau);
    const auto leaky = run_hh_rabi_sweep(p, g, dhh, tau, {}, leak);
    const double shift = std::abs(value_or_nan(leaky, "center") - value_or_nan(clean, "center"));
    o.checks.push_back(make_bound_check("DHH dip shift with cross-talk", shift, 0.05, "MHz"));
    o.notes.push_back("dip centers " + std::to_string(value_or_nan(clean, "center")) + " / " +
                      std::to_string(value_or_nan(leaky, "center")) + " MHz without / with cross-talk");
    o.sweeps.push_back({"hh_sweep_crosstalk", leaky});
  });
}

inline const std::vector<std::function<CriterionOutcome()>>& all_criteria() {
  static const std::vector<std::function<CriterionOutcome()>> list{
      [] { return criterion_deer(); },        [] { return criterion_ramsey(); },
      [] { return criterion_alpha(); },       [] { return criterion_hh_matching(); },
      [] { return criterion_transfer(); },    [] { return criterion_ensemble(); },
      [] { return criterion_properties(); },  [] { return criterion_crosstalk(); }};
  return list;
}

inline std::string check_line(const Check& c) {
  char buf[256];
  if (c.upper_bound) {
    std::snprintf(buf, sizeof buf, "%s: %.6g <= %.3g %s", c.label.c_str(), c.measured, c.expected, c.unit.c_str());
  } else {
    std::snprintf(buf, sizeof buf, "%s: %.6g, expected %.6g +- %.3g %s", c.label.c_str(), c.measured, c.expected,
                  c.tolerance, c.unit.c_str());
  }
  std::string s = buf;
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

/// One line per criterion: "[PASS] 3 title (12.3 s / 120 s)".
inline std::string status_line(const CriterionOutcome& c) {
  std::string s = c.pass() ? "[PASS] " : "[FAIL] ";
  s += std::to_string(c.id) + " " + c.title + " (";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f s / limit %.0f s", c.seconds, c.limit_seconds);
  s += buf;
  s += ")";
  if (!c.within_time()) s += " runtime exceeded";
  return s;
}

}  // namespace dressed
