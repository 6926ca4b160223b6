#pragma once

// Sweep engines for the two-spin experiments: DEER, Ramsey (static or driven
// control spin), the drive-asymmetry sweep, and spin-lock cross polarization.
// Every grid point is an independent closed-system run; results are assembled
// by index so they do not depend on the number of workers.

#include "dressed/analysis.hpp"
#include "dressed/propagate.hpp"
#include "dressed/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dressed {

struct Quantity {
  double value = 0.0;
  double sigma = 0.0;
  std::string unit;
};

struct SweepResult {
  std::string experiment;
  std::string axis_name;
  std::string axis_unit;
  std::vector<double> axis;
  std::vector<std::pair<std::string, std::vector<double>>> columns;
  std::map<std::string, Quantity> extracted;
  std::string outcome = "ok";
  std::vector<std::string> warnings;
  std::map<std::string, FitResult> fits;
  std::vector<std::pair<std::string, Spectrum>> spectra;

  const std::vector<double>& column(const std::string& name) const {
    for (const auto& [n, v] : columns) {
      if (n == name) return v;
    }
    throw std::out_of_range("SweepResult: no column " + name);
  }
};

struct ExperimentOptions {
  EvolutionMode mode = EvolutionMode::rwa;
  EvolveOptions evolve;
  unsigned threads = 0;  // 0: hardware concurrency
  int shots = 0;         // > 0 adds binomial readout noise
  std::uint64_t seed = 0;
  bool t2star_envelope = false;  // decay (P - 1/2) by exp(-tau/T2*) of spin A
};

/// Applies f to every index in [0, n) on a pool of threads; out[i] = f(i).
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t n, F&& f, unsigned threads = 0) {
  std::vector<T> out(n);
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        out[i] = f(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

namespace detail {

inline void check_grid(const std::vector<double>& grid, const char* what, std::size_t min_points) {
  if (grid.size() < min_points) {
    throw std::invalid_argument(std::string(what) + ": need at least " + std::to_string(min_points) + " points");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw std::invalid_argument(std::string(what) + ": non-finite grid value");
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw std::invalid_argument(std::string(what) + ": grid must be strictly increasing");
    }
  }
}

inline void check_positive_times(const std::vector<double>& tau, const char* what) {
  check_grid(tau, what, 8);
  if (!(tau.front() > 0.0)) throw std::invalid_argument(std::string(what) + ": tau values must be positive");
}

/// Optional dephasing envelope and shot noise on a probability series.
inline void post_process(std::vector<double>& y, const std::vector<double>& tau, const SystemParams& p,
                         const ExperimentOptions& opt, bool envelope, std::uint64_t stream) {
  if (envelope && opt.t2star_envelope && p.t2star_A) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.5 + (y[i] - 0.5) * std::exp(-tau[i] / *p.t2star_A);
  }
  if (opt.shots > 0) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      auto rng = stream_rng(stream_seed(opt.seed, stream), i);
      std::binomial_distribution<int> b(opt.shots, std::clamp(y[i], 0.0, 1.0));
      y[i] = static_cast<double>(b(rng)) / opt.shots;
    }
  }
}

inline std::vector<double> run_grid(const SystemParams& p, const std::vector<double>& grid,
                                    const std::function<PulseSequence(double)>& build, const ExperimentOptions& opt) {
  return parallel_map<double>(
      grid.size(), [&](std::size_t i) { return run_sequence(p, build(grid[i]), opt.mode, opt.evolve); }, opt.threads);
}

inline bool is_uniform(const std::vector<double>& t) {
  const double dt = t[1] - t[0];
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6 * dt) return false;
  }
  return true;
}

}  // namespace detail

/// Minimum fitted amplitude for an oscillation to count as present.
inline constexpr double oscillation_floor = 1e-3;

/// Damped-cosine fit with data-driven initialization; sets the outcome to
/// "no-oscillation" for flat or unidentifiable signals.
inline void fit_oscillation(SweepResult& r, const std::vector<double>& t, const std::vector<double>& y,
                            const std::string& key) {
  DampedCosineParams init;
  if (detail::is_uniform(t)) {
    init = guess_damped_cosine(t, y);
  } else {
    init.offset = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  }
  const auto fit = fit_damped_cosine(t, y, init);
  r.fits[key] = fit;
  const bool present = fit.identifiable && fit.value("amp") > oscillation_floor && fit.value("freq") > 0.0;
  if (!present) {
    r.outcome = "no-oscillation";
    return;
  }
  r.extracted["freq"] = {fit.value("freq"), fit.sigma("freq"), "MHz"};
  r.extracted["decay_rate"] = {fit.value("decay_rate"), fit.sigma("decay_rate"), "1/us"};
  r.extracted["amp"] = {fit.value("amp"), fit.sigma("amp"), ""};
  if (!fit.converged) r.warnings.push_back("damped-cosine fit did not converge");
}

/// DEER echo scan on A; the fitted frequency is nu_dip/2 (SQ) or 2 nu_dip (DQ).
inline SweepResult run_deer_scan(const SystemParams& p, Basis basis, const std::vector<double>& tau_grid,
                                 const ExperimentOptions& opt = {}) {
  p.validate();
  detail::check_positive_times(tau_grid, "run_deer_scan");
  SweepResult r;
  r.experiment = std::string("deer_") + (basis == Basis::SQ ? "sq" : "dq");
  r.axis_name = "tau";
  r.axis_unit = "us";
  r.axis = tau_grid;
  auto y = detail::run_grid(p, tau_grid, [&](double tau) { return make_deer(basis, tau); }, opt);
  detail::post_process(y, tau_grid, p, opt, true, 1);
  const double expected = (basis == Basis::SQ ? 0.5 : 2.0) * std::abs(p.nu_dip);
  r.extracted["expected_freq"] = {expected, 0.0, "MHz"};
  if (expected > 0.0 && tau_grid.back() - tau_grid.front() < 2.0 / expected) {
    r.warnings.push_back("tau grid spans fewer than two periods of the expected frequency");
  }
  fit_oscillation(r, tau_grid, y, "damped_cosine");
  r.columns.emplace_back("P0", std::move(y));
  return r;
}

struct RamseyOptions {
  Window window = Window::hann;
  int zero_pad_factor = 8;
  /// Half-width of the peak search band around the reference offset, MHz;
  /// 0 selects max(3 |nu_dip|, 0.5).
  double band = 0.0;
};

/// Ramsey record on A with B static or driven, plus the B = |0> reference.
/// The shift is the difference of the two interpolated spectrum peaks.
inline SweepResult run_ramsey_scan(const SystemParams& p, Basis basis, const RamseyControl& control,
                                   const std::vector<double>& tau_grid, double reference_offset,
                                   const ExperimentOptions& opt = {}, const RamseyOptions& ropt = {}) {
  p.validate();
  detail::check_positive_times(tau_grid, "run_ramsey_scan");
  if (!detail::is_uniform(tau_grid)) throw std::invalid_argument("run_ramsey_scan: tau grid must be uniform");
  if (!(reference_offset > 0.0)) throw std::invalid_argument("run_ramsey_scan: reference_offset must be positive");
  const double dt = tau_grid[1] - tau_grid[0];
  const double nyquist = 0.5 / dt;
  const double highest = reference_offset + 2.0 * std::abs(p.nu_dip);
  if (!(highest < nyquist)) {
    throw std::invalid_argument("run_ramsey_scan: sampling violates Nyquist for reference_offset + 2|nu_dip| = " +
                                std::to_string(highest) + " MHz (Nyquist " + std::to_string(nyquist) + " MHz)");
  }
  SweepResult r;
  r.experiment = std::string("ramsey_") + (basis == Basis::SQ ? "sq" : "dq");
  r.axis_name = "tau";
  r.axis_unit = "us";
  r.axis = tau_grid;
  if (const auto* drive = std::get_if<DrivePair>(&control)) {
    const double strongest = std::max(drive->omega_plus, drive->omega_minus);
    if (strongest > 0.0 && strongest <= 4.0 * std::abs(p.nu_dip)) {
      r.warnings.push_back("drive amplitudes are not large compared with nu_dip; the effective coupling law may not hold");
    }
  }

  auto y = detail::run_grid(p, tau_grid, [&](double tau) { return make_ramsey(basis, control, reference_offset, tau); }, opt);
  auto y_ref = detail::run_grid(p, tau_grid, [&](double tau) { return make_ramsey(basis, Level::zero, reference_offset, tau); }, opt);
  detail::post_process(y, tau_grid, p, opt, true, 1);
  detail::post_process(y_ref, tau_grid, p, opt, true, 2);

  const auto spec = power_spectrum({tau_grid, y}, ropt.window, ropt.zero_pad_factor);
  const auto spec_ref = power_spectrum({tau_grid, y_ref}, ropt.window, ropt.zero_pad_factor);
  const double half = ropt.band > 0.0 ? ropt.band : std::max(3.0 * std::abs(p.nu_dip), 0.5);
  const double lo = std::max(reference_offset - half, 2.0 * spec.bin_width());
  const double hi = std::min(reference_offset + half, spec.freqs.back());
  const auto peak = find_peak(spec, lo, hi);
  const auto peak_ref = find_peak(spec_ref, lo, hi);
  if (peak.at_edge || peak_ref.at_edge) r.warnings.push_back("spectrum peak on the search band edge");
  const double resolution = spec.bin_width();
  r.extracted["peak_frequency"] = {peak.frequency, resolution, "MHz"};
  r.extracted["reference_peak_frequency"] = {peak_ref.frequency, resolution, "MHz"};
  r.extracted["shift"] = {peak.frequency - peak_ref.frequency, resolution, "MHz"};
  r.columns.emplace_back("P0", std::move(y));
  r.columns.emplace_back("P0_reference", std::move(y_ref));
  r.spectra.emplace_back("signal", spec);
  r.spectra.emplace_back("reference", spec_ref);
  return r;
}

/// Drive amplitudes for asymmetry alpha at a given scale: O+ + O- = 2 scale,
/// (O+ - O-)/(O+ + O-) = alpha.
inline DrivePair alpha_drive(double alpha, double omega_scale) {
  return {omega_scale * (1.0 + alpha), omega_scale * (1.0 - alpha)};
}

/// Closed-form nu_eff for asymmetry alpha: 1/2 * 2 alpha/(1 + alpha^2) * nu.
inline double alpha_effective_coupling(double alpha, double nu_dip) {
  return 0.5 * (2.0 * alpha / (1.0 + alpha * alpha)) * nu_dip;
}

struct AlphaSweepOptions {
  double reference_offset = 1.5;  // MHz
  double dt = 0.02;               // us
  double record = 100.0;          // us
  RamseyOptions ramsey;
};

/// DQ Ramsey with B doubly driven at each alpha; nu_eff = DQ shift / 2.
inline SweepResult run_alpha_sweep(const SystemParams& p, const std::vector<double>& alpha_grid, double omega_scale,
                                   const ExperimentOptions& opt = {}, const AlphaSweepOptions& aopt = {}) {
  p.validate();
  detail::check_grid(alpha_grid, "run_alpha_sweep", 1);
  for (double a : alpha_grid) {
    if (a < -1.0 || a > 1.0) throw std::invalid_argument("run_alpha_sweep: alpha must lie in [-1, 1]");
  }
  if (!(omega_scale > 0.0)) throw std::invalid_argument("run_alpha_sweep: omega_scale must be positive");
  SweepResult r;
  r.experiment = "alpha_sweep";
  r.axis_name = "alpha";
  r.axis_unit = "";
  r.axis = alpha_grid;
  if (omega_scale <= 4.0 * std::abs(p.nu_dip)) {
    r.warnings.push_back("omega_scale <= 4 nu_dip: outside the validity range of the effective coupling law");
  }
  std::vector<double> tau;
  const auto n = static_cast<std::size_t>(std::llround(aopt.record / aopt.dt));
  for (std::size_t i = 1; i <= n; ++i) tau.push_back(static_cast<double>(i) * aopt.dt);

  ExperimentOptions inner = opt;
  inner.threads = 1;
  const auto shifts = parallel_map<double>(
      alpha_grid.size(),
      [&](std::size_t i) {
        ExperimentOptions o = inner;
        o.seed = stream_seed(opt.seed, i);
        const auto res = run_ramsey_scan(p, Basis::DQ, alpha_drive(alpha_grid[i], omega_scale), tau,
                                         aopt.reference_offset, o, aopt.ramsey);
        return res.extracted.at("shift").value;
      },
      opt.threads);
  std::vector<double> measured, predicted, error;
  double worst = 0.0;
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    measured.push_back(shifts[i] / 2.0);
    predicted.push_back(alpha_effective_coupling(alpha_grid[i], p.nu_dip));
    error.push_back(measured.back() - predicted.back());
    worst = std::max(worst, std::abs(error.back()));
  }
  const double resolution = 1.0 / (aopt.record * aopt.ramsey.zero_pad_factor);
  r.extracted["max_abs_error"] = {worst, resolution / 2.0, "MHz"};
  r.extracted["nu_eff_at_max_alpha"] = {measured.back(), resolution / 2.0, "MHz"};
  r.extracted["nu_eff_at_min_alpha"] = {measured.front(), resolution / 2.0, "MHz"};
  r.columns.emplace_back("dq_shift", shifts);
  r.columns.emplace_back("nu_eff_measured", measured);
  r.columns.emplace_back("nu_eff_predicted", predicted);
  r.columns.emplace_back("error", error);
  return r;
}

/// Default spin-lock duration for a dip scan: half a transfer period, where
/// the transferred polarization is largest.
inline double default_hh_tau(const SystemParams& p, const DrivePair& drive_B) {
  const double nu = std::abs(effective_coupling(drive_B.omega_plus, drive_B.omega_minus, p.nu_dip));
  if (nu == 0.0) throw std::invalid_argument("default_hh_tau: effective coupling vanishes for this drive");
  return 1.0 / (2.0 * nu);
}

struct HhSweepOptions {
  double noise_floor = 0.02;  // minimum dip depth, probability units
  std::optional<double> crosstalk_detuning;  // MHz; A's drive also reaches B
};

/// Spin-lock signal of A against A's Rabi frequency; inverted Lorentzian fit.
inline SweepResult run_hh_rabi_sweep(const SystemParams& p, const std::vector<double>& omegaA_grid,
                                     const DrivePair& drive_B, double tau_fixed, const ExperimentOptions& opt = {},
                                     const HhSweepOptions& hopt = {}) {
  p.validate();
  detail::check_grid(omegaA_grid, "run_hh_rabi_sweep", 5);
  if (!(omegaA_grid.front() > 0.0)) throw std::invalid_argument("run_hh_rabi_sweep: omega_A values must be positive");
  if (!(tau_fixed > 0.0)) throw std::invalid_argument("run_hh_rabi_sweep: tau_fixed must be positive");
  SweepResult r;
  r.experiment = "hh_sweep";
  r.axis_name = "omega_A";
  r.axis_unit = "MHz";
  r.axis = omegaA_grid;
  auto y = detail::run_grid(
      p, omegaA_grid, [&](double om) { return make_spinlock(om, drive_B, tau_fixed, hopt.crosstalk_detuning); }, opt);
  detail::post_process(y, omegaA_grid, p, opt, false, 3);
  r.extracted["tau_fixed"] = {tau_fixed, 0.0, "us"};
  if (drive_B.omega_plus > 0.0 || drive_B.omega_minus > 0.0) {
    r.extracted["expected_center"] = {hh_matching(drive_B.omega_plus, drive_B.omega_minus), 0.0, "MHz"};
  }
  const double top = *std::max_element(y.begin(), y.end());
  const double bottom = *std::min_element(y.begin(), y.end());
  if (top - bottom < hopt.noise_floor) {
    r.outcome = "no-dip";
  } else {
    const auto fit = fit_lorentzian(omegaA_grid, y, guess_lorentzian(omegaA_grid, y));
    r.fits["lorentzian"] = fit;
    if (!fit.identifiable || fit.value("depth") < hopt.noise_floor) {
      r.outcome = "no-dip";
    } else {
      r.extracted["center"] = {fit.value("center"), fit.sigma("center"), "MHz"};
      r.extracted["hwhm"] = {fit.value("hwhm"), fit.sigma("hwhm"), "MHz"};
      r.extracted["depth"] = {fit.value("depth"), fit.sigma("depth"), ""};
      if (!fit.converged) r.warnings.push_back("Lorentzian fit did not converge");
    }
  }
  r.columns.emplace_back("P0", std::move(y));
  return r;
}

/// Spin-lock transfer curve at fixed omega_A: A's spin-lock signal and B's
/// population in the upper dressed state, with a damped-cosine fit of A.
inline SweepResult run_hh_transfer(const SystemParams& p, double omegaA, const DrivePair& drive_B,
                                   const std::vector<double>& tau_grid, const ExperimentOptions& opt = {}) {
  p.validate();
  detail::check_positive_times(tau_grid, "run_hh_transfer");
  SweepResult r;
  r.experiment = "hh_transfer";
  r.axis_name = "tau";
  r.axis_unit = "us";
  r.axis = tau_grid;
  const bool driven = drive_B.omega_plus > 0.0 || drive_B.omega_minus > 0.0;
  if (driven) {
    const double match = hh_matching(drive_B.omega_plus, drive_B.omega_minus);
    if (std::abs(omegaA - match) > 0.05 * match) {
      r.warnings.push_back("omega_A differs from the matching condition by more than 5%");
    }
    r.extracted["expected_freq"] = {
        std::abs(effective_coupling(drive_B.omega_plus, drive_B.omega_minus, p.nu_dip)), 0.0, "MHz"};
  } else {
    r.warnings.push_back("NV_B is not driven: no transfer channel");
  }
  const Op9 target = driven ? on_spin(Spin::B, dressed_states(drive_B.omega_plus, drive_B.omega_minus).plus_d.projector())
                            : on_spin(Spin::B, proj(Level::plus));

  // Population of the target state before the lock segment.
  double initial_target = 0.0;
  {
    auto seq = make_spinlock(omegaA, drive_B, tau_grid.front());
    seq.instructions.erase(seq.instructions.begin() + 5, seq.instructions.end());
    initial_target = observe(evolve(p, TwoSpinState{}, seq, opt.mode, opt.evolve), target);
  }
  struct Point {
    double a = 0.0;
    double b = 0.0;
  };
  const auto pts = parallel_map<Point>(
      tau_grid.size(),
      [&](std::size_t i) {
        const auto seq = make_spinlock(omegaA, drive_B, tau_grid[i]);
        // Evolve up to the end of the lock segment to read B, then finish for A.
        PulseSequence head = seq;
        head.instructions.erase(head.instructions.begin() + 6, head.instructions.end());
        const auto mid = evolve(p, TwoSpinState{}, head, opt.mode, opt.evolve);
        PulseSequence tail;
        tail.instructions.assign(seq.instructions.begin() + 6, seq.instructions.end());
        const auto fin = evolve(p, mid, tail, opt.mode, opt.evolve);
        return Point{observe(fin, readout_projector(seq.readout())), observe(mid, target) - initial_target};
      },
      opt.threads);
  std::vector<double> a, b;
  for (const auto& pt : pts) {
    a.push_back(pt.a);
    b.push_back(pt.b);
  }
  detail::post_process(a, tau_grid, p, opt, false, 4);
  fit_oscillation(r, tau_grid, a, "damped_cosine");

  // Loss of A and gain of B at the first minimum of A's signal.
  if (r.outcome == "ok") {
    const double f = r.extracted.at("freq").value;
    const double t_ext = 0.5 / f;
    std::size_t k = 0;
    for (std::size_t i = 0; i < tau_grid.size(); ++i) {
      if (std::abs(tau_grid[i] - t_ext) < std::abs(tau_grid[k] - t_ext)) k = i;
    }
    r.extracted["tau_first_extremum"] = {tau_grid[k], 0.0, "us"};
    r.extracted["loss_A"] = {1.0 - a[k], 0.0, ""};
    r.extracted["gain_B"] = {b[k], 0.0, ""};
  }
  r.columns.emplace_back("P0_A", std::move(a));
  r.columns.emplace_back("gain_B", std::move(b));
  return r;
}

}  // namespace dressed
