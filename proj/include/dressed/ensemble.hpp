#pragma once

// Semi-classical Monte Carlo of an NV ensemble: Poisson-placed spins with
// random <111> axes, secular dipolar couplings, the drive rescaling of the
// effective coupling, and distributions of the central-spin coupling Delta
// and the strongest bath pair coupling R_dd.

#include "dressed/experiments.hpp"
#include "dressed/model.hpp"
#include "dressed/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dressed {

using Vec3 = Eigen::Vector3d;

/// Electron-electron dipolar constant mu0 g^2 muB^2 / (4 pi h), MHz nm^3.
inline constexpr double dipolar_constant = 52.0;
/// Carbon sites per nm^3 per ppm (1.76e23 cm^-3 * 1e-6).
inline constexpr double sites_per_nm3_per_ppm = 1.76e-4;

inline const std::array<Vec3, 4>& nv_axes() {
  static const std::array<Vec3, 4> axes = [] {
    const double s = 1.0 / std::sqrt(3.0);
    return std::array<Vec3, 4>{Vec3(s, s, s), Vec3(s, -s, -s), Vec3(-s, s, -s), Vec3(-s, -s, s)};
  }();
  return axes;
}

struct SpinSite {
  Vec3 position = Vec3::Zero();  // nm
  int axis_class = 0;            // index into nv_axes()
};

enum class RddMode { per_configuration, per_spin };

struct EnsembleConfig {
  double density_ppm = 50.0;
  double box_edge = 40.0;       // nm
  double cutoff_radius = 15.0;  // nm
  int n_configs = 2000;
  std::optional<DrivePair> drive;  // applied to off-axis classes; nullopt: not driven
  std::uint64_t seed = 1;
  int central_axis_class = 0;
  RddMode rdd_mode = RddMode::per_configuration;

  void validate() const {
    if (!(density_ppm > 0.0)) throw std::invalid_argument("EnsembleConfig: density_ppm must be positive");
    if (!(cutoff_radius > 0.0)) throw std::invalid_argument("EnsembleConfig: cutoff_radius must be positive");
    if (!(box_edge > 2.0 * cutoff_radius)) throw std::invalid_argument("EnsembleConfig: box_edge must exceed 2 * cutoff_radius");
    if (n_configs < 1) throw std::invalid_argument("EnsembleConfig: n_configs must be >= 1");
    if (central_axis_class < 0 || central_axis_class > 3) {
      throw std::invalid_argument("EnsembleConfig: central_axis_class must be 0..3");
    }
    if (drive && (drive->omega_plus < 0.0 || drive->omega_minus < 0.0 ||
                  drive->omega_plus + drive->omega_minus == 0.0)) {
      throw std::invalid_argument("EnsembleConfig: drive amplitudes must be non-negative and not both zero");
    }
  }

  double expected_sites() const { return density_ppm * sites_per_nm3_per_ppm * box_edge * box_edge * box_edge; }
  Vec3 center() const { return Vec3::Constant(0.5 * box_edge); }
};

/// Poisson point process in the box; deterministic in (seed, index).
inline std::vector<SpinSite> sample_configuration(const EnsembleConfig& cfg, std::uint64_t config_index) {
  cfg.validate();
  auto rng = stream_rng(cfg.seed, config_index);
  std::poisson_distribution<long> count(cfg.expected_sites());
  std::uniform_real_distribution<double> coord(0.0, cfg.box_edge);
  std::uniform_int_distribution<int> cls(0, 3);
  const long n = count(rng);
  std::vector<SpinSite> sites(static_cast<std::size_t>(n));
  for (auto& s : sites) {
    const double x = coord(rng), y = coord(rng), z = coord(rng);
    s.position = Vec3(x, y, z);
    s.axis_class = cls(rng);
  }
  return sites;
}

/// Secular zz coupling (J0/r^3) [zi.zj - 3 (zi.r)(zj.r)], MHz.
inline double pairwise_coupling(const SpinSite& a, const SpinSite& b) {
  const Vec3 d = b.position - a.position;
  const double r = d.norm();
  if (r == 0.0) throw std::invalid_argument("pairwise_coupling: coincident positions");
  const Vec3 u = d / r;
  const Vec3& za = nv_axes()[static_cast<std::size_t>(a.axis_class)];
  const Vec3& zb = nv_axes()[static_cast<std::size_t>(b.axis_class)];
  return dipolar_constant / (r * r * r) * (za.dot(zb) - 3.0 * za.dot(u) * zb.dot(u));
}

/// nu_eff for a driven spin, or the bare coupling when not driven.
inline double drive_rescaled(const std::optional<DrivePair>& drive, double nu) {
  return drive ? effective_coupling(drive->omega_plus, drive->omega_minus, nu) : nu;
}

/// Delta = sqrt(sum nu_eff^2) over off-axis sites within the cutoff of `central`.
inline double delta_statistic(const std::vector<SpinSite>& sites, const SpinSite& central,
                              const std::optional<DrivePair>& drive, double cutoff_radius) {
  double sum = 0.0;
  for (const auto& s : sites) {
    if (s.axis_class == central.axis_class) continue;
    const double r = (s.position - central.position).norm();
    if (r == 0.0 || r > cutoff_radius) continue;
    const double v = drive_rescaled(drive, pairwise_coupling(central, s));
    sum += v * v;
  }
  return std::sqrt(sum);
}

/// Off-axis bath sites: within the cutoff of the central site, other axis class.
inline std::vector<SpinSite> off_axis_bath(const std::vector<SpinSite>& sites, const SpinSite& central, double cutoff) {
  std::vector<SpinSite> out;
  for (const auto& s : sites) {
    if (s.axis_class == central.axis_class) continue;
    const double r = (s.position - central.position).norm();
    if (r > 0.0 && r <= cutoff) out.push_back(s);
  }
  return out;
}

/// Strongest |nu_eff| over bath pairs of different axis classes closer than
/// `cutoff`. Per configuration: one value or none (fewer than two sites or no
/// pair in range). Per spin: each site's strongest partner.
inline std::vector<double> rdd_statistic(const std::vector<SpinSite>& bath, const std::optional<DrivePair>& drive,
                                         double cutoff, RddMode mode = RddMode::per_configuration) {
  std::vector<double> best(bath.size(), -1.0);
  for (std::size_t i = 0; i < bath.size(); ++i) {
    for (std::size_t j = i + 1; j < bath.size(); ++j) {
      if (bath[i].axis_class == bath[j].axis_class) continue;
      const double r = (bath[j].position - bath[i].position).norm();
      if (r == 0.0 || r > cutoff) continue;
      const double v = std::abs(drive_rescaled(drive, pairwise_coupling(bath[i], bath[j])));
      best[i] = std::max(best[i], v);
      best[j] = std::max(best[j], v);
    }
  }
  std::vector<double> out;
  if (mode == RddMode::per_spin) {
    for (double b : best) {
      if (b >= 0.0) out.push_back(b);
    }
  } else {
    const double m = best.empty() ? -1.0 : *std::max_element(best.begin(), best.end());
    if (m >= 0.0) out.push_back(m);
  }
  return out;
}

/// Mean nearest-neighbour distance of the sites within `radius` of `center`
/// (neighbours searched over the whole box), nm.
inline std::optional<double> mean_nearest_neighbour(const std::vector<SpinSite>& sites, const Vec3& center,
                                                    double radius) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if ((sites[i].position - center).norm() > radius) continue;
    double nn = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sites.size(); ++j) {
      if (i != j) nn = std::min(nn, (sites[j].position - sites[i].position).norm());
    }
    if (std::isfinite(nn)) {
      sum += nn;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

struct PdfSummary {
  std::optional<double> peak;  // MHz
  std::optional<double> fwhm;  // MHz
  std::vector<double> edges;   // bins.size() + 1 edges; first and last bins hold the tails
  std::vector<long> counts;
  std::size_t n_samples = 0;
};

struct PdfOptions {
  int bins = 0;             // uniform bins between the quantiles; 0 chooses from the IQR
  double lower_quantile = 0.01;
  double upper_quantile = 0.99;
  std::size_t min_samples = 100;
};

namespace detail {

inline double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

}  // namespace detail

/// Histogram with uniform bins between two quantiles plus one tail bin on each
/// side, so counts always sum to the number of samples. The peak is the mode
/// of the 3-bin moving average over the uniform bins; FWHM interpolates the
/// half-maximum crossings linearly.
inline PdfSummary pdf_summary(std::vector<double> samples, const PdfOptions& opt = {}) {
  PdfSummary out;
  out.n_samples = samples.size();
  if (samples.empty()) return out;
  std::sort(samples.begin(), samples.end());
  const double lo = detail::quantile(samples, opt.lower_quantile);
  const double hi = detail::quantile(samples, opt.upper_quantile);
  if (!(hi > lo)) {
    out.edges = {samples.front(), samples.back()};
    out.counts = {static_cast<long>(samples.size())};
    if (samples.size() >= opt.min_samples) {
      out.peak = lo;
      out.fwhm = 0.0;
    }
    return out;
  }
  int bins = opt.bins;
  if (bins <= 0) {
    const double iqr = detail::quantile(samples, 0.75) - detail::quantile(samples, 0.25);
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(samples.size()));
    bins = width > 0.0 ? static_cast<int>(std::ceil((hi - lo) / width)) : 10;
    bins = std::clamp(bins, 10, 2000);
  }
  const double w = (hi - lo) / bins;
  out.edges.push_back(samples.front());
  for (int k = 0; k <= bins; ++k) out.edges.push_back(lo + w * k);
  out.edges.push_back(samples.back());
  out.counts.assign(static_cast<std::size_t>(bins) + 2, 0);
  for (double v : samples) {
    std::size_t k;
    if (v < lo) {
      k = 0;
    } else if (v > hi) {
      k = static_cast<std::size_t>(bins) + 1;
    } else {
      k = 1 + std::min(static_cast<std::size_t>((v - lo) / w), static_cast<std::size_t>(bins) - 1);
    }
    ++out.counts[k];
  }
  if (samples.size() < opt.min_samples) return out;

  std::vector<double> smooth(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    double s = 0.0;
    int m = 0;
    for (int d = -1; d <= 1; ++d) {
      if (k + d >= 0 && k + d < bins) {
        s += static_cast<double>(out.counts[static_cast<std::size_t>(k + d + 1)]);
        ++m;
      }
    }
    smooth[static_cast<std::size_t>(k)] = s / m;
  }
  const auto top = static_cast<int>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
  auto center = [&](double k) { return lo + w * (k + 0.5); };
  out.peak = center(top);
  const double half = 0.5 * smooth[static_cast<std::size_t>(top)];
  double left = center(0), right = center(bins - 1);
  for (int k = top; k > 0; --k) {
    const double a = smooth[static_cast<std::size_t>(k - 1)], b = smooth[static_cast<std::size_t>(k)];
    if (a < half) {
      left = center(k - 1 + (half - a) / (b - a));
      break;
    }
  }
  for (int k = top; k + 1 < bins; ++k) {
    const double a = smooth[static_cast<std::size_t>(k)], b = smooth[static_cast<std::size_t>(k + 1)];
    if (b < half) {
      right = center(k + (a - half) / (a - b));
      break;
    }
  }
  out.fwhm = std::max(0.0, right - left);
  return out;
}

/// Samples of both statistics for one drive setting (nullopt: not driven).
struct EnsembleSamples {
  std::optional<DrivePair> drive;
  std::vector<double> delta;
  std::vector<double> rdd;
  std::size_t rdd_missing = 0;  // configurations with no pair in range
};

struct EnsembleRun {
  std::vector<EnsembleSamples> per_drive;
  std::vector<double> mean_nn_distance;  // per configuration with sites
};

/// Draws n_configs configurations once and evaluates every drive on each.
inline EnsembleRun run_ensemble(const EnsembleConfig& cfg, const std::vector<std::optional<DrivePair>>& drives,
                                unsigned threads = 0) {
  cfg.validate();
  struct PerConfig {
    std::vector<double> delta;
    std::vector<std::vector<double>> rdd;
    std::optional<double> nn;
  };
  const SpinSite central{cfg.center(), cfg.central_axis_class};
  const auto results = parallel_map<PerConfig>(
      static_cast<std::size_t>(cfg.n_configs),
      [&](std::size_t i) {
        const auto sites = sample_configuration(cfg, i);
        const auto bath = off_axis_bath(sites, central, cfg.cutoff_radius);
        PerConfig pc;
        for (const auto& d : drives) {
          pc.delta.push_back(delta_statistic(sites, central, d, cfg.cutoff_radius));
          pc.rdd.push_back(rdd_statistic(bath, d, cfg.cutoff_radius, cfg.rdd_mode));
        }
        pc.nn = mean_nearest_neighbour(sites, cfg.center(), cfg.cutoff_radius);
        return pc;
      },
      threads);
  EnsembleRun run;
  for (std::size_t d = 0; d < drives.size(); ++d) {
    EnsembleSamples s;
    s.drive = drives[d];
    for (const auto& pc : results) {
      s.delta.push_back(pc.delta[d]);
      if (pc.rdd[d].empty()) ++s.rdd_missing;
      s.rdd.insert(s.rdd.end(), pc.rdd[d].begin(), pc.rdd[d].end());
    }
    run.per_drive.push_back(std::move(s));
  }
  for (const auto& pc : results) {
    if (pc.nn) run.mean_nn_distance.push_back(*pc.nn);
  }
  return run;
}

struct DriveSweepRow {
  std::optional<DrivePair> drive;
  PdfSummary delta;
  PdfSummary rdd;
  std::optional<double> delta_peak_ratio;  // relative to not driven
  std::optional<double> delta_fwhm_ratio;
  std::optional<double> rdd_peak_ratio;
  std::optional<double> rdd_fwhm_ratio;
};

/// Summaries per drive with ratios relative to the first (reference) drive.
inline std::vector<DriveSweepRow> summarize_drives(const EnsembleRun& run, const PdfOptions& popt = {}) {
  std::vector<DriveSweepRow> rows;
  auto ratio = [](const std::optional<double>& a, const std::optional<double>& b) -> std::optional<double> {
    if (a && b && *b != 0.0) return *a / *b;
    return std::nullopt;
  };
  for (const auto& s : run.per_drive) {
    DriveSweepRow row;
    row.drive = s.drive;
    row.delta = pdf_summary(s.delta, popt);
    row.rdd = pdf_summary(s.rdd, popt);
    rows.push_back(std::move(row));
  }
  for (auto& row : rows) {
    row.delta_peak_ratio = ratio(row.delta.peak, rows.front().delta.peak);
    row.delta_fwhm_ratio = ratio(row.delta.fwhm, rows.front().delta.fwhm);
    row.rdd_peak_ratio = ratio(row.rdd.peak, rows.front().rdd.peak);
    row.rdd_fwhm_ratio = ratio(row.rdd.fwhm, rows.front().rdd.fwhm);
  }
  return rows;
}

/// Not-driven first, then one drive per omega_minus at fixed omega_plus.
inline std::vector<std::optional<DrivePair>> sweep_drives(double omega_plus, const std::vector<double>& omega_minus_grid) {
  if (!(omega_plus >= 0.0)) throw std::invalid_argument("sweep_drive: omega_plus must be non-negative");
  std::vector<std::optional<DrivePair>> drives{std::nullopt};
  for (double om : omega_minus_grid) {
    if (!(om >= 0.0)) throw std::invalid_argument("sweep_drive: omega_minus must be non-negative");
    if (omega_plus + om == 0.0) throw std::invalid_argument("sweep_drive: drive amplitudes are both zero");
    drives.push_back(DrivePair{omega_plus, om});
  }
  return drives;
}

inline std::vector<DriveSweepRow> sweep_drive(const EnsembleConfig& cfg, double omega_plus,
                                              const std::vector<double>& omega_minus_grid,
                                              const PdfOptions& popt = {}, unsigned threads = 0) {
  return summarize_drives(run_ensemble(cfg, sweep_drives(omega_plus, omega_minus_grid), threads), popt);
}

}  // namespace dressed
