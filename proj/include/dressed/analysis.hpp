#pragma once

// Spectra, peak interpolation and small nonlinear least-squares fits.

#include <Eigen/Dense>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dressed {

/// Probability (or any real quantity) sampled on a time grid, us.
struct Signal {
  std::vector<double> t;
  std::vector<double> y;
};

enum class Window { rect, hann };

inline const char* window_name(Window w) { return w == Window::rect ? "rect" : "hann"; }

struct Spectrum {
  std::vector<double> freqs;  // MHz, uniform from 0
  std::vector<double> power;
  Window window = Window::hann;
  int zero_pad_factor = 1;

  double bin_width() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline double uniform_step(const std::vector<double>& t) {
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw std::invalid_argument("sampling grid must be strictly increasing");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6 * dt) {
      throw std::invalid_argument("power_spectrum: sampling is not uniform");
    }
  }
  return dt;
}

}  // namespace detail

/// One-sided periodogram of the mean-subtracted, windowed, zero-padded signal.
/// With a rect window and no padding the powers sum to sum |y - mean|^2.
inline Spectrum power_spectrum(const Signal& s, Window window = Window::hann, int zero_pad_factor = 1) {
  if (s.t.size() != s.y.size()) throw std::invalid_argument("power_spectrum: t and y differ in length");
  if (s.t.size() < 8) throw std::invalid_argument("power_spectrum: need at least 8 samples");
  if (zero_pad_factor < 1) throw std::invalid_argument("power_spectrum: zero_pad_factor must be >= 1");
  const double dt = detail::uniform_step(s.t);
  const std::size_t n = s.y.size();
  const std::size_t m = n * static_cast<std::size_t>(zero_pad_factor);
  const std::size_t bins = m / 2 + 1;

  const double mean = std::accumulate(s.y.begin(), s.y.end(), 0.0) / static_cast<double>(n);
  double* in = fftw_alloc_real(m);
  fftw_complex* out = fftw_alloc_complex(bins);
  for (std::size_t i = 0; i < m; ++i) in[i] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (window == Window::hann) w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    in[i] = (s.y[i] - mean) * w;
  }
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), in, out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);

  Spectrum spec;
  spec.window = window;
  spec.zero_pad_factor = zero_pad_factor;
  spec.freqs.resize(bins);
  spec.power.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    spec.freqs[k] = static_cast<double>(k) / (static_cast<double>(m) * dt);
    const bool single = k == 0 || (m % 2 == 0 && k == m / 2);
    spec.power[k] = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / static_cast<double>(m) * (single ? 1.0 : 2.0);
  }
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  return spec;
}

struct Peak {
  double frequency = 0.0;
  double power = 0.0;
  bool at_edge = false;  // argmax on the band boundary, not interpolated
};

/// Three-point parabolic vertex through (-1, a), (0, b), (+1, c).
inline std::pair<double, double> parabolic_vertex(double a, double b, double c) {
  const double denom = a - 2.0 * b + c;
  if (denom == 0.0) return {0.0, b};
  const double delta = 0.5 * (a - c) / denom;
  return {delta, b - 0.25 * (a - c) * delta};
}

/// Largest power in [lo, hi] refined by parabolic interpolation.
inline Peak find_peak(const Spectrum& spec, double lo, double hi) {
  std::size_t first = spec.freqs.size(), last = 0;
  for (std::size_t k = 0; k < spec.freqs.size(); ++k) {
    if (spec.freqs[k] >= lo && spec.freqs[k] <= hi) {
      first = std::min(first, k);
      last = k;
    }
  }
  if (first > last || first == spec.freqs.size()) throw std::invalid_argument("find_peak: no bins in band");
  std::size_t best = first;
  for (std::size_t k = first; k <= last; ++k) {
    if (spec.power[k] > spec.power[best]) best = k;
  }
  Peak p{spec.freqs[best], spec.power[best], false};
  if (best == first || best == last) {
    p.at_edge = true;
    return p;
  }
  const auto [delta, value] = parabolic_vertex(spec.power[best - 1], spec.power[best], spec.power[best + 1]);
  p.frequency += delta * spec.bin_width();
  p.power = value;
  return p;
}

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> sigmas;  // 1 sigma; +inf along unidentifiable directions
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;
  double initial_residual_norm = 0.0;
  bool converged = false;
  bool identifiable = true;
  int iterations = 0;

  double value(const std::string& name) const { return values.at(index(name)); }
  double sigma(const std::string& name) const { return sigmas.at(index(name)); }

 private:
  std::size_t index(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("FitResult: no parameter " + name);
    return static_cast<std::size_t>(it - names.begin());
  }
};

struct FitOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10;
};

/// Levenberg-Marquardt with diagonal (Marquardt) scaling. `eval(p, r, J)`
/// fills the residual vector r = model - data and its Jacobian.
template <typename Eval>
FitResult levenberg_marquardt(Eval&& eval, Eigen::VectorXd p, std::vector<std::string> names, std::size_t n_points,
                              const FitOptions& opt = {}) {
  const auto np = p.size();
  Eigen::VectorXd r(static_cast<Eigen::Index>(n_points));
  Eigen::MatrixXd J(static_cast<Eigen::Index>(n_points), np);
  eval(p, r, J);
  double cost = r.squaredNorm();
  FitResult out;
  out.names = std::move(names);
  out.initial_residual_norm = std::sqrt(cost);

  double lambda = 1e-3;
  int it = 0;
  bool converged = cost == 0.0;
  Eigen::VectorXd r_try(r.size());
  Eigen::MatrixXd J_try(J.rows(), J.cols());
  while (!converged && it < opt.max_iterations) {
    ++it;
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    const double floor = std::max(A.diagonal().maxCoeff() * 1e-12, std::numeric_limits<double>::min());
    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = A;
      for (Eigen::Index i = 0; i < np; ++i) damped(i, i) += lambda * std::max(A(i, i), floor);
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      const Eigen::VectorXd trial = p + step;
      eval(trial, r_try, J_try);
      const double c = r_try.squaredNorm();
      if (std::isfinite(c) && c < cost) {
        const double decrease = cost - c;
        p = trial;
        r.swap(r_try);
        J.swap(J_try);
        cost = c;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (step.norm() <= opt.step_tolerance * (p.norm() + opt.step_tolerance) || cost == 0.0 ||
            decrease <= 1e-15 * cost) {
          converged = true;
        }
      } else {
        lambda *= 10.0;
        // No downhill step left at machine precision.
        if (lambda > 1e16 || step.norm() <= opt.step_tolerance * (p.norm() + opt.step_tolerance)) {
          converged = step.norm() <= opt.step_tolerance * (p.norm() + opt.step_tolerance) ||
                      g.norm() <= 1e-12 * std::max(1.0, std::sqrt(cost));
          break;
        }
      }
    }
    if (!accepted) break;
  }

  out.values.assign(p.data(), p.data() + np);
  out.residual_norm = std::sqrt(cost);
  out.converged = converged;
  out.iterations = it;

  // Identifiability from the column-normalized Jacobian.
  Eigen::VectorXd col = J.colwise().norm().transpose();
  Eigen::MatrixXd Jn = J;
  for (Eigen::Index i = 0; i < np; ++i) {
    if (col(i) == 0.0) {
      out.identifiable = false;
    } else {
      Jn.col(i) /= col(i);
    }
  }
  if (out.identifiable) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Jn);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-10 * sv(0)) out.identifiable = false;
  }
  const auto dof = static_cast<double>(n_points) - static_cast<double>(np);
  const double s2 = dof > 0 ? cost / dof : 0.0;
  out.sigmas.assign(static_cast<std::size_t>(np), std::numeric_limits<double>::infinity());
  out.covariance = Eigen::MatrixXd::Constant(np, np, std::numeric_limits<double>::infinity());
  if (out.identifiable) {
    out.covariance = s2 * (J.transpose() * J).inverse();
    for (Eigen::Index i = 0; i < np; ++i) out.sigmas[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, out.covariance(i, i)));
  }
  return out;
}

struct LorentzianParams {
  double center = 0.0;
  double hwhm = 1.0;
  double depth = 0.0;
  double offset = 0.0;
};

/// offset - depth / (1 + ((x - center)/hwhm)^2)
inline double lorentzian_dip(const LorentzianParams& q, double x) {
  const double u = (x - q.center) / q.hwhm;
  return q.offset - q.depth / (1.0 + u * u);
}

/// Fit of an inverted Lorentzian; parameters named center, hwhm, depth, offset.
inline FitResult fit_lorentzian(const std::vector<double>& x, const std::vector<double>& y, const LorentzianParams& init,
                                const FitOptions& opt = {}) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_lorentzian: x and y differ in length");
  if (x.size() < 5) throw std::invalid_argument("fit_lorentzian: need at least 5 points");
  auto eval = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    const double c = p(0), w = p(1), d = p(2), o = p(3);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double u = (x[i] - c) / w;
      const double den = 1.0 + u * u;
      const double l = 1.0 / den;
      r(k) = o - d * l - y[i];
      // d/du of -d/(1+u^2) is 2 d u / (1+u^2)^2
      const double du = 2.0 * d * u * l * l;
      J(k, 0) = du * (-1.0 / w);
      J(k, 1) = du * (-u / w);
      J(k, 2) = -l;
      J(k, 3) = 1.0;
    }
  };
  Eigen::VectorXd p0(4);
  p0 << init.center, init.hwhm, init.depth, init.offset;
  auto res = levenberg_marquardt(eval, p0, {"center", "hwhm", "depth", "offset"}, x.size(), opt);
  res.values[1] = std::abs(res.values[1]);
  return res;
}

struct DampedCosineParams {
  double freq = 0.0;
  double decay_rate = 0.0;
  double amp = 0.0;
  double offset = 0.0;
  double phase = 0.0;
};

/// offset + amp cos(2 pi freq t + phase) exp(-decay_rate t)
inline double damped_cosine(const DampedCosineParams& q, double t) {
  return q.offset + q.amp * std::cos(2.0 * std::numbers::pi * q.freq * t + q.phase) * std::exp(-q.decay_rate * t);
}

inline double wrap_phase(double phi) {
  const double two_pi = 2.0 * std::numbers::pi;
  phi = std::fmod(phi, two_pi);
  if (phi <= -std::numbers::pi) phi += two_pi;
  if (phi > std::numbers::pi) phi -= two_pi;
  return phi;
}

/// Fit of a damped cosine; parameters named freq, decay_rate, amp, offset,
/// phase. The result is normalized to amp >= 0, freq >= 0, phase in (-pi, pi].
inline FitResult fit_damped_cosine(const std::vector<double>& t, const std::vector<double>& y,
                                   const DampedCosineParams& init, const FitOptions& opt = {}) {
  if (t.size() != y.size()) throw std::invalid_argument("fit_damped_cosine: t and y differ in length");
  if (t.size() < 8) throw std::invalid_argument("fit_damped_cosine: need at least 8 points");
  const double two_pi = 2.0 * std::numbers::pi;
  auto eval = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    const double f = p(0), k = p(1), a = p(2), o = p(3), ph = p(4);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double arg = two_pi * f * t[i] + ph;
      const double e = std::exp(-k * t[i]);
      const double c = std::cos(arg), s = std::sin(arg);
      r(row) = o + a * c * e - y[i];
      J(row, 0) = -a * s * e * two_pi * t[i];
      J(row, 1) = -t[i] * a * c * e;
      J(row, 2) = c * e;
      J(row, 3) = 1.0;
      J(row, 4) = -a * s * e;
    }
  };
  Eigen::VectorXd p0(5);
  p0 << init.freq, init.decay_rate, init.amp, init.offset, init.phase;
  auto res = levenberg_marquardt(eval, p0, {"freq", "decay_rate", "amp", "offset", "phase"}, t.size(), opt);
  double& f = res.values[0];
  double& a = res.values[2];
  double& ph = res.values[4];
  if (a < 0.0) {
    a = -a;
    ph += std::numbers::pi;
  }
  if (f < 0.0) {
    f = -f;
    ph = -ph;
  }
  ph = wrap_phase(ph);
  return res;
}

/// Initial guess for an inverted Lorentzian from the data alone: the minimum
/// refined parabolically, the baseline from the outer samples, the width from
/// the half-depth crossings.
inline LorentzianParams guess_lorentzian(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 5) throw std::invalid_argument("guess_lorentzian: need at least 5 points");
  const auto n = x.size();
  // find_peak on the inverted data
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (y[i] < y[best]) best = i;
  }
  LorentzianParams q;
  q.center = x[best];
  double ymin = y[best];
  if (best > 0 && best + 1 < n) {
    const double step = 0.5 * (x[best + 1] - x[best - 1]);
    const auto [delta, value] = parabolic_vertex(-y[best - 1], -y[best], -y[best + 1]);
    q.center += delta * step;
    ymin = -value;
  }
  q.offset = std::max(y.front(), y.back());
  q.depth = std::max(q.offset - ymin, 0.0);
  if (q.depth == 0.0) {
    q.hwhm = 0.25 * (x.back() - x.front());
    return q;
  }
  const double half = q.offset - 0.5 * q.depth;
  double lo = x.front(), hi = x.back();
  for (std::size_t i = best; i > 0; --i) {
    if (y[i - 1] >= half) {
      lo = x[i - 1] + (half - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1]);
      break;
    }
  }
  for (std::size_t i = best; i + 1 < n; ++i) {
    if (y[i + 1] >= half) {
      hi = x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i]);
      break;
    }
  }
  q.hwhm = std::max(0.5 * (hi - lo), 1e-3 * (x.back() - x.front()));
  return q;
}

/// Initial guess for a damped cosine: frequency from the spectrum peak
/// (uniform grid required), amplitude and phase by projection at that frequency.
inline DampedCosineParams guess_damped_cosine(const std::vector<double>& t, const std::vector<double>& y) {
  const auto n = static_cast<double>(y.size());
  DampedCosineParams q;
  q.offset = std::accumulate(y.begin(), y.end(), 0.0) / n;
  const auto spec = power_spectrum({t, y}, Window::hann, 8);
  double var = 0.0;
  for (double v : y) var += (v - q.offset) * (v - q.offset);
  if (var == 0.0) return q;  // flat data: amp stays 0
  q.freq = find_peak(spec, spec.freqs[1], spec.freqs.back()).frequency;
  double c = 0.0, s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double arg = 2.0 * std::numbers::pi * q.freq * t[i];
    c += (y[i] - q.offset) * std::cos(arg);
    s += (y[i] - q.offset) * std::sin(arg);
  }
  q.amp = 2.0 * std::hypot(c, s) / n;
  q.phase = std::atan2(-s, c);
  return q;
}

}  // namespace dressed
