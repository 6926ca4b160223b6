#pragma once

// Time evolution of the joint NV_A (x) NV_B state through a PulseSequence.
//
// States are always held in the bare rotating frame: every level rotates at
// its own bare energy (D Sz^2 + gamma B Sz), so free evolution only carries the
// Ising phase. Segment drives are phase-referenced to the start of their
// segment, which makes evolution compositional segment by segment.

#include "dressed/sequence.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dressed {

enum class EvolutionMode { rwa, lab };

/// Joint two-qutrit state: a pure ket or a density matrix.
class TwoSpinState {
 public:
  // |0,0>
  TwoSpinState() { psi_(3 * index_of(Level::zero) + index_of(Level::zero)) = 1.0; }

  static TwoSpinState product(const QutritState& a, const QutritState& b) {
    return pure(Ket9(tensor(a.amplitudes(), b.amplitudes())));
  }

  static TwoSpinState pure(const Ket9& psi) {
    if (std::abs(psi.squaredNorm() - 1.0) > 1e-10) throw contract_violation("TwoSpinState: ket is not normalized");
    TwoSpinState s;
    s.psi_ = psi;
    return s;
  }

  static TwoSpinState density(const Op9& rho) {
    TwoSpinState s;
    s.pure_ = false;
    s.psi_ = Ket9::Zero();
    s.rho_ = rho;
    s.check_density();
    return s;
  }

  static TwoSpinState maximally_mixed() { return density(Op9::Identity() / 9.0); }

  bool is_pure() const { return pure_; }
  const Ket9& ket() const {
    if (!pure_) throw std::logic_error("TwoSpinState: not a pure state");
    return psi_;
  }
  Op9 density_matrix() const { return pure_ ? Op9(psi_ * psi_.adjoint()) : rho_; }

  void apply(const Op9& u) {
    if (pure_) {
      psi_ = u * psi_;
    } else {
      rho_ = u * rho_ * u.adjoint();
    }
  }

  void apply_diagonal(const Ket9& phases) {
    if (pure_) {
      psi_ = phases.cwiseProduct(psi_);
    } else {
      rho_ = phases.asDiagonal() * rho_ * phases.conjugate().asDiagonal();
    }
  }

  double trace_error() const { return pure_ ? std::abs(psi_.squaredNorm() - 1.0) : std::abs(rho_.trace() - 1.0); }

  double min_eigenvalue() const {
    if (pure_) return 0.0;
    Eigen::SelfAdjointEigenSolver<Op9> eig(rho_, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
  }

  /// Reduced single-spin density matrix.
  Op3 reduced(Spin s) const {
    const Op9 rho = density_matrix();
    Op3 out = Op3::Zero();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          out(i, j) += s == Spin::A ? rho(3 * i + k, 3 * j + k) : rho(3 * k + i, 3 * k + j);
        }
      }
    }
    return out;
  }

 private:
  void check_density() const {
    if (hermiticity_error(rho_) > 1e-10) throw contract_violation("TwoSpinState: density is not Hermitian");
    if (trace_error() > 1e-10) throw contract_violation("TwoSpinState: density trace is not 1");
    if (min_eigenvalue() < -1e-9) throw contract_violation("TwoSpinState: density is not positive");
  }

  bool pure_ = true;
  Ket9 psi_ = Ket9::Zero();
  Op9 rho_ = Op9::Zero();
};

/// Named probability series on a time grid.
struct Trajectory {
  std::vector<double> times;  // us
  std::map<std::string, std::vector<double>> observables;
};

/// <psi|P|psi> or Tr(P rho), clipped to [0, 1].
inline double observe(const TwoSpinState& state, const Op9& projector) {
  if (hermiticity_error(projector) > 1e-10 || (projector * projector - projector).cwiseAbs().maxCoeff() > 1e-10) {
    throw contract_violation("observe: operator is not a Hermitian projector");
  }
  double p = 0.0;
  if (state.is_pure()) {
    p = state.ket().dot(projector * state.ket()).real();
  } else {
    p = (projector * state.density_matrix()).trace().real();
  }
  return std::clamp(p, 0.0, 1.0);
}

/// Fidelity between two states: |<a|b>|^2, <a|rho|a>, or the Uhlmann form.
inline double fidelity(const TwoSpinState& a, const TwoSpinState& b) {
  if (a.is_pure() && b.is_pure()) return std::norm(a.ket().dot(b.ket()));
  if (a.is_pure()) return (a.ket().dot(b.density_matrix() * a.ket())).real();
  if (b.is_pure()) return (b.ket().dot(a.density_matrix() * b.ket())).real();
  auto sqrtm = [](const Op9& m) {
    Eigen::SelfAdjointEigenSolver<Op9> eig(m);
    const auto vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return Op9(eig.eigenvectors() * vals.cast<cplx>().asDiagonal() * eig.eigenvectors().adjoint());
  };
  const Op9 s = sqrtm(a.density_matrix());
  const Op9 inner = sqrtm(Op9(s * b.density_matrix() * s));
  const double f = inner.trace().real();
  return f * f;
}

/// Dephases the pair (first, second) of one spin by randomizing the phase of
/// `second` relative to the other levels. This removes the pair coherence and
/// the coherence between `second` and the third level; zeroing the pair
/// coherence alone is not a positive map. Always returns a density.
inline TwoSpinState dephase_subspace(const TwoSpinState& state, Spin spin, Level first, Level second) {
  if (first == second) throw std::invalid_argument("dephase_subspace: levels must differ");
  Op9 rho = state.density_matrix();
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) {
      const int li = spin == Spin::A ? i / 3 : i % 3;
      const int lj = spin == Spin::A ? j / 3 : j % 3;
      if (li != lj && (li == index_of(second) || lj == index_of(second))) rho(i, j) = 0.0;
    }
  }
  return TwoSpinState::density(rho);
}

/// Resets one spin to `target`, keeping the other spin's reduced state.
inline TwoSpinState reset_spin(const TwoSpinState& state, Spin spin, const QutritState& target) {
  const Spin other = spin == Spin::A ? Spin::B : Spin::A;
  const Op3 rest = state.reduced(other);
  Eigen::SelfAdjointEigenSolver<Op3> eig(rest);
  const double top = eig.eigenvalues()(2);
  if (std::abs(top - 1.0) < 1e-12) {
    const Ket3 kept = eig.eigenvectors().col(2);
    const Ket3 t = target.amplitudes();
    return TwoSpinState::pure(spin == Spin::A ? Ket9(tensor(t, kept)) : Ket9(tensor(kept, t)));
  }
  const Op3 t = target.projector();
  Op9 rho = spin == Spin::A ? Op9(tensor(t, rest)) : Op9(tensor(rest, t));
  rho = 0.5 * (rho + rho.adjoint());
  return TwoSpinState::density(rho);
}

struct EvolveOptions {
  /// Lab-mode step, us; 0 selects 1/(200 f_max).
  double lab_step = 0.0;
  /// Step for segments with several drives on one transition; 0 selects
  /// 1/(200 f_rel) with f_rel the largest relative detuning.
  double rotating_step = 0.0;
};

/// Largest frequency in the lab Hamiltonian of a segment, MHz: the highest
/// bare transition frequency or drive carrier.
inline double lab_max_frequency(const SystemParams& p, std::span<const DriveSpec> drives) {
  double fmax = p.D + std::max(std::abs(p.zeeman_A), std::abs(p.zeeman_B));
  for (const auto& d : drives) {
    fmax = std::max(fmax, std::abs(transition_frequency(p, d.spin, d.transition) + d.detuning));
  }
  return fmax;
}

namespace detail {

inline Ket9 diagonal_phases(const Eigen::Matrix<double, 9, 1>& rates, double t, double sign) {
  Ket9 out;
  for (int i = 0; i < 9; ++i) out(i) = std::polar(1.0, sign * rates(i) * t);
  return out;
}

/// Midpoint-stepped propagator of the carrier-frame Hamiltonian over
/// [0, duration) in n equal steps.
inline Op9 stepped_rotating_propagator(const SystemParams& p, const DrivePartition& parts, double duration, long n) {
  const double dt = duration / static_cast<double>(n);
  Op9 u = Op9::Identity();
  for (long k = 0; k < n; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt;
    u = herm_propagator(build_rotating_hamiltonian(p, parts, t), dt) * u;
  }
  return u;
}

inline long step_count(double duration, double step) {
  const double ratio = duration / step;
  const double nearest = std::round(ratio);
  const double n = std::abs(ratio - nearest) < 1e-9 * std::max(1.0, ratio) ? nearest : std::ceil(ratio);
  return std::max<long>(1, static_cast<long>(n));
}

inline Op9 matrix_power(Op9 base, long n) {
  Op9 out = Op9::Identity();
  while (n > 0) {
    if (n & 1) out = base * out;
    base = base * base;
    n >>= 1;
  }
  return out;
}

/// Common |relative detuning| of all extra drives, or 0 if they differ.
inline double common_relative_detuning(const DrivePartition& parts) {
  double f = 0.0;
  for (const auto& d : parts.extra) {
    for (const auto& fr : parts.frame) {
      if (slot(fr) != slot(d)) continue;
      const double rel = std::abs(d.detuning - fr.detuning);
      if (f == 0.0) {
        f = rel;
      } else if (rel != f) {
        return 0.0;
      }
    }
  }
  return f;
}

inline Op9 rwa_segment_propagator(const SystemParams& p, const Segment& seg, const EvolveOptions& opt) {
  const auto parts = partition_drives(seg.drives);
  Op9 u;
  if (parts.extra.empty()) {
    u = herm_propagator(build_rwa_hamiltonian(p, parts.frame), seg.duration);
  } else {
    const double frel = max_relative_detuning(parts);
    const double step =
        opt.rotating_step > 0.0 ? opt.rotating_step : (frel > 0.0 ? 1.0 / (200.0 * frel) : seg.duration);
    const double fcommon = common_relative_detuning(parts);
    const double period = fcommon > 0.0 ? 1.0 / fcommon : 0.0;
    if (period > 0.0 && seg.duration >= 2.0 * period) {
      // The carrier-frame Hamiltonian repeats every period: one period is
      // stepped and raised to a power, the remainder is stepped directly.
      const auto whole = static_cast<long>(std::floor(seg.duration / period));
      const double rest = seg.duration - static_cast<double>(whole) * period;
      u = matrix_power(stepped_rotating_propagator(p, parts, period, step_count(period, step)), whole);
      if (rest > 0.0) u = stepped_rotating_propagator(p, parts, rest, step_count(rest, step)) * u;
    } else {
      u = stepped_rotating_propagator(p, parts, seg.duration, step_count(seg.duration, step));
    }
  }
  // Back from the carrier frame to the bare frame at the end of the segment.
  const Ket9 back = diagonal_phases(carrier_frame_rates(parts.frame), seg.duration, -1.0);
  return back.asDiagonal() * u;
}

inline Op9 lab_segment_propagator(const SystemParams& p, const Segment& seg, const EvolveOptions& opt) {
  const Op9 h_static = bare_hamiltonian(p) + ising_term(p);
  const Ket9 to_rotating = diagonal_phases(bare_hamiltonian(p).diagonal().real(), seg.duration, 1.0);
  if (seg.drives.empty()) {
    return to_rotating.asDiagonal() * herm_propagator(h_static, seg.duration);
  }
  const double fmax = lab_max_frequency(p, seg.drives);
  const double limit = 1.0 / (50.0 * fmax);
  const double step = opt.lab_step > 0.0 ? opt.lab_step : 1.0 / (200.0 * fmax);
  if (step > limit * (1.0 + 1e-12)) {
    throw std::invalid_argument("evolve: lab step " + std::to_string(step) + " us exceeds 1/(50 f_max) = " +
                                std::to_string(limit) + " us");
  }
  std::vector<Op9> ops;
  std::vector<double> carriers;
  for (const auto& d : seg.drives) {
    validate_drive(d);
    if (transition_frequency(p, d.spin, d.transition) <= 0.0) {
      throw std::invalid_argument("evolve: lab mode needs positive bare transition frequencies");
    }
    ops.push_back(two_pi * d.rabi * on_spin(d.spin, transition_x(d.transition)));
    carriers.push_back(transition_frequency(p, d.spin, d.transition) + d.detuning);
  }
  const auto n = std::max<long>(1, static_cast<long>(std::ceil(seg.duration / step)));
  const double dt = seg.duration / static_cast<double>(n);
  Op9 u = Op9::Identity();
  for (long k = 0; k < n; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt;
    Op9 h = h_static;
    for (std::size_t j = 0; j < ops.size(); ++j) {
      h += std::cos(two_pi * carriers[j] * t + seg.drives[j].phase) * ops[j];
    }
    u = herm_propagator(h, dt) * u;
  }
  return to_rotating.asDiagonal() * u;
}

}  // namespace detail

/// Propagator of one segment in the bare rotating frame.
inline Op9 segment_propagator(const SystemParams& p, const Segment& seg, EvolutionMode mode,
                              const EvolveOptions& opt = {}) {
  if (!(seg.duration >= 0.0)) throw std::invalid_argument("segment duration must be non-negative");
  if (seg.duration == 0.0) return Op9::Identity();
  return mode == EvolutionMode::rwa ? detail::rwa_segment_propagator(p, seg, opt)
                                    : detail::lab_segment_propagator(p, seg, opt);
}

/// Applies every instruction of `seq` to `state`. The readout marker does not
/// collapse the state; use observe() with readout_projector().
inline TwoSpinState evolve(const SystemParams& p, TwoSpinState state, const PulseSequence& seq,
                           EvolutionMode mode = EvolutionMode::rwa, const EvolveOptions& opt = {}) {
  for (const auto& ins : seq.instructions) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Prep>) {
            state = reset_spin(state, x.spin, prep_state_ket(x.state));
          } else if constexpr (std::is_same_v<T, Rotate>) {
            state.apply(on_spin(x.spin, rotation_matrix(x.axis, x.angle)));
          } else if constexpr (std::is_same_v<T, Dephase>) {
            state = dephase_subspace(state, x.spin, x.first, x.second);
          } else if constexpr (std::is_same_v<T, Segment>) {
            state.apply(segment_propagator(p, x, mode, opt));
          }
        },
        ins);
  }
  return state;
}

/// Runs `seq` from |0,0> and returns its readout probability.
inline double run_sequence(const SystemParams& p, const PulseSequence& seq, EvolutionMode mode = EvolutionMode::rwa,
                           const EvolveOptions& opt = {}) {
  const TwoSpinState out = evolve(p, TwoSpinState{}, seq, mode, opt);
  return observe(out, readout_projector(seq.readout()));
}

}  // namespace dressed
