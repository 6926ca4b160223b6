#pragma once

// Driven two-qutrit Hamiltonian and its closed-form consequences.
//
// Units: every user-facing quantity is a linear frequency in MHz or a time in
// us. Hamiltonian matrices are stored in angular units (rad/us), so a level
// at f MHz contributes 2*pi*f.
//
// Drive calibration: a drive of Rabi frequency Omega produces an RWA coupling
// of pi*Omega on its transition, which makes the on-resonance population
// oscillation frequency exactly Omega (a pi pulse lasts 1/(2*Omega)). The lab
// frame coefficient is twice that, 2*pi*Omega*cos(w t + phase).

#include "dressed/spinops.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace dressed {

struct SystemParams {
  double D = 2870.0;        // zero-field splitting, MHz
  double zeeman_A = 126.0;  // gamma*B projection on NV_A, MHz
  double zeeman_B = 66.0;   // gamma*B projection on NV_B, MHz
  double nu_dip = 0.25;     // bare Ising coupling, MHz (sign allowed)
  std::optional<double> t2star_A;  // us; only used for optional envelopes
  std::optional<double> t2star_B;

  void validate() const {
    if (!(D > 0.0)) throw std::invalid_argument("SystemParams: D must be positive");
    if (!std::isfinite(nu_dip)) throw std::invalid_argument("SystemParams: nu_dip must be finite");
    if (t2star_A && !(*t2star_A > 0.0)) throw std::invalid_argument("SystemParams: t2star_A must be positive");
    if (t2star_B && !(*t2star_B > 0.0)) throw std::invalid_argument("SystemParams: t2star_B must be positive");
  }

  double zeeman(Spin s) const { return s == Spin::A ? zeeman_A : zeeman_B; }
  std::optional<double> t2star(Spin s) const { return s == Spin::A ? t2star_A : t2star_B; }
};

enum class Transition { plus, minus };

inline Level upper_level(Transition tr) { return tr == Transition::plus ? Level::plus : Level::minus; }

struct DriveSpec {
  Spin spin = Spin::B;
  Transition transition = Transition::plus;
  double rabi = 0.0;      // MHz
  double detuning = 0.0;  // carrier minus bare transition frequency, MHz
  double phase = 0.0;     // rad

  bool operator==(const DriveSpec&) const = default;
};

/// Bare |0> <-> |+-1> transition frequency of one spin (no dipolar shift), MHz.
inline double transition_frequency(const SystemParams& p, Spin s, Transition tr) {
  return tr == Transition::plus ? p.D + p.zeeman(s) : p.D - p.zeeman(s);
}

namespace detail {

inline Op3 transition_x(Transition tr) {
  return spin1_operator(tr == Transition::plus ? SpinOpKind::Sx_plus : SpinOpKind::Sx_minus);
}

/// |upper><0| for the transition.
inline Op3 raising(Transition tr) {
  Op3 op = Op3::Zero();
  op(index_of(upper_level(tr)), index_of(Level::zero)) = 1.0;
  return op;
}

inline void validate_drive(const DriveSpec& d) {
  if (!(d.rabi >= 0.0) || !std::isfinite(d.rabi)) {
    throw std::invalid_argument("DriveSpec: rabi frequency must be finite and non-negative");
  }
  if (!std::isfinite(d.detuning) || !std::isfinite(d.phase)) {
    throw std::invalid_argument("DriveSpec: detuning and phase must be finite");
  }
}

inline int slot(const DriveSpec& d) {
  return (d.spin == Spin::A ? 0 : 2) + (d.transition == Transition::plus ? 0 : 1);
}

/// RWA coupling pi*Omega*exp(-i*theta)|u><0| + h.c. embedded on the drive's spin.
inline Op9 rwa_coupling(const DriveSpec& d, double theta) {
  const Op3 up = raising(d.transition) * std::polar(std::numbers::pi * d.rabi, -theta);
  return on_spin(d.spin, Op3(up + up.adjoint()));
}

}  // namespace detail

/// Ising term 2*pi*nu_dip * Sz_A (x) Sz_B.
inline Op9 ising_term(const SystemParams& p) {
  return two_pi * p.nu_dip * Op9(tensor(sz(), sz()));
}

/// Bare single-spin energies D*Sz^2 + gamma*B*Sz for both spins (the rotating
/// frame generator, without the coupling).
inline Op9 bare_hamiltonian(const SystemParams& p) {
  const Op3 sz1 = sz();
  const Op3 sz2 = sz1 * sz1;
  return two_pi * (on_spin(Spin::A, Op3(p.D * sz2 + p.zeeman_A * sz1)) +
                   on_spin(Spin::B, Op3(p.D * sz2 + p.zeeman_B * sz1)));
}

/// Lab-frame Hamiltonian at time t (us) with cosine drives; flip-flop,
/// hyperfine and transverse Zeeman terms are not included.
inline Op9 build_lab_hamiltonian(const SystemParams& p, std::span<const DriveSpec> drives, double t) {
  Op9 h = bare_hamiltonian(p) + ising_term(p);
  for (const auto& d : drives) {
    detail::validate_drive(d);
    const double carrier = transition_frequency(p, d.spin, d.transition) + d.detuning;
    const double coeff = two_pi * d.rabi * std::cos(two_pi * carrier * t + d.phase);
    h += coeff * on_spin(d.spin, detail::transition_x(d.transition));
  }
  return h;
}

/// Time-independent Hamiltonian in the frame rotating at every drive's carrier
/// (bare transition frequency for undriven transitions), with the RWA applied.
/// At most one drive per (spin, transition).
inline Op9 build_rwa_hamiltonian(const SystemParams& p, std::span<const DriveSpec> drives) {
  bool seen[4] = {false, false, false, false};
  Op9 h = ising_term(p);
  for (const auto& d : drives) {
    detail::validate_drive(d);
    const int s = detail::slot(d);
    if (seen[s]) {
      throw std::invalid_argument(std::string("build_rwa_hamiltonian: duplicate drive on spin ") +
                                  spin_name(d.spin) +
                                  (d.transition == Transition::plus ? " plus" : " minus") + " transition");
    }
    seen[s] = true;
    h += detail::rwa_coupling(d, d.phase);
    h -= two_pi * d.detuning * on_spin(d.spin, proj(upper_level(d.transition)));
  }
  return h;
}

/// Diagonal of the generator K that takes the bare rotating frame to the
/// carrier frame of `drives` (psi_carrier = exp(iKt) psi_bare). Only the first
/// drive on each (spin, transition) defines the frame.
inline Eigen::Matrix<double, 9, 1> carrier_frame_rates(std::span<const DriveSpec> drives) {
  bool seen[4] = {false, false, false, false};
  Eigen::Matrix<double, 9, 1> k = Eigen::Matrix<double, 9, 1>::Zero();
  for (const auto& d : drives) {
    const int s = detail::slot(d);
    if (seen[s]) continue;
    seen[s] = true;
    const Op9 pu = on_spin(d.spin, proj(upper_level(d.transition)));
    k += two_pi * d.detuning * pu.diagonal().real();
  }
  return k;
}

/// Splits drives into frame-defining ones (first per transition) and the rest.
struct DrivePartition {
  std::vector<DriveSpec> frame;
  std::vector<DriveSpec> extra;
};

inline DrivePartition partition_drives(std::span<const DriveSpec> drives) {
  DrivePartition out;
  bool seen[4] = {false, false, false, false};
  for (const auto& d : drives) {
    const int s = detail::slot(d);
    (seen[s] ? out.extra : out.frame).push_back(d);
    seen[s] = true;
  }
  return out;
}

/// Carrier-frame RWA Hamiltonian at local time t when several drives share a
/// transition. Additional drives rotate at their detuning relative to the
/// frame-defining drive of the same transition.
inline Op9 build_rotating_hamiltonian(const SystemParams& p, const DrivePartition& drives, double t) {
  Op9 h = build_rwa_hamiltonian(p, drives.frame);
  for (const auto& d : drives.extra) {
    detail::validate_drive(d);
    const auto frame = std::find_if(drives.frame.begin(), drives.frame.end(), [&](const DriveSpec& f) {
      return detail::slot(f) == detail::slot(d);
    });
    const double relative = d.detuning - frame->detuning;
    h += detail::rwa_coupling(d, two_pi * relative * t + d.phase);
  }
  return h;
}

/// Largest |detuning| of an extra drive relative to its frame drive, MHz.
inline double max_relative_detuning(const DrivePartition& drives) {
  double best = 0.0;
  for (const auto& d : drives.extra) {
    for (const auto& f : drives.frame) {
      if (detail::slot(f) == detail::slot(d)) best = std::max(best, std::abs(d.detuning - f.detuning));
    }
  }
  return best;
}

/// Effective Ising coupling between a sensor and a doubly driven qutrit,
/// nu_eff = 1/2 * (O+^2 - O-^2) / (O+^2 + O-^2) * nu_dip.
inline double effective_coupling(double omega_plus, double omega_minus, double nu_dip) {
  const double p2 = omega_plus * omega_plus;
  const double m2 = omega_minus * omega_minus;
  if (p2 + m2 == 0.0) {
    throw std::invalid_argument("effective_coupling: undriven qutrit has no dressed frame");
  }
  return 0.5 * (p2 - m2) / (p2 + m2) * nu_dip;
}

/// The ratio nu_eff / nu_dip.
inline double effective_coupling_factor(double omega_plus, double omega_minus) {
  return effective_coupling(omega_plus, omega_minus, 1.0);
}

struct DressedPair {
  QutritState plus_d;
  QutritState minus_d;
};

/// Doubly dressed states (|bright> +- |0>)/sqrt(2) with
/// |bright> = (O+|+1> + O-|-1>)/sqrt(O+^2 + O-^2).
inline DressedPair dressed_states(double omega_plus, double omega_minus) {
  const double norm = std::hypot(omega_plus, omega_minus);
  if (norm == 0.0) throw std::invalid_argument("dressed_states: both drive amplitudes are zero");
  const double r = std::numbers::sqrt2 / 2.0;
  const double cp = omega_plus / norm;
  const double cm = omega_minus / norm;
  return {QutritState(Ket3(r * cp, r, r * cm)), QutritState(Ket3(r * cp, -r, r * cm))};
}

/// Rabi frequency of a singly driven spin that matches the dressed splitting
/// of a spin driven with (O+, O-), MHz.
inline double hh_matching(double omega_plus, double omega_minus) {
  if (omega_plus == 0.0 && omega_minus == 0.0) {
    throw std::invalid_argument("hh_matching: both drive amplitudes are zero");
  }
  return std::hypot(omega_plus, omega_minus);
}

/// Leading-order cross-talk error (Omega/Delta)^2.
inline double crosstalk_bound(double omega, double delta) {
  if (delta == 0.0) throw std::invalid_argument("crosstalk_bound: detuning must be nonzero");
  const double r = omega / delta;
  return r * r;
}

/// Single-spin RWA drive block pi*(O+ Sx_plus + O- Sx_minus), rad/us.
inline Op3 single_spin_drive_block(double omega_plus, double omega_minus) {
  return std::numbers::pi * (omega_plus * spin1_operator(SpinOpKind::Sx_plus) +
                             omega_minus * spin1_operator(SpinOpKind::Sx_minus));
}

}  // namespace dressed
