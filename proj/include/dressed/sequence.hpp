#pragma once

// Pulse-sequence intermediate representation.
//
// A sequence is an ordered list of instructions: instantaneous ideal markers
// (state preparation, ideal rotation, dephasing) and timed segments during
// which a set of drives is active. It ends with exactly one readout.

#include "dressed/model.hpp"

#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace dressed {

enum class PrepState { zero, plus1, minus1, bright, dark };

inline QutritState prep_state_ket(PrepState s) {
  switch (s) {
    case PrepState::zero: return QutritState::basis(Level::zero);
    case PrepState::plus1: return QutritState::basis(Level::plus);
    case PrepState::minus1: return QutritState::basis(Level::minus);
    case PrepState::bright: return QutritState::bright();
    case PrepState::dark: return QutritState::dark();
  }
  throw std::invalid_argument("unknown prep state");
}

inline PrepState prep_state_of(Level m) {
  switch (m) {
    case Level::plus: return PrepState::plus1;
    case Level::zero: return PrepState::zero;
    case Level::minus: return PrepState::minus1;
  }
  throw std::invalid_argument("unknown level");
}

// Rotation axes. x+/y+ act on {|0>,|+1>}, x-/y- on {|0>,|-1>}, dq on
// {|+1>,|-1>}, xB on {|0>,|B>}; z is exp(-i angle Sz).
enum class Axis { x_plus, y_plus, x_minus, y_minus, z, dq, x_bright };

enum class ReadoutKind { P0, Pplus1, Pminus1, PB, PD };

struct Prep {
  Spin spin;
  PrepState state;
  bool operator==(const Prep&) const = default;
};

struct Rotate {
  Spin spin;
  Axis axis;
  double angle;  // rad
  bool operator==(const Rotate&) const = default;
};

struct Dephase {
  Spin spin;
  Level first;
  Level second;
  bool operator==(const Dephase&) const = default;
};

/// Free evolution for `duration` us with `drives` active (none for a wait).
struct Segment {
  double duration = 0.0;
  std::vector<DriveSpec> drives;
  bool operator==(const Segment&) const = default;
};

struct Readout {
  Spin spin;
  ReadoutKind kind;
  bool operator==(const Readout&) const = default;
};

using Instruction = std::variant<Prep, Rotate, Dephase, Segment, Readout>;

struct PulseSequence {
  std::string name;
  std::vector<std::pair<std::string, double>> bindings;  // swept-parameter values
  std::vector<Instruction> instructions;

  bool operator==(const PulseSequence&) const = default;

  double total_duration() const {
    double total = 0.0;
    for (const auto& ins : instructions) {
      if (const auto* seg = std::get_if<Segment>(&ins)) total += seg->duration;
    }
    return total;
  }

  /// The single readout marker; throws if the sequence is malformed.
  const Readout& readout() const {
    const Readout* found = nullptr;
    for (const auto& ins : instructions) {
      if (const auto* r = std::get_if<Readout>(&ins)) {
        if (found) throw std::invalid_argument("PulseSequence: more than one readout");
        found = r;
      }
    }
    if (!found) throw std::invalid_argument("PulseSequence: no readout");
    return *found;
  }

  void validate() const {
    (void)readout();
    for (const auto& ins : instructions) {
      if (const auto* seg = std::get_if<Segment>(&ins)) {
        if (!(seg->duration >= 0.0) || !std::isfinite(seg->duration)) {
          throw std::invalid_argument("PulseSequence: segment duration must be finite and non-negative");
        }
      }
    }
  }
};

/// Single-spin projector for a readout kind.
inline Op3 readout_projector_3(ReadoutKind kind) {
  switch (kind) {
    case ReadoutKind::P0: return proj(Level::zero);
    case ReadoutKind::Pplus1: return proj(Level::plus);
    case ReadoutKind::Pminus1: return proj(Level::minus);
    case ReadoutKind::PB: return QutritState::bright().projector();
    case ReadoutKind::PD: return QutritState::dark().projector();
  }
  throw std::invalid_argument("unknown readout kind");
}

inline Op9 readout_projector(const Readout& r) { return on_spin(r.spin, readout_projector_3(r.kind)); }

/// Ideal single-spin rotation.
inline Op3 rotation_matrix(Axis axis, double angle) {
  if (axis == Axis::z) {
    Op3 u = Op3::Zero();
    u(0, 0) = std::polar(1.0, -angle);
    u(1, 1) = 1.0;
    u(2, 2) = std::polar(1.0, angle);
    return u;
  }
  Op3 g = Op3::Zero();
  switch (axis) {
    case Axis::x_plus: g = spin1_operator(SpinOpKind::Sx_plus); break;
    case Axis::y_plus: g = spin1_operator(SpinOpKind::Sy_plus); break;
    case Axis::x_minus: g = spin1_operator(SpinOpKind::Sx_minus); break;
    case Axis::y_minus: g = spin1_operator(SpinOpKind::Sy_minus); break;
    case Axis::dq:
      g(index_of(Level::plus), index_of(Level::minus)) = 1.0;
      g(index_of(Level::minus), index_of(Level::plus)) = 1.0;
      break;
    case Axis::x_bright: {
      const Ket3 b = QutritState::bright().amplitudes();
      const Ket3 zero = QutritState::basis(Level::zero).amplitudes();
      g = b * zero.adjoint() + zero * b.adjoint();
      break;
    }
    case Axis::z: break;
  }
  // g is a Pauli-x/y on a two-dimensional subspace, so g^2 projects onto it.
  const Op3 sub = g * g;
  const cplx i{0.0, 1.0};
  return Op3::Identity() - sub + std::cos(angle / 2.0) * sub - i * std::sin(angle / 2.0) * g;
}

enum class Basis { SQ, DQ };

inline const char* basis_name(Basis b) { return b == Basis::SQ ? "SQ" : "DQ"; }

/// Drive amplitudes on the two transitions of one spin, MHz.
struct DrivePair {
  double omega_plus = 0.0;
  double omega_minus = 0.0;
  bool operator==(const DrivePair&) const = default;
};

/// NV_B during a Ramsey record: a static prepared level or a continuous drive
/// (starting from |0>).
using RamseyControl = std::variant<Level, DrivePair>;

namespace detail {

inline void append_drive_pair(std::vector<DriveSpec>& drives, Spin spin, const DrivePair& d) {
  if (d.omega_plus > 0.0) drives.push_back({spin, Transition::plus, d.omega_plus, 0.0, 0.0});
  if (d.omega_minus > 0.0) drives.push_back({spin, Transition::minus, d.omega_minus, 0.0, 0.0});
}

}  // namespace detail

/// Spin-echo DEER on sensor A with control B inverted at the echo.
///
/// SQ: (pi/2)_A - tau/2 - pi_A + pi_B(0 -> +1) - tau/2 - (pi/2)_A, readout |0>_A.
/// DQ: A starts in |B>, B in |-1>; at the echo A's |+-1> are swapped and B is
/// double-flipped to |+1>; the |0><->|B> pi rotation maps back to |0>_A.
inline PulseSequence make_deer(Basis basis, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("make_deer: tau must be positive");
  const double pi = std::numbers::pi;
  PulseSequence seq;
  seq.name = basis == Basis::SQ ? "deer_sq" : "deer_dq";
  seq.bindings = {{"tau", tau}};
  auto& ins = seq.instructions;
  if (basis == Basis::SQ) {
    ins.push_back(Prep{Spin::A, PrepState::zero});
    ins.push_back(Prep{Spin::B, PrepState::zero});
    ins.push_back(Rotate{Spin::A, Axis::x_plus, pi / 2});
    ins.push_back(Segment{tau / 2, {}});
    ins.push_back(Rotate{Spin::A, Axis::x_plus, pi});
    ins.push_back(Rotate{Spin::B, Axis::x_plus, pi});
    ins.push_back(Segment{tau / 2, {}});
    ins.push_back(Rotate{Spin::A, Axis::x_plus, pi / 2});
  } else {
    ins.push_back(Prep{Spin::A, PrepState::bright});
    ins.push_back(Prep{Spin::B, PrepState::minus1});
    ins.push_back(Segment{tau / 2, {}});
    ins.push_back(Rotate{Spin::A, Axis::dq, pi});
    ins.push_back(Rotate{Spin::B, Axis::dq, pi});
    ins.push_back(Segment{tau / 2, {}});
    ins.push_back(Rotate{Spin::A, Axis::x_bright, pi});
  }
  ins.push_back(Readout{Spin::A, ReadoutKind::P0});
  return seq;
}

/// Ramsey record on A of length tau with B static or continuously driven.
///
/// `reference_offset` (MHz) is a software detuning: a z rotation applied
/// before the final pulse advances the phase so that the non-interacting
/// signal oscillates at exactly `reference_offset` in both bases.
inline PulseSequence make_ramsey(Basis basis, const RamseyControl& control_B, double reference_offset,
                                 double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("make_ramsey: tau must be positive");
  const double pi = std::numbers::pi;
  PulseSequence seq;
  seq.name = basis == Basis::SQ ? "ramsey_sq" : "ramsey_dq";
  seq.bindings = {{"tau", tau}, {"reference_offset", reference_offset}};
  auto& ins = seq.instructions;

  ins.push_back(Prep{Spin::A, basis == Basis::SQ ? PrepState::zero : PrepState::bright});
  Segment free{tau, {}};
  if (const auto* level = std::get_if<Level>(&control_B)) {
    ins.push_back(Prep{Spin::B, prep_state_of(*level)});
  } else {
    const auto& drive = std::get<DrivePair>(control_B);
    if (drive.omega_plus < 0.0 || drive.omega_minus < 0.0) {
      throw std::invalid_argument("make_ramsey: drive amplitudes must be non-negative");
    }
    ins.push_back(Prep{Spin::B, PrepState::zero});
    detail::append_drive_pair(free.drives, Spin::B, drive);
  }
  if (basis == Basis::SQ) ins.push_back(Rotate{Spin::A, Axis::x_plus, pi / 2});
  ins.push_back(std::move(free));
  // The DQ coherence picks up twice the z-rotation angle.
  const double phase = two_pi * reference_offset * tau / (basis == Basis::SQ ? 1.0 : 2.0);
  ins.push_back(Rotate{Spin::A, Axis::z, phase});
  ins.push_back(Rotate{Spin::A, basis == Basis::SQ ? Axis::x_plus : Axis::x_bright,
                       basis == Basis::SQ ? pi / 2 : pi});
  ins.push_back(Readout{Spin::A, ReadoutKind::P0});
  return seq;
}

/// Spin-lock polarization transfer from A to B.
///
/// B: (pi/2) then dephasing in {|0>,|+1>}, then continuous drive (O+, O-).
/// A: (pi/2)_x, spin-lock drive with 90 deg phase for tau, (-pi/2)_x, |0>_A
/// readout. When `crosstalk_detuning` is set, A's drive also reaches B's
/// |0><->|+1> transition at that detuning (MHz).
inline PulseSequence make_spinlock(double omega_A, const DrivePair& drive_B, double tau,
                                   std::optional<double> crosstalk_detuning = std::nullopt) {
  if (!(tau > 0.0)) throw std::invalid_argument("make_spinlock: tau must be positive");
  if (!(omega_A > 0.0)) throw std::invalid_argument("make_spinlock: omega_A must be positive");
  const double pi = std::numbers::pi;
  PulseSequence seq;
  seq.name = "spinlock";
  seq.bindings = {{"tau", tau}, {"omega_A", omega_A}};
  auto& ins = seq.instructions;
  ins.push_back(Prep{Spin::A, PrepState::zero});
  ins.push_back(Prep{Spin::B, PrepState::zero});
  ins.push_back(Rotate{Spin::B, Axis::x_plus, pi / 2});
  ins.push_back(Dephase{Spin::B, Level::zero, Level::plus});
  ins.push_back(Rotate{Spin::A, Axis::x_plus, pi / 2});
  Segment lock{tau, {}};
  lock.drives.push_back({Spin::A, Transition::plus, omega_A, 0.0, pi / 2});
  detail::append_drive_pair(lock.drives, Spin::B, drive_B);
  if (crosstalk_detuning) {
    lock.drives.push_back({Spin::B, Transition::plus, omega_A, *crosstalk_detuning, pi / 2});
  }
  ins.push_back(std::move(lock));
  ins.push_back(Rotate{Spin::A, Axis::x_plus, -pi / 2});
  ins.push_back(Readout{Spin::A, ReadoutKind::P0});
  return seq;
}

}  // namespace dressed
