#pragma once

// Spin-1 operator algebra on one or two qutrits.
//
// Single-spin basis order is (|+1>, |0>, |-1>) everywhere; the two-spin basis
// is NV_A (x) NV_B, so index = 3 * a + b.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dressed {

using cplx = std::complex<double>;

using Op3 = Eigen::Matrix<cplx, 3, 3>;
using Op9 = Eigen::Matrix<cplx, 9, 9>;
using Ket3 = Eigen::Matrix<cplx, 3, 1>;
using Ket9 = Eigen::Matrix<cplx, 9, 1>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Thrown when a numerical precondition (Hermiticity, unitarity, ...) fails.
class contract_violation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Basis indices of a single qutrit.
enum class Level : int { plus = 0, zero = 1, minus = 2 };

constexpr int index_of(Level m) { return static_cast<int>(m); }

inline Level level_from_ms(int ms) {
  switch (ms) {
    case +1: return Level::plus;
    case 0: return Level::zero;
    case -1: return Level::minus;
  }
  throw std::invalid_argument("spin projection must be -1, 0 or +1, got " + std::to_string(ms));
}

enum class SpinOpKind { Sz, Sx_plus, Sx_minus, Sy_plus, Sy_minus, Proj };

/// Spin-1 operator in the (|+1>, |0>, |-1>) basis.
///
/// The transition operators Sx_plus/Sx_minus carry unit off-diagonal elements
/// on {|0>,|+1>} and {|0>,|-1>} respectively; the spin-1 ladder factor sqrt(2)
/// is absorbed into the Rabi-frequency calibration (see model.hpp).
/// For Proj, `m` selects the level.
inline Op3 spin1_operator(SpinOpKind kind, Level m = Level::zero) {
  Op3 op = Op3::Zero();
  const cplx i{0.0, 1.0};
  const int p = index_of(Level::plus);
  const int z = index_of(Level::zero);
  const int n = index_of(Level::minus);
  switch (kind) {
    case SpinOpKind::Sz:
      op(p, p) = 1.0;
      op(n, n) = -1.0;
      return op;
    case SpinOpKind::Sx_plus:
      op(p, z) = op(z, p) = 1.0;
      return op;
    case SpinOpKind::Sx_minus:
      op(n, z) = op(z, n) = 1.0;
      return op;
    // sigma_y on the two-level subspace with the nonzero-m level as "up".
    case SpinOpKind::Sy_plus:
      op(p, z) = -i;
      op(z, p) = i;
      return op;
    case SpinOpKind::Sy_minus:
      op(n, z) = -i;
      op(z, n) = i;
      return op;
    case SpinOpKind::Proj:
      op(index_of(m), index_of(m)) = 1.0;
      return op;
  }
  throw std::invalid_argument("unknown spin operator kind");
}

inline Op3 sz() { return spin1_operator(SpinOpKind::Sz); }
inline Op3 proj(Level m) { return spin1_operator(SpinOpKind::Proj, m); }

/// Kronecker product; dimensions multiply.
template <typename A, typename B>
auto tensor(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  constexpr int ar = static_cast<int>(A::RowsAtCompileTime), br = static_cast<int>(B::RowsAtCompileTime);
  constexpr int ac = static_cast<int>(A::ColsAtCompileTime), bc = static_cast<int>(B::ColsAtCompileTime);
  constexpr int rows = (ar == Eigen::Dynamic || br == Eigen::Dynamic) ? Eigen::Dynamic : ar * br;
  constexpr int cols = (ac == Eigen::Dynamic || bc == Eigen::Dynamic) ? Eigen::Dynamic : ac * bc;
  Eigen::Matrix<Scalar, rows, cols> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

enum class Spin { A, B };

inline char spin_name(Spin s) { return s == Spin::A ? 'A' : 'B'; }

/// Embeds a single-spin operator into the two-spin space.
inline Op9 on_spin(Spin s, const Op3& op) {
  return s == Spin::A ? Op9(tensor(op, Op3::Identity())) : Op9(tensor(Op3::Identity(), op));
}

template <typename M>
double hermiticity_error(const Eigen::MatrixBase<M>& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

template <typename M>
double unitarity_error(const Eigen::MatrixBase<M>& u) {
  using Plain = typename M::PlainObject;
  return (u.adjoint() * u - Plain::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

inline constexpr double hermitian_tolerance = 1e-12;
inline constexpr double unitary_tolerance = 1e-10;

/// exp(-i H t) through the Hermitian eigendecomposition of H.
/// H is in angular units (rad/us), t in us.
template <typename M>
typename M::PlainObject herm_propagator(const Eigen::MatrixBase<M>& h, double t) {
  using Plain = typename M::PlainObject;
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (hermiticity_error(h) > hermitian_tolerance * scale) {
    throw contract_violation("herm_propagator: Hamiltonian is not Hermitian");
  }
  if (t == 0.0) {
    return Plain::Identity(h.rows(), h.cols());
  }
  Eigen::SelfAdjointEigenSolver<Plain> eig(h.derived());
  if (eig.info() != Eigen::Success) {
    throw contract_violation("herm_propagator: eigendecomposition failed");
  }
  const auto& vecs = eig.eigenvectors();
  const auto& vals = eig.eigenvalues();
  Plain scaled = vecs;
  for (Eigen::Index k = 0; k < vals.size(); ++k) {
    scaled.col(k) *= std::polar(1.0, -vals(k) * t);
  }
  return scaled * vecs.adjoint();
}

/// Normalized single-qutrit amplitudes in basis order (|+1>, |0>, |-1>).
class QutritState {
 public:
  QutritState() : amps_(Ket3::Zero()) { amps_(index_of(Level::zero)) = 1.0; }

  explicit QutritState(const Ket3& amplitudes) : amps_(amplitudes) {
    if (std::abs(amps_.squaredNorm() - 1.0) > 1e-10) {
      throw contract_violation("QutritState: amplitudes are not normalized");
    }
  }

  static QutritState basis(Level m) {
    Ket3 k = Ket3::Zero();
    k(index_of(m)) = 1.0;
    return QutritState(k);
  }

  // |B> = (|+1> + |-1>)/sqrt(2), |D> = (|+1> - |-1>)/sqrt(2)
  static QutritState bright() {
    const double r = std::numbers::sqrt2 / 2.0;
    return QutritState(Ket3(r, 0.0, r));
  }
  static QutritState dark() {
    const double r = std::numbers::sqrt2 / 2.0;
    return QutritState(Ket3(r, 0.0, -r));
  }

  const Ket3& amplitudes() const { return amps_; }
  cplx operator[](Level m) const { return amps_(index_of(m)); }
  Op3 projector() const { return amps_ * amps_.adjoint(); }

 private:
  Ket3 amps_;
};

}  // namespace dressed
