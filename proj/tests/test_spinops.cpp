#include "dressed/spinops.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dressed;

namespace {

template <typename M>
double max_abs(const Eigen::MatrixBase<M>& m) {
  return m.cwiseAbs().maxCoeff();
}

Op9 random_hermitian(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Op9 m;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) m(i, j) = cplx(n(rng), n(rng));
  return 0.5 * (m + m.adjoint());
}

Op3 random_op3(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Op3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = cplx(n(rng), n(rng));
  return m;
}

}  // namespace

TEST(SpinOperators, SzIsDiagonal) {
  Op3 expected = Op3::Zero();
  expected.diagonal() << 1.0, 0.0, -1.0;
  EXPECT_EQ(sz(), expected);
}

TEST(SpinOperators, ProjectorOntoZero) {
  Op3 expected = Op3::Zero();
  expected(1, 1) = 1.0;
  EXPECT_EQ(proj(Level::zero), expected);
}

TEST(SpinOperators, TransitionOperatorsCoupleOnlyTheirSubspace) {
  const Op3 xp = spin1_operator(SpinOpKind::Sx_plus);
  const Op3 sq = xp * xp;
  // identity on span{|+1>,|0>}, zero on |-1>
  Op3 expected = Op3::Zero();
  expected(0, 0) = expected(1, 1) = 1.0;
  EXPECT_EQ(sq, expected);
  EXPECT_EQ(xp(0, 1), cplx(1.0));
  EXPECT_EQ(xp.row(2).cwiseAbs().sum(), 0.0);

  const Op3 xm = spin1_operator(SpinOpKind::Sx_minus);
  EXPECT_EQ(xm(1, 2), cplx(1.0));
  EXPECT_EQ(xm.row(0).cwiseAbs().sum(), 0.0);
}

TEST(SpinOperators, AllKindsAreHermitian) {
  for (auto k : {SpinOpKind::Sz, SpinOpKind::Sx_plus, SpinOpKind::Sx_minus, SpinOpKind::Sy_plus, SpinOpKind::Sy_minus}) {
    EXPECT_LE(hermiticity_error(spin1_operator(k)), 0.0);
  }
  for (auto m : {Level::plus, Level::zero, Level::minus}) {
    const Op3 p = proj(m);
    EXPECT_EQ(hermiticity_error(p), 0.0);
    EXPECT_EQ(p * p, p);
  }
}

TEST(SpinOperators, UnknownKindIsRejected) {
  EXPECT_THROW(spin1_operator(static_cast<SpinOpKind>(99)), std::invalid_argument);
  EXPECT_THROW(level_from_ms(2), std::invalid_argument);
}

TEST(Tensor, IdentityAndSpectrum) {
  EXPECT_EQ(Op9(tensor(Op3::Identity(), Op3::Identity())), Op9::Identity());

  const Op9 zz = tensor(sz(), sz());
  int plus = 0, zero = 0, minus = 0;
  for (int i = 0; i < 9; ++i) {
    const double v = zz(i, i).real();
    plus += v == 1.0;
    zero += v == 0.0;
    minus += v == -1.0;
  }
  EXPECT_EQ(plus, 2);
  EXPECT_EQ(zero, 5);
  EXPECT_EQ(minus, 2);
  EXPECT_EQ(max_abs(Op9(zz - Op9(zz.diagonal().asDiagonal()))), 0.0);
}

TEST(Tensor, ProductOfProjectorsIsRankOne) {
  const Op9 p = tensor(proj(Level::zero), proj(Level::plus));
  // |0,+1> sits at 3*index(0) + index(+1)
  Op9 expected = Op9::Zero();
  expected(3 * 1 + 0, 3 * 1 + 0) = 1.0;
  EXPECT_EQ(p, expected);
}

TEST(Tensor, MixedProductAndAssociativity) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Op3 a = random_op3(rng), b = random_op3(rng), c = random_op3(rng), d = random_op3(rng);
    const Op9 lhs = Op9(tensor(a, b)) * Op9(tensor(c, d));
    const Op9 rhs = tensor(Op3(a * c), Op3(b * d));
    EXPECT_LE(max_abs(Op9(lhs - rhs)), 1e-12 * std::max(1.0, max_abs(rhs)));

    const Eigen::MatrixXcd left = tensor(Eigen::MatrixXcd(tensor(a, b)), Eigen::MatrixXcd(c));
    const Eigen::MatrixXcd right = tensor(Eigen::MatrixXcd(a), Eigen::MatrixXcd(tensor(b, c)));
    EXPECT_LE((left - right).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, right.cwiseAbs().maxCoeff()));
  }
  // Entries of the spin operators are small integers, so the products are exact.
  const Eigen::MatrixXcd a = sz(), b = spin1_operator(SpinOpKind::Sy_plus), c = spin1_operator(SpinOpKind::Sx_minus);
  EXPECT_EQ(tensor(Eigen::MatrixXcd(tensor(a, b)), c), tensor(a, Eigen::MatrixXcd(tensor(b, c))));
}

TEST(HermPropagator, ZeroTimeIsIdentity) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(herm_propagator(random_hermitian(rng, 3.0), 0.0), Op9::Identity());
}

TEST(HermPropagator, FullPeriodOfProjectorIsIdentity) {
  const double f = 3.7;
  const Op3 h = two_pi * f * proj(Level::plus);
  const Op3 u = herm_propagator(h, 1.0 / f);
  EXPECT_LE(max_abs(Op3(u - Op3::Identity())), 1e-9);
}

// Two-level oracle: H = pi*Omega*sigma_x gives P(+1) = sin^2(pi*Omega*t).
TEST(HermPropagator, RabiTransferMatchesTwoLevelFormula) {
  const Op3 h = std::numbers::pi * spin1_operator(SpinOpKind::Sx_plus);
  const Ket3 zero = QutritState::basis(Level::zero).amplitudes();
  for (double t : {0.1, 0.25, 0.5, 0.8, 1.0}) {
    const Ket3 out = herm_propagator(h, t) * zero;
    const double oracle = std::pow(std::sin(std::numbers::pi * t), 2);
    EXPECT_NEAR(std::norm(out(index_of(Level::plus))), oracle, 1e-12) << "t=" << t;
  }
  // Full transfer after 1/(2 Omega) = 0.5 us; a 1 us pulse is a 2 pi rotation.
  const Ket3 half = herm_propagator(h, 0.5) * zero;
  EXPECT_NEAR(std::norm(half(index_of(Level::plus))), 1.0, 1e-12);
}

TEST(HermPropagator, RejectsNonHermitian) {
  Op3 h = Op3::Zero();
  h(0, 1) = 1.0;
  EXPECT_THROW(herm_propagator(h, 1.0), contract_violation);
}

TEST(HermPropagator, UnitarityOverRandomHamiltonians) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> tdist(0.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Op9 u = herm_propagator(random_hermitian(rng, 20.0), tdist(rng));
    EXPECT_LE(unitarity_error(u), unitary_tolerance);
  }
}

TEST(HermPropagator, IsDeterministic) {
  std::mt19937_64 rng(3);
  const Op9 h = random_hermitian(rng, 5.0);
  EXPECT_EQ(herm_propagator(h, 1.3), herm_propagator(h, 1.3));
}

TEST(QutritState, NormalizationIsEnforced) {
  EXPECT_THROW(QutritState(Ket3(1.0, 1.0, 0.0)), contract_violation);
  EXPECT_NEAR(QutritState::bright().amplitudes().squaredNorm(), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(QutritState::bright().amplitudes().dot(QutritState::dark().amplitudes())), 0.0, 1e-15);
}

TEST(SpinOperators, RealCombinationsStayHermitian) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 100; ++trial) {
    const Op9 h = n(rng) * on_spin(Spin::A, sz()) + n(rng) * on_spin(Spin::B, spin1_operator(SpinOpKind::Sy_minus)) +
                  n(rng) * Op9(tensor(spin1_operator(SpinOpKind::Sx_plus), spin1_operator(SpinOpKind::Sx_minus)));
    EXPECT_LE(hermiticity_error(h), hermitian_tolerance);
  }
}
