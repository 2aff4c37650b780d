#include "serfkick/kicked_top.hpp"
#include "serfkick/metrology.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace serfkick;
using namespace serfkick::metrology;

namespace {

MatrixC random_state(int n, std::mt19937& rng, int rank = -1) {
  std::normal_distribution<double> g;
  if (rank < 0) rank = n;
  MatrixC a(n, rank);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < rank; ++j) a(i, j) = cplx(g(rng), g(rng));
  MatrixC rho = a * a.adjoint();
  return rho / rho.trace().real();
}

StateTriple rotated_family(const MatrixC& rho, const MatrixC& gen, double x, double delta) {
  auto at = [&](double a) {
    const MatrixC u = unitary_exp(gen, a);
    return MatrixC(u * rho * u.adjoint());
  };
  return {at(x - delta), at(x), at(x + delta)};
}

}  // namespace

TEST(Fidelity, BasicProperties) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixC a = random_state(6, rng), b = random_state(6, rng, 2);
    EXPECT_NEAR(fidelity(a, a), 1.0, 1e-10);
    const double f = fidelity(a, b);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0 + 1e-10);
    EXPECT_NEAR(f, fidelity(b, a), 1e-10);
  }
  VectorC e0 = VectorC::Zero(4), e1 = VectorC::Zero(4);
  e0(0) = 1.0;
  e1(1) = 1.0;
  EXPECT_NEAR(fidelity(projector(e0), projector(e1)), 0.0, 1e-12);
}

TEST(Fidelity, CommutingStatesGiveBhattacharyya) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    VectorR p(8), q(8);
    for (int i = 0; i < 8; ++i) {
      p(i) = u(rng);
      q(i) = u(rng);
    }
    p /= p.sum();
    q /= q.sum();
    double bc = 0.0;
    for (int i = 0; i < 8; ++i) bc += std::sqrt(p(i) * q(i));
    const MatrixC rp = p.cast<cplx>().asDiagonal(), rq = q.cast<cplx>().asDiagonal();
    EXPECT_NEAR(fidelity(rp, rq), bc * bc, 1e-13);
  }
}

TEST(Fidelity, PureStatesGiveOverlap) {
  std::mt19937 rng(3);
  const MatrixC a = random_state(5, rng, 1), b = random_state(5, rng, 1);
  EXPECT_NEAR(fidelity(a, b), (a * b).trace().real(), 1e-12);
}

TEST(Fidelity, RejectsNonPositiveInput) {
  MatrixC bad = MatrixC::Identity(3, 3) / 3.0;
  bad(0, 0) = -0.1;
  EXPECT_THROW(fidelity(bad, MatrixC::Identity(3, 3) / 3.0), std::invalid_argument);
}

TEST(Qfi, PureRotationIsFourVariance) {
  const auto s = angular::spin_matrices(HalfInt::integer(3));
  const MatrixC psi = projector(kickedtop::coherent_state(HalfInt::integer(3), 1.1, 0.3));
  const double mean = (psi * s.fy).trace().real();
  const double var = (psi * s.fy * s.fy).trace().real() - mean * mean;
  const auto t = rotated_family(psi, s.fy, 0.4, 1e-5);
  EXPECT_NEAR(qfi(t, 1e-5) / (4.0 * var), 1.0, 1e-8);
  const auto tf = rotated_family(psi, s.fy, 0.4, 1e-3);
  EXPECT_NEAR(qfi(tf, 1e-3, QfiMethod::FidelityFd) / (4.0 * var), 1.0, 1e-5);
}

TEST(Qfi, ZeroForParameterIndependentFamily) {
  std::mt19937 rng(5);
  const MatrixC rho = random_state(5, rng);
  EXPECT_NEAR(qfi({rho, rho, rho}, 1e-3), 0.0, 1e-15);
}

TEST(Qfi, MethodsAgreeOnMixedStates) {
  std::mt19937 rng(13);
  const auto s = angular::spin_matrices(HalfInt::integer(2));
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixC rho = random_state(5, rng);
    const double delta = 1e-3;
    const auto t = rotated_family(rho, s.fx, 0.2, delta);
    const double sld = qfi(t, delta);
    const double fd = qfi(t, delta, QfiMethod::FidelityFd);
    EXPECT_NEAR(fd / sld, 1.0, 1e-4);
  }
}

TEST(Qfi, InvariantUnderFixedUnitary) {
  std::mt19937 rng(17);
  const auto s = angular::spin_matrices(HalfInt::integer(2));
  const MatrixC rho = random_state(5, rng);
  const auto t = rotated_family(rho, s.fz, 0.1, 1e-4);
  const MatrixC v = unitary_exp(s.fx * s.fx + s.fy, 0.8);
  const StateTriple w{v * t.minus * v.adjoint(), v * t.center * v.adjoint(), v * t.plus * v.adjoint()};
  EXPECT_NEAR(qfi(w, 1e-4) / qfi(t, 1e-4), 1.0, 1e-8);
}

TEST(Qfi, CentralDifferenceIsSecondOrder) {
  // nonlinear family rho(x) = U(x^2) rho0 U(x^2)^dag
  std::mt19937 rng(19);
  const auto s = angular::spin_matrices(HalfInt::integer(1));
  const MatrixC rho = random_state(3, rng);
  auto at = [&](double x) {
    const MatrixC u = unitary_exp(s.fy, x * x + 2.0 * x * x * x);
    return MatrixC(u * rho * u.adjoint());
  };
  const double x = 0.5;
  auto q = [&](double d) { return qfi({at(x - d), at(x), at(x + d)}, d); };
  const double exact = q(1e-5);
  const double e1 = std::abs(q(0.02) - exact), e2 = std::abs(q(0.01) - exact);
  EXPECT_NEAR(e1 / e2, 4.0, 0.2);
}

TEST(Qfi, RejectsBadDelta) {
  const MatrixC rho = MatrixC::Identity(2, 2) / 2.0;
  EXPECT_THROW(qfi({rho, rho, rho}, 0.0), std::invalid_argument);
  EXPECT_THROW(qfi({rho, rho, rho}, 1e-3, QfiMethod::FidelityFd), NumericalError);
}

TEST(Fisher, BinaryModelOracle) {
  // p = cos^2((x - x0) c / 2) from a rotated spin-1/2 measured along z
  const auto s = angular::spin_matrices(HalfInt::half(1));
  const double c = 2.7, x0 = 0.3, x = 0.9, delta = 1e-5;
  VectorC up = VectorC::Zero(2);
  up(0) = 1.0;
  auto at = [&](double v) {
    const MatrixC u = unitary_exp(s.fy, c * (v - x0));
    return MatrixC(u * projector(up) * u.adjoint());
  };
  MatrixC pu = MatrixC::Zero(2, 2), pd = MatrixC::Zero(2, 2);
  pu(0, 0) = 1.0;
  pd(1, 1) = 1.0;
  const Povm povm{{pu, pd}};
  EXPECT_NEAR(fisher_information({at(x - delta), at(x), at(x + delta)}, povm, delta), c * c, 1e-8);
}

TEST(Fisher, TrivialPovmGivesZero) {
  std::mt19937 rng(23);
  const auto s = angular::spin_matrices(HalfInt::integer(1));
  const auto t = rotated_family(random_state(3, rng), s.fy, 0.2, 1e-4);
  const Povm trivial{{MatrixC::Identity(3, 3)}};
  EXPECT_NEAR(fisher_information(t, trivial, 1e-4), 0.0, 1e-10);
}

TEST(Fisher, BoundedByQfi) {
  std::mt19937 rng(29);
  const auto s = angular::spin_matrices(HalfInt::integer(1));
  const MatrixC pz0 = (s.fz * s.fz - s.fz) / 2.0;
  const MatrixC pz1 = MatrixC::Identity(3, 3) - s.fz * s.fz;
  const MatrixC pz2 = (s.fz * s.fz + s.fz) / 2.0;
  const Povm povm{{pz0, pz1, pz2}};
  povm.validate();
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = rotated_family(random_state(3, rng), s.fx, 0.3, 1e-4);
    EXPECT_LE(fisher_information(t, povm, 1e-4), qfi(t, 1e-4) * (1.0 + 1e-6));
  }
}

TEST(Fisher, AllOutcomesBelowFloorIsAnError) {
  MatrixC rho = MatrixC::Zero(2, 2);
  rho(0, 0) = 1.0;
  MatrixC p1 = MatrixC::Zero(2, 2);
  p1(1, 1) = 1.0;
  // single-element "POVM" that never fires (not validated on purpose)
  EXPECT_THROW(fisher_information({rho, rho, rho}, Povm{{p1}}, 1e-3), NumericalError);
}

TEST(SzPovm, ProjectorsOntoSpinHalfEigenspaces) {
  const Povm p = sz_povm();
  ASSERT_EQ(p.elements.size(), 2u);
  p.validate();
  const MatrixC& up = p.elements[0];
  const MatrixC& down = p.elements[1];
  EXPECT_LT((up + down - MatrixC::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((up * down).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_NEAR(up.trace().real(), 8.0, 1e-12);
  EXPECT_NEAR(down.trace().real(), 8.0, 1e-12);
  const auto& cs = angular::coupled_space();
  EXPECT_LT((up - (0.5 * Matrix16::Identity() + cs.Sz)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(PovmValidation, RejectsIncompleteOrNegative) {
  EXPECT_THROW(Povm{}.validate(), std::invalid_argument);
  EXPECT_THROW(Povm{{MatrixC::Identity(2, 2) * 0.5}}.validate(), std::invalid_argument);
  MatrixC neg = MatrixC::Zero(2, 2);
  neg(0, 0) = 2.0;
  neg(1, 1) = -1.0;
  MatrixC rest = MatrixC::Identity(2, 2) - neg;
  EXPECT_THROW(Povm({{neg, rest}}).validate(), std::invalid_argument);
}

TEST(Rescale, DivisionByTime) {
  EXPECT_DOUBLE_EQ(rescale(3.0, 1.0), 3.0);
  for (double t : {0.5, 1.0, 4.0}) {
    EXPECT_DOUBLE_EQ(rescale(2.0 * t, t), 2.0);   // linear accumulation: flat
    EXPECT_DOUBLE_EQ(rescale(t * t, t), t);       // coherent accumulation: grows
  }
  EXPECT_THROW(rescale(1.0, 0.0), std::invalid_argument);
}

TEST(DeltaB, InverseSquareRoot) {
  const double n = 2e10;
  const double a = delta_b(1e20, n);
  EXPECT_NEAR(delta_b(4e20, n) / a, 0.5, 1e-15);
  EXPECT_NEAR(a, 1.0 / std::sqrt(2e30), 1e-30);
  EXPECT_THROW(delta_b(0.0, n), std::invalid_argument);
  EXPECT_THROW(delta_b(1.0, -1.0), std::invalid_argument);
}

TEST(PrecisionSeries, SingleSnapshot) {
  const Matrix16 rho = Matrix16::Identity() / 16.0;
  Matrix16 shifted = rho;
  shifted(0, 0) += 1e-3;
  shifted(1, 1) -= 1e-3;
  StateTrajectory a{{0.5}, {shifted}, ""}, b{{0.5}, {rho}, ""}, c{{0.5}, {Matrix16(2.0 * rho - shifted)}, ""};
  const auto series = precision_series({&a, &b, &c}, sz_povm(), 2e10, 1e-3);
  ASSERT_EQ(series.size(), 1u);
  EXPECT_GT(series.qfi[0], 0.0);
  EXPECT_DOUBLE_EQ(series.qfi_rescaled[0], series.qfi[0] / 0.5);
  EXPECT_LE(series.fisher_sz[0], series.qfi[0] * (1 + 1e-6));
}

TEST(PrecisionSeries, RejectsUnsynchronizedTrajectories) {
  const Matrix16 rho = Matrix16::Identity() / 16.0;
  StateTrajectory a{{0.5}, {rho}, ""}, b{{0.6}, {rho}, ""};
  EXPECT_THROW(precision_series({&a, &b, &a}, sz_povm(), 2e10, 1e-3), std::invalid_argument);
}

TEST(CurveMax, PicksFirstLargest) {
  const auto m = curve_max({1, 2, 3, 4}, {1.0, 3.0, 3.0, 2.0});
  EXPECT_EQ(m.index, 1u);
  EXPECT_DOUBLE_EQ(m.time, 2.0);
}
