#pragma once

#include <Eigen/Dense>

#include "serfkick/errors.hpp"

#include <cmath>
#include <complex>

namespace serfkick {

using cplx = std::complex<double>;
inline constexpr cplx kI{0.0, 1.0};

using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;
using MatrixR = Eigen::MatrixXd;
using VectorR = Eigen::VectorXd;

/// Ground-manifold operators of cesium live on a 16-dimensional space.
inline constexpr int kGroundDim = 16;
using Matrix16 = Eigen::Matrix<cplx, kGroundDim, kGroundDim>;
using Vector16 = Eigen::Matrix<cplx, kGroundDim, 1>;

template <typename Derived>
double hermiticity_defect(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Derived>
auto hermitian_part(const Eigen::MatrixBase<Derived>& m) {
  return (0.5 * (m + m.adjoint())).eval();
}

inline MatrixC commutator(const MatrixC& a, const MatrixC& b) { return a * b - b * a; }

/// Eigen-decomposition of the Hermitian part of `m`.
inline Eigen::SelfAdjointEigenSolver<MatrixC> hermitian_eigen(const MatrixC& m) {
  Eigen::SelfAdjointEigenSolver<MatrixC> solver(hermitian_part(m));
  if (solver.info() != Eigen::Success) {
    throw NumericalError("hermitian eigen-decomposition failed");
  }
  return solver;
}

inline double min_eigenvalue(const MatrixC& m) { return hermitian_eigen(m).eigenvalues().minCoeff(); }

/// Applies f to the spectrum of a Hermitian matrix: V f(Λ) V†.
template <typename F>
MatrixC hermitian_function(const MatrixC& m, F&& f) {
  const auto solver = hermitian_eigen(m);
  const auto& vecs = solver.eigenvectors();
  VectorC fvals(solver.eigenvalues().size());
  for (Eigen::Index i = 0; i < fvals.size(); ++i) fvals(i) = f(solver.eigenvalues()(i));
  return vecs * fvals.asDiagonal() * vecs.adjoint();
}

/// exp(-i * angle * H) for Hermitian H, by spectral decomposition.
inline MatrixC unitary_exp(const MatrixC& h, double angle) {
  return hermitian_function(h, [angle](double lambda) { return std::exp(-kI * angle * lambda); });
}

inline MatrixC projector(const VectorC& psi) { return psi * psi.adjoint(); }

}  // namespace serfkick
