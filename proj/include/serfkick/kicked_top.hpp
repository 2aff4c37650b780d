#pragma once

// The idealized kicked top: precession by alpha about y followed by an
// instantaneous F_x^2 kick once per period.

#include "serfkick/angular.hpp"
#include "serfkick/linalg.hpp"

#include <stdexcept>
#include <variant>

namespace serfkick::kickedtop {

struct KickedTopParams {
  HalfInt f = HalfInt::integer(3);
  double alpha = 0.0;  ///< precession angle per period [rad]
  double k = 0.0;      ///< kicking strength
  double tau = 1.0;    ///< period [s], bookkeeping only

  void validate() const {
    if (f.twice() < 1) throw std::invalid_argument("kicked top: spin must be >= 1/2");
    if (!(tau > 0.0)) throw std::invalid_argument("kicked top: period must be positive");
    if (k < 0.0) throw std::invalid_argument("kicked top: kicking strength must be non-negative");
  }
};

/// U = exp(-i k F_x^2 / (2f+1)) exp(-i alpha F_y).
inline MatrixC floquet_operator(const KickedTopParams& p) {
  p.validate();
  const angular::SpinMatrices s = angular::spin_matrices(p.f);
  const MatrixC precession = unitary_exp(s.fy, p.alpha);
  if (p.k == 0.0) return precession;
  const MatrixC kick = unitary_exp(s.fx * s.fx, p.k / p.f.multiplicity());
  return kick * precession;
}

/// Spin-coherent state pointing along (theta, phi): R_z(phi) R_y(theta)|f, m=f>.
inline VectorC coherent_state(HalfInt f, double theta = 0.0, double phi = 0.0) {
  const angular::SpinMatrices s = angular::spin_matrices(f);
  VectorC top = VectorC::Zero(s.dim());
  top(0) = 1.0;  // m = f
  return unitary_exp(s.fz, phi) * (unitary_exp(s.fy, theta) * top);
}

inline void require_dim(Eigen::Index dim, const KickedTopParams& p) {
  if (dim != p.f.multiplicity()) {
    throw std::invalid_argument("kicked top: state dimension " + std::to_string(dim) + " does not match 2f+1 = " +
                                std::to_string(p.f.multiplicity()));
  }
}

inline VectorC evolve_stroboscopic(const VectorC& psi, const KickedTopParams& p, int n) {
  if (n < 0) throw std::invalid_argument("kicked top: negative step count");
  require_dim(psi.size(), p);
  const MatrixC u = floquet_operator(p);
  VectorC out = psi;
  for (int i = 0; i < n; ++i) out = u * out;
  return out;
}

inline MatrixC evolve_stroboscopic(const MatrixC& rho, const KickedTopParams& p, int n) {
  if (n < 0) throw std::invalid_argument("kicked top: negative step count");
  if (rho.rows() != rho.cols()) throw std::invalid_argument("kicked top: density matrix must be square");
  require_dim(rho.rows(), p);
  const MatrixC u = floquet_operator(p);
  MatrixC out = rho;
  for (int i = 0; i < n; ++i) out = u * out * u.adjoint();
  return out;
}

}  // namespace serfkick::kickedtop
