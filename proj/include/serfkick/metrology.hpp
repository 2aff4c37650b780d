#pragma once

// Precision analytics: Uhlmann fidelity, quantum Fisher information (SLD
// spectral form and fidelity finite differences), classical Fisher
// information of a POVM, time rescaling and field sensitivity.

#include "serfkick/angular.hpp"
#include "serfkick/errors.hpp"
#include "serfkick/linalg.hpp"
#include "serfkick/trajectory.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace serfkick::metrology {

namespace detail {

using cplxl = std::complex<long double>;
using MatrixCL = Eigen::Matrix<cplxl, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kPsdTolerance = 1e-8;

/// Unit-trace Hermitian copy in extended precision.
inline MatrixCL normalized_extended(const MatrixC& m) {
  MatrixCL x = m.cast<cplxl>();
  x = (0.5L * (x + x.adjoint())).eval();
  const long double tr = x.trace().real();
  if (!(tr > 0.0L)) throw ValidationError("fidelity: state has non-positive trace");
  return x / tr;
}

inline MatrixCL psd_sqrt(const MatrixCL& m) {
  Eigen::SelfAdjointEigenSolver<MatrixCL> solver(m);
  if (solver.info() != Eigen::Success) throw NumericalError("fidelity: eigen-decomposition failed");
  auto vals = solver.eigenvalues();
  if (vals.minCoeff() < -static_cast<long double>(kPsdTolerance)) {
    throw ValidationError("fidelity: input is not positive semidefinite (min eigenvalue " +
                          std::to_string(static_cast<double>(vals.minCoeff())) + ")");
  }
  Eigen::Matrix<cplxl, Eigen::Dynamic, 1> roots(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i) roots(i) = std::sqrt(std::max(vals(i), 0.0L));
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().adjoint();
}

/// sqrt(F) = trace norm of sqrt(rho) sqrt(sigma), in long double.
inline long double root_fidelity(const MatrixCL& rho, const MatrixCL& sigma) {
  const MatrixCL product = psd_sqrt(rho) * psd_sqrt(sigma);
  Eigen::JacobiSVD<MatrixCL> svd(product);
  return svd.singularValues().sum();
}

}  // namespace detail

/// Uhlmann fidelity (tr |sqrt(rho) sqrt(sigma)|)^2 of two density matrices.
inline double fidelity(const MatrixC& rho, const MatrixC& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols() || rho.rows() != rho.cols()) {
    throw ValidationError("fidelity: shape mismatch");
  }
  const auto r = detail::root_fidelity(rho.cast<detail::cplxl>(), sigma.cast<detail::cplxl>());
  return static_cast<double>(r * r);
}

/// States of one configuration at parameter values x - delta, x, x + delta.
struct StateTriple {
  MatrixC minus;
  MatrixC center;
  MatrixC plus;
};

enum class QfiMethod { Sld, FidelityFd };

struct QfiResult {
  double value = 0.0;
  double excluded_weight = 0.0;  ///< SLD: sum of excluded |d rho_ij|^2 contributions' norm
};

/// Eigenvalue cutoff of the SLD sum, relative to the largest eigenvalue.
inline constexpr double kSldCutoff = 1e-12;

inline QfiResult qfi_detailed(const StateTriple& s, double delta, QfiMethod method = QfiMethod::Sld) {
  if (!(delta > 0.0)) throw ValidationError("qfi: delta must be positive");
  if (method == QfiMethod::Sld) {
    const MatrixC deriv = (s.plus - s.minus) / (2.0 * delta);
    const auto solver = hermitian_eigen(s.center);
    const VectorR& lam = solver.eigenvalues();
    const MatrixC& vecs = solver.eigenvectors();
    const MatrixC d = vecs.adjoint() * hermitian_part(deriv) * vecs;
    const double cut = kSldCutoff * lam.maxCoeff();
    QfiResult r;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      for (Eigen::Index j = 0; j < lam.size(); ++j) {
        const double sum = lam(i) + lam(j);
        const double mag2 = std::norm(d(i, j));
        if (sum > cut) {
          r.value += 2.0 * mag2 / sum;
        } else {
          r.excluded_weight += mag2;
        }
      }
    }
    r.excluded_weight = std::sqrt(r.excluded_weight);
    return r;
  }

  const auto c = detail::normalized_extended(s.center);
  const long double up = 1.0L - detail::root_fidelity(c, detail::normalized_extended(s.plus));
  const long double down = 1.0L - detail::root_fidelity(c, detail::normalized_extended(s.minus));
  const long double floor = 100.0L * std::numeric_limits<long double>::epsilon();
  if (up < floor || down < floor) {
    throw NumericalError("qfi: fidelity deficit below resolution, increase delta");
  }
  const auto d2 = static_cast<long double>(delta) * static_cast<long double>(delta);
  return QfiResult{static_cast<double>(4.0L * (up + down) / d2), 0.0};
}

/// QFI with respect to the parameter that distinguishes the triple.
inline double qfi(const StateTriple& s, double delta, QfiMethod method = QfiMethod::Sld) {
  return qfi_detailed(s, delta, method).value;
}

struct Povm {
  std::vector<MatrixC> elements;

  void validate(double tolerance = 1e-12) const {
    if (elements.empty()) throw ValidationError("POVM: no elements");
    const auto n = elements.front().rows();
    MatrixC total = MatrixC::Zero(n, n);
    for (const auto& e : elements) {
      if (e.rows() != n || e.cols() != n) throw ValidationError("POVM: element shape mismatch");
      if (hermiticity_defect(e) > tolerance) throw ValidationError("POVM: element not Hermitian");
      if (min_eigenvalue(e) < -tolerance) throw ValidationError("POVM: element not positive semidefinite");
      total += e;
    }
    if ((total - MatrixC::Identity(n, n)).cwiseAbs().maxCoeff() > tolerance) {
      throw ValidationError("POVM: elements do not sum to identity");
    }
  }
};

/// Projective measurement of S_z on the ground space: projectors onto the
/// +1/2 and -1/2 eigenspaces (in that order).
inline Povm sz_povm() {
  const auto& cs = angular::coupled_space();
  const auto solver = hermitian_eigen(MatrixC(cs.Sz));
  const VectorR& vals = solver.eigenvalues();
  const MatrixC& vecs = solver.eigenvectors();
  MatrixC up = MatrixC::Zero(cs.dim, cs.dim);
  MatrixC down = MatrixC::Zero(cs.dim, cs.dim);
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    const MatrixC p = vecs.col(i) * vecs.col(i).adjoint();
    (vals(i) > 0.0 ? up : down) += p;
  }
  return Povm{{up, down}};
}

/// Probability floor below which outcomes are left out of the Fisher sum.
inline constexpr double kProbabilityFloor = 1e-12;

struct FisherResult {
  double value = 0.0;
  int excluded_outcomes = 0;
};

inline FisherResult fisher_information_detailed(const StateTriple& s, const Povm& povm, double delta) {
  if (!(delta > 0.0)) throw ValidationError("fisher_information: delta must be positive");
  FisherResult r;
  for (const auto& e : povm.elements) {
    const double p = (e * s.center).trace().real();
    if (p < kProbabilityFloor) {
      ++r.excluded_outcomes;
      continue;
    }
    const double dp = ((e * s.plus).trace().real() - (e * s.minus).trace().real()) / (2.0 * delta);
    r.value += dp * dp / p;
  }
  if (r.excluded_outcomes == static_cast<int>(povm.elements.size())) {
    throw NumericalError("fisher_information: every outcome is below the probability floor");
  }
  return r;
}

inline double fisher_information(const StateTriple& s, const Povm& povm, double delta) {
  return fisher_information_detailed(s, povm, delta).value;
}

/// Information per unit measurement time.
inline double rescale(double value, double t) {
  if (!(t > 0.0)) throw ValidationError("rescale: time must be positive");
  return value / t;
}

/// Delta B = 1 / sqrt(n I^(t)) [T/sqrt(Hz)].
inline double delta_b(double rescaled, double n_atoms) {
  if (!(rescaled > 0.0)) throw ValidationError("delta_b: rescaled information must be positive");
  if (!(n_atoms > 0.0)) throw ValidationError("delta_b: atom number must be positive");
  return 1.0 / std::sqrt(n_atoms * rescaled);
}

struct CurveMax {
  double value = 0.0;
  double time = 0.0;
  std::size_t index = 0;
};

inline CurveMax curve_max(const std::vector<double>& times, const std::vector<double>& values) {
  CurveMax m;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i == 0 || values[i] > m.value) m = CurveMax{values[i], times[i], i};
  }
  return m;
}

struct PrecisionSeries {
  std::vector<double> times;               ///< [s]
  std::vector<double> qfi;                 ///< [1/T^2]
  std::vector<double> qfi_rescaled;        ///< [1/(T^2 s)]
  std::vector<double> fisher_sz;           ///< [1/T^2]
  std::vector<double> fisher_sz_rescaled;  ///< [1/(T^2 s)]
  std::vector<double> delta_b_optimal;     ///< [T/sqrt(Hz)], NaN where undefined
  std::vector<double> delta_b_sz;          ///< [T/sqrt(Hz)]
  int excluded_outcomes = 0;

  std::size_t size() const { return times.size(); }
  CurveMax max_qfi_rescaled() const { return curve_max(times, qfi_rescaled); }
  CurveMax max_fisher_rescaled() const { return curve_max(times, fisher_sz_rescaled); }
};

struct TrajectoryTriple {
  const StateTrajectory* minus;
  const StateTrajectory* center;
  const StateTrajectory* plus;
};

inline StateTriple snapshot(const TrajectoryTriple& t, std::size_t i) {
  return StateTriple{t.minus->states[i], t.center->states[i], t.plus->states[i]};
}

/// Per-snapshot QFI and POVM Fisher information of a field-shifted
/// trajectory triple, with rescaled values and Delta B.
inline PrecisionSeries precision_series(const TrajectoryTriple& t, const Povm& povm, double n_atoms, double delta,
                                        QfiMethod method = QfiMethod::Sld) {
  for (const auto* tr : {t.minus, t.center, t.plus}) tr->validate();
  const std::size_t n = t.center->size();
  if (t.minus->size() != n || t.plus->size() != n) throw ValidationError("precision_series: trajectory lengths differ");
  for (std::size_t i = 0; i < n; ++i) {
    if (t.minus->times[i] != t.center->times[i] || t.plus->times[i] != t.center->times[i]) {
      throw ValidationError("precision_series: trajectories are not synchronized");
    }
  }
  povm.validate(1e-10);
  PrecisionSeries s;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < n; ++i) {
    const double time = t.center->times[i];
    const StateTriple st = snapshot(t, i);
    const double q = qfi(st, delta, method);
    const auto fi = fisher_information_detailed(st, povm, delta);
    s.excluded_outcomes += fi.excluded_outcomes;
    s.times.push_back(time);
    s.qfi.push_back(q);
    s.fisher_sz.push_back(fi.value);
    s.qfi_rescaled.push_back(rescale(q, time));
    s.fisher_sz_rescaled.push_back(rescale(fi.value, time));
    s.delta_b_optimal.push_back(q > 0.0 ? delta_b(s.qfi_rescaled.back(), n_atoms) : nan);
    s.delta_b_sz.push_back(fi.value > 0.0 ? delta_b(s.fisher_sz_rescaled.back(), n_atoms) : nan);
  }
  return s;
}

}  // namespace serfkick::metrology
