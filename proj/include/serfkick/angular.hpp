#pragma once

// Angular-momentum coupling algebra and the operator set of the cesium
// 6S1/2 ground state (nuclear spin K = 7/2, electron spin s = 1/2).
//
// Conventions: hbar = 1 (all spin matrices dimensionless), Condon-Shortley
// phases. spin_matrices() orders the multiplet by descending m; the coupled
// ground space orders its basis (f=3, m=-3..3), (f=4, m=-4..4).

#include "serfkick/half_int.hpp"
#include "serfkick/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace serfkick::angular {

namespace detail {

inline constexpr int kMaxFactorial = 170;

/// n! as long double; exact for n <= 20, correctly rounded beyond.
inline long double factorial(int n) {
  static const auto table = [] {
    std::array<long double, kMaxFactorial + 1> t{};
    t[0] = 1.0L;
    std::uint64_t exact = 1;
    for (int i = 1; i <= kMaxFactorial; ++i) {
      if (i <= 20) {
        exact *= static_cast<std::uint64_t>(i);
        t[i] = static_cast<long double>(exact);
      } else {
        t[i] = t[i - 1] * static_cast<long double>(i);
      }
    }
    return t;
  }();
  if (n < 0 || n > kMaxFactorial) throw std::out_of_range("factorial argument out of range");
  return table[static_cast<std::size_t>(n)];
}

/// Integer value of a sum of half-integers given in doubled units.
inline int half_sum(int twice_total) {
  if (twice_total % 2 != 0) throw std::logic_error("half_sum: odd doubled total");
  return twice_total / 2;
}

inline long double phase(int exponent) { return (exponent % 2 == 0) ? 1.0L : -1.0L; }

/// Racah triangle coefficient Delta(abc), assumes the triangle rule holds.
inline long double triangle_coeff(HalfInt a, HalfInt b, HalfInt c) {
  const int ta = a.twice(), tb = b.twice(), tc = c.twice();
  return std::sqrt(factorial(half_sum(ta + tb - tc)) * factorial(half_sum(ta - tb + tc)) *
                   factorial(half_sum(-ta + tb + tc)) / factorial(half_sum(ta + tb + tc) + 1));
}

}  // namespace detail

/// Standard spin matrices of a multiplet f, hbar factored out.
struct SpinMatrices {
  HalfInt f;
  MatrixC fx, fy, fz, fsq;

  int dim() const { return f.multiplicity(); }
  /// Magnetic quantum number of row/column `index` (descending order).
  double m_of(int index) const { return f.value() - index; }
};

inline SpinMatrices spin_matrices(HalfInt f) {
  if (f.twice() < 0) throw std::invalid_argument("spin_matrices: negative spin " + f.str());
  const int d = f.multiplicity();
  const double j = f.value();
  MatrixC raise = MatrixC::Zero(d, d);
  // index i holds m = j - i, so F+ maps column i to row i-1.
  for (int i = 1; i < d; ++i) {
    const double m = j - i;
    raise(i - 1, i) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
  }
  const MatrixC lower = raise.adjoint();
  SpinMatrices s;
  s.f = f;
  s.fx = 0.5 * (raise + lower);
  s.fy = (raise - lower) / (2.0 * kI);
  s.fz = MatrixC::Zero(d, d);
  for (int i = 0; i < d; ++i) s.fz(i, i) = j - i;
  s.fsq = s.fx * s.fx + s.fy * s.fy + s.fz * s.fz;
  return s;
}

/// Clebsch-Gordan coefficient <J M | j1 m1; j2 m2> (Racah closed form).
/// Returns 0 for any violated selection rule.
inline double clebsch_gordan(HalfInt j1, HalfInt m1, HalfInt j2, HalfInt m2, HalfInt J, HalfInt M) {
  using detail::factorial;
  using detail::half_sum;
  if (j1.twice() < 0 || j2.twice() < 0 || J.twice() < 0) {
    throw std::invalid_argument("clebsch_gordan: negative angular momentum");
  }
  if (!is_projection_of(m1, j1) || !is_projection_of(m2, j2) || !is_projection_of(M, J)) return 0.0;
  if (M != m1 + m2) return 0.0;
  if (!satisfies_triangle(j1, j2, J)) return 0.0;

  const int tj1 = j1.twice(), tj2 = j2.twice(), tJ = J.twice();
  const int tm1 = m1.twice(), tm2 = m2.twice(), tM = M.twice();

  const long double prefactor =
      std::sqrt((tJ + 1) * factorial(half_sum(tJ + tj1 - tj2)) * factorial(half_sum(tJ - tj1 + tj2)) *
                factorial(half_sum(tj1 + tj2 - tJ)) / factorial(half_sum(tj1 + tj2 + tJ) + 1)) *
      std::sqrt(factorial(half_sum(tJ + tM)) * factorial(half_sum(tJ - tM)) * factorial(half_sum(tj1 - tm1)) *
                factorial(half_sum(tj1 + tm1)) * factorial(half_sum(tj2 - tm2)) * factorial(half_sum(tj2 + tm2)));

  const int a = half_sum(tj1 + tj2 - tJ);
  const int b = half_sum(tj1 - tm1);
  const int c = half_sum(tj2 + tm2);
  const int d = half_sum(tJ - tj2 + tm1);
  const int e = half_sum(tJ - tj1 - tm2);
  const int kmin = std::max({0, -d, -e});
  const int kmax = std::min({a, b, c});
  long double sum = 0.0L;
  for (int k = kmin; k <= kmax; ++k) {
    sum += detail::phase(k) / (factorial(k) * factorial(a - k) * factorial(b - k) * factorial(c - k) *
                               factorial(d + k) * factorial(e + k));
  }
  return static_cast<double>(prefactor * sum);
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6} by the Racah sum; 0 on any
/// triangle violation.
inline double wigner6j(HalfInt j1, HalfInt j2, HalfInt j3, HalfInt j4, HalfInt j5, HalfInt j6) {
  using detail::factorial;
  using detail::half_sum;
  for (HalfInt j : {j1, j2, j3, j4, j5, j6}) {
    if (j.twice() < 0) throw std::invalid_argument("wigner6j: negative angular momentum");
  }
  if (!satisfies_triangle(j1, j2, j3) || !satisfies_triangle(j1, j5, j6) ||
      !satisfies_triangle(j4, j2, j6) || !satisfies_triangle(j4, j5, j3)) {
    return 0.0;
  }
  const int a1 = half_sum(j1.twice() + j2.twice() + j3.twice());
  const int a2 = half_sum(j1.twice() + j5.twice() + j6.twice());
  const int a3 = half_sum(j4.twice() + j2.twice() + j6.twice());
  const int a4 = half_sum(j4.twice() + j5.twice() + j3.twice());
  const int b1 = half_sum(j1.twice() + j2.twice() + j4.twice() + j5.twice());
  const int b2 = half_sum(j2.twice() + j3.twice() + j5.twice() + j6.twice());
  const int b3 = half_sum(j3.twice() + j1.twice() + j6.twice() + j4.twice());
  const int tmin = std::max({a1, a2, a3, a4});
  const int tmax = std::min({b1, b2, b3});
  long double sum = 0.0L;
  for (int t = tmin; t <= tmax; ++t) {
    sum += detail::phase(t) * factorial(t + 1) /
           (factorial(t - a1) * factorial(t - a2) * factorial(t - a3) * factorial(t - a4) *
            factorial(b1 - t) * factorial(b2 - t) * factorial(b3 - t));
  }
  const long double deltas = detail::triangle_coeff(j1, j2, j3) * detail::triangle_coeff(j1, j5, j6) *
                             detail::triangle_coeff(j4, j2, j6) * detail::triangle_coeff(j4, j5, j3);
  return static_cast<double>(deltas * sum);
}

// --- Cesium D1 line -------------------------------------------------------

inline constexpr HalfInt kNuclearSpin = HalfInt::half(7);
inline constexpr HalfInt kElectronSpin = HalfInt::half(1);
inline constexpr HalfInt kLowerF = HalfInt::integer(3);
inline constexpr HalfInt kUpperF = HalfInt::integer(4);

inline void require_hyperfine_level(HalfInt f, const char* who) {
  if (f != kLowerF && f != kUpperF) {
    throw std::invalid_argument(std::string(who) + ": hyperfine level must be 3 or 4, got " + f.str());
  }
}

/// Relative hyperfine dipole strength o_{jf}^{j'f'} for the D1 line
/// (j = j' = 1/2, K = 7/2). The 6j symbol is {f K j'; j 1 f'}.
inline double o_coeff(HalfInt f, HalfInt f_prime) {
  require_hyperfine_level(f, "o_coeff");
  require_hyperfine_level(f_prime, "o_coeff");
  const HalfInt j = kElectronSpin;
  const HalfInt jp = kElectronSpin;
  const HalfInt one = HalfInt::integer(1);
  const int exponent = detail::half_sum(f_prime.twice() + 2 + jp.twice() + kNuclearSpin.twice());
  return static_cast<double>(detail::phase(exponent)) *
         std::sqrt(static_cast<double>(jp.multiplicity() * f.multiplicity())) *
         wigner6j(f, kNuclearSpin, jp, j, one, f_prime);
}

/// Purely geometric part of the rank-2 light-shift coefficient, i.e.
/// c2_coeff with |o|^2 replaced by one.
inline double c2_geometric(HalfInt f_prime, HalfInt f) {
  require_hyperfine_level(f, "c2_coeff");
  require_hyperfine_level(f_prime, "c2_coeff");
  const double fv = f.value();
  const int exponent = detail::half_sum(3 * f.twice() - f_prime.twice());
  const double norm = std::sqrt(fv * (fv + 1) * (2 * fv + 1) * (2 * fv - 1) * (2 * fv + 3));
  const HalfInt one = HalfInt::integer(1);
  return static_cast<double>(detail::phase(exponent)) * std::sqrt(30.0) * f_prime.multiplicity() / norm *
         wigner6j(f, one, f_prime, one, f, HalfInt::integer(2));
}

/// Rank-2 (tensor) light-shift coefficient C^(2)_{j'f'f}.
inline double c2_coeff(HalfInt f_prime, HalfInt f) {
  const double o = o_coeff(f, f_prime);
  return c2_geometric(f_prime, f) * o * o;
}

/// Rank-0 (scalar) light-shift coefficient (2f'+1)/(3(2f+1)) |o|^2, the
/// trace part of (eps*.D)(eps.D^dag) on the f manifold.
inline double c0_coeff(HalfInt f_prime, HalfInt f) {
  const double o = o_coeff(f, f_prime);
  return f_prime.multiplicity() / (3.0 * f.multiplicity()) * o * o;
}

/// Spherical components q = -1, 0, +1 (index q+1) of the raising operator
/// D^dag_{ff'}: each is a (2f'+1) x (2f+1) matrix, rows m' and columns m in
/// ascending order, with entries o_{jf}^{j'f'} <f'm'|fm;1q>.
inline std::array<MatrixC, 3> dipole_raising(HalfInt f, HalfInt f_prime) {
  require_hyperfine_level(f, "dipole_raising");
  require_hyperfine_level(f_prime, "dipole_raising");
  const double o = o_coeff(f, f_prime);
  std::array<MatrixC, 3> out;
  const HalfInt one = HalfInt::integer(1);
  for (int q = -1; q <= 1; ++q) {
    MatrixC a = MatrixC::Zero(f_prime.multiplicity(), f.multiplicity());
    for (int col = 0; col < f.multiplicity(); ++col) {
      const HalfInt m = HalfInt::from_twice(-f.twice() + 2 * col);
      const HalfInt mp = m + HalfInt::integer(q);
      if (!is_projection_of(mp, f_prime)) continue;
      const int row = (mp.twice() + f_prime.twice()) / 2;
      a(row, col) = o * clebsch_gordan(f, m, one, HalfInt::integer(q), f_prime, mp);
    }
    out[static_cast<std::size_t>(q + 1)] = std::move(a);
  }
  return out;
}

// --- Coupled ground space -------------------------------------------------

struct BasisLabel {
  HalfInt f;
  HalfInt m;
};

/// Location of one hyperfine manifold inside the 16-dimensional space.
struct Block {
  HalfInt f;
  int offset;
  int size;
};

struct CoupledSpace {
  HalfInt K = kNuclearSpin;
  HalfInt s = kElectronSpin;
  int dim = kGroundDim;
  std::vector<BasisLabel> basis_labels;
  /// Rows: coupled |f m>, columns: product |m_K m_s> (m_K, m_s descending,
  /// m_s fastest). Real orthogonal.
  MatrixR cg_matrix;
  Matrix16 Kx, Ky, Kz, Sx, Sy, Sz, Fx, Fy, Fz;
  std::array<Block, 2> blocks{};

  const Block& block(HalfInt f) const {
    require_hyperfine_level(f, "CoupledSpace::block");
    return f == kLowerF ? blocks[0] : blocks[1];
  }

  Matrix16 f_squared() const { return Fx * Fx + Fy * Fy + Fz * Fz; }
  /// K.S = (F^2 - K^2 - S^2)/2, diagonal in |f m>. Built from the labels so
  /// that large prefactors (a_hf) do not amplify rounding noise.
  Matrix16 k_dot_s() const {
    const double k2 = K.value() * (K.value() + 1.0);
    const double s2 = s.value() * (s.value() + 1.0);
    Matrix16 out = Matrix16::Zero();
    for (int i = 0; i < dim; ++i) {
      const double f = basis_labels[static_cast<std::size_t>(i)].f.value();
      out(i, i) = 0.5 * (f * (f + 1.0) - k2 - s2);
    }
    return out;
  }
  /// Operator built in the product basis, expressed in the coupled basis.
  Matrix16 from_product(const MatrixC& op) const {
    const MatrixC c = cg_matrix.cast<cplx>();
    return c * op * c.adjoint();
  }
  /// Projector onto one hyperfine manifold.
  Matrix16 manifold_projector(HalfInt f) const {
    const Block& b = block(f);
    Matrix16 p = Matrix16::Zero();
    p.diagonal().segment(b.offset, b.size).setOnes();
    return p;
  }
};

inline CoupledSpace build_coupled_space() {
  CoupledSpace cs;
  const SpinMatrices k = spin_matrices(cs.K);
  const SpinMatrices s = spin_matrices(cs.s);
  const int dk = k.dim();
  const int ds = s.dim();

  cs.blocks = {Block{kLowerF, 0, kLowerF.multiplicity()},
               Block{kUpperF, kLowerF.multiplicity(), kUpperF.multiplicity()}};
  for (const Block& b : cs.blocks) {
    for (int i = 0; i < b.size; ++i) cs.basis_labels.push_back({b.f, HalfInt::from_twice(-b.f.twice() + 2 * i)});
  }

  cs.cg_matrix = MatrixR::Zero(cs.dim, cs.dim);
  for (int row = 0; row < cs.dim; ++row) {
    const auto& [f, m] = cs.basis_labels[static_cast<std::size_t>(row)];
    for (int ik = 0; ik < dk; ++ik) {
      for (int is = 0; is < ds; ++is) {
        const HalfInt mk = HalfInt::from_twice(cs.K.twice() - 2 * ik);
        const HalfInt ms = HalfInt::from_twice(cs.s.twice() - 2 * is);
        cs.cg_matrix(row, ik * ds + is) = clebsch_gordan(cs.K, mk, cs.s, ms, f, m);
      }
    }
  }

  const MatrixC id_k = MatrixC::Identity(dk, dk);
  const MatrixC id_s = MatrixC::Identity(ds, ds);
  auto kron = [](const MatrixC& a, const MatrixC& b) {
    MatrixC out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  };
  cs.Kx = cs.from_product(kron(k.fx, id_s));
  cs.Ky = cs.from_product(kron(k.fy, id_s));
  cs.Kz = cs.from_product(kron(k.fz, id_s));
  cs.Sx = cs.from_product(kron(id_k, s.fx));
  cs.Sy = cs.from_product(kron(id_k, s.fy));
  cs.Sz = cs.from_product(kron(id_k, s.fz));
  cs.Fx = cs.Kx + cs.Sx;
  cs.Fy = cs.Ky + cs.Sy;
  cs.Fz = cs.Kz + cs.Sz;
  return cs;
}

/// Shared immutable instance.
inline const CoupledSpace& coupled_space() {
  static const CoupledSpace instance = build_coupled_space();
  return instance;
}

}  // namespace serfkick::angular
