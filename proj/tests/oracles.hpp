#pragma once

// Reference computations that share no code with the library's closed-form
// coupling formulas: Clebsch-Gordan tables from lowering-operator
// recursion plus Gram-Schmidt, and 6j symbols from explicit recoupling
// overlaps of those tables.

#include "serfkick/half_int.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <utility>

namespace oracle {

using serfkick::HalfInt;

/// All <J M | j1 m1; j2 m2> for one (j1, j2) pair, built by acting with
/// J_- on highest-weight states in the product basis. Long double with a
/// second Gram-Schmidt pass: one pass loses ~1e-9 of orthogonality at j = 4.
class CgTable {
  using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

 public:
  CgTable(int tj1, int tj2) : tj1_(tj1), tj2_(tj2) {
    const int d1 = tj1 + 1, d2 = tj2 + 1, n = d1 * d2;
    // product index: (j1 - m1) * d2 + (j2 - m2)
    auto lower = [&](const Vec& v) {
      Vec out = Vec::Zero(n);
      for (int a = 0; a < d1; ++a)
        for (int b = 0; b < d2; ++b) {
          const long double c = v(a * d2 + b);
          if (c == 0.0L) continue;
          const long double m1 = 0.5L * tj1 - a, m2 = 0.5L * tj2 - b;
          const long double j1 = 0.5L * tj1, j2 = 0.5L * tj2;
          if (a + 1 < d1) out((a + 1) * d2 + b) += c * std::sqrt(j1 * (j1 + 1) - m1 * (m1 - 1));
          if (b + 1 < d2) out(a * d2 + b + 1) += c * std::sqrt(j2 * (j2 + 1) - m2 * (m2 - 1));
        }
      return out;
    };
    for (int tJ = tj1 + tj2; tJ >= std::abs(tj1 - tj2); tJ -= 2) {
      // highest weight M = J: orthogonal to every larger J at the same M
      Vec top = Vec::Zero(n);
      for (int a = 0; a < d1; ++a) {
        const int b = (tj1 + tj2 - tJ) / 2 - a;
        if (b >= 0 && b < d2) top(a * d2 + b) = 1.0L + 0.1L * a;  // generic seed
      }
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& [key, vec] : states_)
          if (key.second == tJ && key.first > tJ) top -= vec.dot(top) * vec;
      top.normalize();
      // Condon-Shortley: <j1 j1; j2 J-j1 | J J> > 0
      const int b0 = (tj1 + tj2 - tJ) / 2;
      if (b0 < d2 && top(b0) < 0.0) top = -top;
      Vec v = top;
      for (int tM = tJ; tM >= -tJ; tM -= 2) {
        states_[{tJ, tM}] = v;
        if (tM > -tJ) v = lower(v).normalized();
      }
    }
  }

  double operator()(HalfInt m1, HalfInt m2, HalfInt J, HalfInt M) const {
    if (m1.twice() + m2.twice() != M.twice()) return 0.0;
    auto it = states_.find({J.twice(), M.twice()});
    if (it == states_.end()) return 0.0;
    const int a = (tj1_ - m1.twice()) / 2, b = (tj2_ - m2.twice()) / 2;
    if (a < 0 || a > tj1_ || b < 0 || b > tj2_) return 0.0;
    return static_cast<double>(it->second(a * (tj2_ + 1) + b));
  }

 private:
  int tj1_, tj2_;
  std::map<std::pair<int, int>, Vec> states_;
};

class CgCache {
 public:
  const CgTable& get(HalfInt j1, HalfInt j2) {
    auto key = std::make_pair(j1.twice(), j2.twice());
    auto it = tables_.find(key);
    if (it == tables_.end()) it = tables_.emplace(key, CgTable(j1.twice(), j2.twice())).first;
    return it->second;
  }

 private:
  std::map<std::pair<int, int>, CgTable> tables_;
};

/// {j1 j2 j12; j3 J j23} from the overlap of the two coupling orders at
/// M = J, summed over every magnetic quantum number.
inline double recoupling_6j(CgCache& cache, HalfInt j1, HalfInt j2, HalfInt j12, HalfInt j3, HalfInt J,
                            HalfInt j23) {
  if (!serfkick::satisfies_triangle(j1, j2, j12) || !serfkick::satisfies_triangle(j12, j3, J) ||
      !serfkick::satisfies_triangle(j2, j3, j23) || !serfkick::satisfies_triangle(j1, j23, J)) {
    return 0.0;
  }
  const auto& c12 = cache.get(j1, j2);
  const auto& c12_3 = cache.get(j12, j3);
  const auto& c23 = cache.get(j2, j3);
  const auto& c1_23 = cache.get(j1, j23);
  const HalfInt M = J;
  double overlap = 0.0;
  for (int t1 = -j1.twice(); t1 <= j1.twice(); t1 += 2) {
    for (int t2 = -j2.twice(); t2 <= j2.twice(); t2 += 2) {
      const int t3 = M.twice() - t1 - t2;
      if (std::abs(t3) > j3.twice()) continue;
      const auto m1 = HalfInt::from_twice(t1), m2 = HalfInt::from_twice(t2), m3 = HalfInt::from_twice(t3);
      const double left = c12(m1, m2, j12, m1 + m2) * c12_3(m1 + m2, m3, J, M);
      const double right = c23(m2, m3, j23, m2 + m3) * c1_23(m1, m2 + m3, J, M);
      overlap += left * right;
    }
  }
  const int tsum = j1.twice() + j2.twice() + j3.twice() + J.twice();
  const double sign = (tsum / 2) % 2 == 0 ? 1.0 : -1.0;
  return sign * overlap / std::sqrt(static_cast<double>(j12.multiplicity() * j23.multiplicity()));
}

}  // namespace oracle
