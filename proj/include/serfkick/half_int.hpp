#pragma once

#include <compare>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace serfkick {

/// Angular-momentum quantum number stored as twice its value so that
/// half-integers are exact. Used for both magnitudes (j) and projections (m).
class HalfInt {
 public:
  constexpr HalfInt() = default;

  static constexpr HalfInt from_twice(int twice) { return HalfInt(twice); }
  static constexpr HalfInt integer(int value) { return HalfInt(2 * value); }
  static constexpr HalfInt half(int numerator) { return HalfInt(numerator); }

  /// Accepts any double that is an exact multiple of 1/2.
  static HalfInt from_double(double value) {
    const double twice = 2.0 * value;
    const auto rounded = static_cast<int>(twice >= 0 ? twice + 0.5 : twice - 0.5);
    if (std::abs(twice - rounded) > 1e-9) {
      throw std::invalid_argument("HalfInt: " + std::to_string(value) +
                                  " is not a multiple of 1/2");
    }
    return HalfInt(rounded);
  }

  constexpr int twice() const { return twice_; }
  constexpr double value() const { return 0.5 * twice_; }
  constexpr bool is_integer() const { return twice_ % 2 == 0; }
  constexpr bool is_half_odd() const { return !is_integer(); }

  /// Dimension 2j+1 of a multiplet with this magnitude.
  constexpr int multiplicity() const { return twice_ + 1; }

  constexpr HalfInt operator-() const { return HalfInt(-twice_); }
  constexpr HalfInt operator+(HalfInt o) const { return HalfInt(twice_ + o.twice_); }
  constexpr HalfInt operator-(HalfInt o) const { return HalfInt(twice_ - o.twice_); }

  constexpr auto operator<=>(const HalfInt&) const = default;

  std::string str() const {
    if (is_integer()) return std::to_string(twice_ / 2);
    return std::to_string(twice_) + "/2";
  }

 private:
  constexpr explicit HalfInt(int twice) : twice_(twice) {}
  int twice_ = 0;
};

/// True when m is an allowed projection of j: |m| <= j and j - m integer.
constexpr bool is_projection_of(HalfInt m, HalfInt j) {
  const int tj = j.twice();
  const int tm = m.twice();
  return tj >= 0 && tm <= tj && tm >= -tj && ((tj - tm) % 2 == 0);
}

/// Triangle rule for three magnitudes, including the integer-sum condition.
constexpr bool satisfies_triangle(HalfInt a, HalfInt b, HalfInt c) {
  const int ta = a.twice(), tb = b.twice(), tc = c.twice();
  if (ta < 0 || tb < 0 || tc < 0) return false;
  if ((ta + tb + tc) % 2 != 0) return false;
  return tc <= ta + tb && tc >= (ta > tb ? ta - tb : tb - ta);
}

}  // namespace serfkick
