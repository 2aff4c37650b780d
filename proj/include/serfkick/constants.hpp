#pragma once

// Physical constants of 133Cs and the unit conversions used at the
// configuration boundary. Internally: seconds, tesla, W/m^2, and angular
// frequencies in rad/s. Collision rates stay plain rates (1/s).

#include "serfkick/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace serfkick {

namespace units {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double mhz_to_rad_s(double mhz) { return kTwoPi * 1e6 * mhz; }
constexpr double rad_s_to_mhz(double w) { return w / (kTwoPi * 1e6); }
constexpr double millihertz_to_rad_s(double mhz) { return kTwoPi * 1e-3 * mhz; }
constexpr double rad_s_to_millihertz(double w) { return w / (kTwoPi * 1e-3); }
constexpr double mw_cm2_to_w_m2(double i) { return 10.0 * i; }
constexpr double w_m2_to_mw_cm2(double i) { return 0.1 * i; }
constexpr double us_to_s(double t) { return 1e-6 * t; }
constexpr double ns_to_s(double t) { return 1e-9 * t; }
constexpr double ms_to_s(double t) { return 1e-3 * t; }
constexpr double per_cm3_to_per_m3(double n) { return 1e6 * n; }

}  // namespace units

struct PhysicalConstants {
  double gamma_nat = units::mhz_to_rad_s(4.575);                     ///< D1 natural linewidth [rad/s]
  double i_sat = units::mw_cm2_to_w_m2(2.5);                         ///< off-resonant linear-polarization I_sat [W/m^2]
  double hyperfine_splitting_excited = units::mhz_to_rad_s(1167.68);  ///< 6P1/2 f'=3 <-> f'=4 [rad/s]
  double hyperfine_splitting_ground = units::mhz_to_rad_s(9192.631770);  ///< 6S1/2 f=3 <-> f=4 [rad/s]
  double a_hf = units::mhz_to_rad_s(2298.1579425);                   ///< ground hyperfine constant [rad/s]
  double g_f3 = -0.25;
  double g_f4 = 0.25;
  double bohr_magneton_over_hbar = 8.7941e10;  ///< [rad/(s T)]
  double atom_mass = 2.20694695e-25;           ///< [kg]
  double boltzmann = 1.380649e-23;             ///< [J/K]
  double d1_wavelength = 894.59295986e-9;      ///< [m]

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string("constant ") + name + " must be positive");
    };
    positive(gamma_nat, "gamma_nat");
    positive(i_sat, "i_sat");
    positive(hyperfine_splitting_excited, "hyperfine_splitting_excited");
    positive(hyperfine_splitting_ground, "hyperfine_splitting_ground");
    positive(a_hf, "a_hf");
    positive(bohr_magneton_over_hbar, "bohr_magneton_over_hbar");
    positive(atom_mass, "atom_mass");
    positive(boltzmann, "boltzmann");
    positive(d1_wavelength, "d1_wavelength");
  }
};

/// Wall-collision damping of the coated 3 cm cell. Not part of the model:
/// spin destruction dominates it by an order of magnitude.
inline constexpr double kWallRelaxationRate = 11e-3;

}  // namespace serfkick
