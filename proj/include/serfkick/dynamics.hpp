#pragma once

// SERF master equation for the cesium ground state with optional off-resonant
// light pulses (rank-2 ac-Stark kicks plus optical pumping), Doppler averaging
// over the D1 detuning and explicit Euler stepping with hyperfine-coherence
// removal. This header holds the reference (matrix-form) generator; the fast
// superoperator integrator built from it lives in propagator.hpp.

#include "serfkick/angular.hpp"
#include "serfkick/constants.hpp"
#include "serfkick/errors.hpp"
#include "serfkick/linalg.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace serfkick::dynamics {

using angular::kLowerF;
using angular::kUpperF;

/// Reference: Omega_Lar scaled linearly from a stored value at a reference
/// field. Formula: g mu_B B / hbar.
enum class LarmorMode { Reference, Formula };
/// Literal: one Omega_Lar * F_y on both manifolds. Signed: sign of g_f per manifold.
enum class LarmorSign { Literal, Signed };
enum class SpinExchangeForm { Symmetrized, Literal };
/// Physical: one laser frequency, so the f=4 detunings include the ground
/// hyperfine splitting. PerManifold: both manifolds see the f=3 detunings.
enum class DetuningMode { Physical, PerManifold };
/// FullTensor: scalar + rank-2 parts of (eps*.D)(eps.D^dag). Rank2Only: the
/// C2 (eps.F)^2 term alone.
enum class LightShiftModel { FullTensor, Rank2Only };

struct MagnetometerParams {
  double r_se = 12.0;     ///< spin-exchange rate [1/s]
  double r_sd = 0.12;     ///< spin-destruction rate [1/s]
  double b_field = 4e-14;  ///< field along y [T]
  LarmorMode larmor_mode = LarmorMode::Reference;
  double larmor_reference = units::millihertz_to_rad_s(0.44);  ///< Omega_Lar at larmor_reference_field [rad/s]
  double larmor_reference_field = 4e-14;                       ///< [T]
  double g_factor = 0.25;                                      ///< |g_f| for LarmorMode::Formula
  LarmorSign larmor_sign = LarmorSign::Literal;
  double temperature = 294.0;                          ///< [K]
  double density = units::per_cm3_to_per_m3(2e10);     ///< [1/m^3]
  double polarization_q = 0.95;
  double doppler_fwhm = units::mhz_to_rad_s(357.0);  ///< [rad/s]
  int doppler_points = 21;
  double doppler_sigma_cut = 3.0;
  double dt_free = 10e-6;   ///< [s]
  double dt_pulse = 20e-9;  ///< [s]
  bool hermitize_each_step = true;
  bool renormalize_trace = true;
  SpinExchangeForm spin_exchange_form = SpinExchangeForm::Symmetrized;
  bool hyperfine_term = true;
};

struct PulseSchedule {
  double period_tau = 1e-3;       ///< [s]
  double pulse_duration = 2e-6;   ///< [s], final part of each period
  double i_kick = units::mw_cm2_to_w_m2(0.1);  ///< [W/m^2]
  double detuning_34 = units::mhz_to_rad_s(-584.0);  ///< laser minus (f=3 -> f'=4) [rad/s]
  DetuningMode detuning_mode = DetuningMode::PerManifold;
  LightShiftModel light_model = LightShiftModel::FullTensor;
  Eigen::Vector3d polarization{1.0, 0.0, 0.0};
  Eigen::Vector3d propagation{0.0, 0.0, 1.0};
  bool kicks_enabled = true;

  double pulse_start() const { return period_tau - pulse_duration; }
};

inline void validate(const MagnetometerParams& p, const PulseSchedule& s) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
  };
  require(p.r_se >= 0.0 && std::isfinite(p.r_se), "r_se must be a non-negative rate");
  require(p.r_sd >= 0.0 && std::isfinite(p.r_sd), "r_sd must be a non-negative rate");
  require(std::isfinite(p.b_field), "b_field must be finite");
  require(p.larmor_reference_field > 0.0, "larmor reference field must be positive");
  require(p.temperature > 0.0, "temperature must be positive");
  require(p.density > 0.0, "density must be positive");
  require(p.polarization_q >= 0.0 && p.polarization_q <= 1.0, "polarization q must lie in [0, 1]");
  require(p.doppler_fwhm >= 0.0, "Doppler FWHM must be non-negative");
  require(p.doppler_points >= 1, "doppler_points must be >= 1");
  require(p.doppler_sigma_cut > 0.0, "doppler_sigma_cut must be positive");
  require(p.dt_free > 0.0 && p.dt_pulse > 0.0, "time steps must be positive");
  require(s.period_tau > 0.0, "period must be positive");
  require(s.pulse_duration > 0.0 && s.pulse_duration < s.period_tau, "pulse duration must lie in (0, tau)");
  require(s.i_kick >= 0.0, "kick intensity must be non-negative");
  require(std::abs(s.polarization.norm() - 1.0) < 1e-9, "polarization must be a unit vector");
  require(std::abs(s.propagation.norm() - 1.0) < 1e-9, "propagation must be a unit vector");
  require(std::abs(s.polarization.dot(s.propagation)) < 1e-9, "polarization must be orthogonal to propagation");
  require(p.dt_pulse <= s.pulse_duration, "dt_pulse must not exceed the pulse duration");
  require(p.dt_free <= s.period_tau - s.pulse_duration, "dt_free must not exceed the free segment");
}

// --- elementary rates -----------------------------------------------------

/// Omega_Lar = g mu_B B / hbar [rad/s].
inline double larmor_frequency(double b_field, double g, const PhysicalConstants& c = {}) {
  return g * c.bohr_magneton_over_hbar * b_field;
}

/// Larmor rate used by the model for field `b_field`.
inline double larmor_rate(const MagnetometerParams& p, double b_field, const PhysicalConstants& c = {}) {
  if (p.larmor_mode == LarmorMode::Reference) return p.larmor_reference * b_field / p.larmor_reference_field;
  return larmor_frequency(b_field, p.g_factor, c);
}

/// Characteristic D1 Rabi frequency gamma_nat sqrt(I / (2 I_sat)).
inline double rabi_frequency(double i_kick, const PhysicalConstants& c = {}) {
  if (i_kick < 0.0) throw ValidationError("rabi_frequency: negative intensity");
  return c.gamma_nat * std::sqrt(i_kick / (2.0 * c.i_sat));
}

/// Doppler FWHM of the D1 line, sqrt(8 ln2 k T / m) / lambda, as [rad/s].
inline double doppler_fwhm_from_temperature(double temperature, const PhysicalConstants& c = {}) {
  const double v = std::sqrt(8.0 * std::numbers::ln2 * c.boltzmann * temperature / c.atom_mass);
  return units::kTwoPi * v / c.d1_wavelength;
}

/// Detuning of the laser from the f -> f' transition [rad/s].
inline double detuning(const PulseSchedule& s, HalfInt f, HalfInt f_prime, const PhysicalConstants& c = {}) {
  angular::require_hyperfine_level(f, "detuning");
  angular::require_hyperfine_level(f_prime, "detuning");
  double d = s.detuning_34;
  if (f_prime == kLowerF) d += c.hyperfine_splitting_excited;
  if (f == kUpperF && s.detuning_mode == DetuningMode::Physical) d += c.hyperfine_splitting_ground;
  return d;
}

// --- Doppler quadrature ---------------------------------------------------

struct DopplerGrid {
  std::vector<double> shifts;   ///< [rad/s]
  std::vector<double> weights;  ///< sum to one
};

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    if (n == 1) {
      x = 0.0;
      dp = 1.0;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
}

/// Truncated-Gaussian quadrature over [-cut sigma, cut sigma] of the
/// Doppler detuning distribution, sigma = fwhm / (2 sqrt(2 ln 2)).
inline DopplerGrid doppler_grid(double fwhm, int points, double sigma_cut) {
  if (points < 1) throw ValidationError("doppler_grid: need at least one node");
  if (fwhm < 0.0) throw ValidationError("doppler_grid: negative FWHM");
  std::vector<double> x, w;
  gauss_legendre(points, x, w);
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  DopplerGrid g;
  double total = 0.0;
  for (int i = 0; i < points; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double xi = x[u] * sigma_cut;  // in units of sigma
    g.shifts.push_back(xi * sigma);
    g.weights.push_back(w[u] * std::exp(-0.5 * xi * xi));
    total += g.weights.back();
  }
  for (double& wi : g.weights) wi /= total;
  return g;
}

// --- states and structural maps --------------------------------------------

/// Spin-temperature state exp(beta K_z) exp(beta S_z) / (Z_K Z_S) with
/// beta = ln((1+q)/(1-q)), polarized along z, in the coupled basis.
inline Matrix16 thermal_state(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("thermal_state: polarization must lie in [0, 1]");
  const auto& cs = angular::coupled_space();
  // weights relative to the largest projection keep q -> 1 finite
  auto weights = [q](HalfInt j) {
    const int d = j.multiplicity();
    VectorR w(d);
    for (int i = 0; i < d; ++i) {
      const double below_top = i;  // j - m, descending order
      w(i) = q == 1.0 ? (i == 0 ? 1.0 : 0.0) : std::pow((1.0 - q) / (1.0 + q), below_top);
    }
    return (w / w.sum()).eval();
  };
  const VectorR wk = weights(cs.K);
  const VectorR ws = weights(cs.s);
  MatrixC product = MatrixC::Zero(cs.dim, cs.dim);
  for (int ik = 0; ik < wk.size(); ++ik)
    for (int is = 0; is < ws.size(); ++is) product(ik * ws.size() + is, ik * ws.size() + is) = wk(ik) * ws(is);
  return cs.from_product(product);
}

/// phi = rho/4 + S.rho S, the purely nuclear part.
inline Matrix16 nuclear_part(const Matrix16& rho) {
  const auto& cs = angular::coupled_space();
  return 0.25 * rho + cs.Sx * rho * cs.Sx + cs.Sy * rho * cs.Sy + cs.Sz * rho * cs.Sz;
}

inline Eigen::Vector3d expectation_s(const Matrix16& rho) {
  const auto& cs = angular::coupled_space();
  return {(cs.Sx * rho).trace().real(), (cs.Sy * rho).trace().real(), (cs.Sz * rho).trace().real()};
}

inline Eigen::Vector3d expectation_f(const Matrix16& rho) {
  const auto& cs = angular::coupled_space();
  return {(cs.Fx * rho).trace().real(), (cs.Fy * rho).trace().real(), (cs.Fz * rho).trace().real()};
}

/// Removes the f=3 <-> f=4 coherence blocks.
inline Matrix16 zero_hyperfine_coherences(const Matrix16& rho) {
  const auto& cs = angular::coupled_space();
  const auto& lo = cs.blocks[0];
  const auto& hi = cs.blocks[1];
  Matrix16 out = rho;
  out.block(lo.offset, hi.offset, lo.size, hi.size).setZero();
  out.block(hi.offset, lo.offset, hi.size, lo.size).setZero();
  return out;
}

// --- master equation ------------------------------------------------------

/// W_q^{f_b f_a} as 16x16 operators, indexed [q+1][f_b index][f_a index]
/// with manifold index 0 for f=3 and 1 for f=4.
using JumpOperators = std::array<std::array<std::array<Matrix16, 2>, 2>, 3>;

/// Laser-dependent operators at a single Doppler detuning shift.
struct LightOperators {
  double shift = 0.0;
  Matrix16 hamiltonian;  ///< light part of H_eff (non-Hermitian)
  JumpOperators jumps;
};

struct StepResult {
  Matrix16 rho;
  double trace_drift = 0.0;        ///< |tr - 1| before renormalization
  double trace_correction = 0.0;   ///< applied renormalization, |tr - 1| or 0
  double hermiticity_drift = 0.0;  ///< defect removed by Hermitization
};

class MasterEquation {
 public:
  MasterEquation(MagnetometerParams params, PulseSchedule schedule, PhysicalConstants constants = {})
      : params_(std::move(params)), schedule_(std::move(schedule)), constants_(std::move(constants)) {
    constants_.validate();
    validate(params_, schedule_);
    const auto& cs = angular::coupled_space();
    larmor_ = larmor_rate(params_, params_.b_field, constants_);
    rabi_ = rabi_frequency(schedule_.i_kick, constants_);
    larmor_generator_ = cs.Fy;
    if (params_.larmor_sign == LarmorSign::Signed) {
      const double s3 = constants_.g_f3 < 0 ? -1.0 : 1.0;
      const double s4 = constants_.g_f4 < 0 ? -1.0 : 1.0;
      larmor_generator_ = s3 * cs.manifold_projector(kLowerF) * cs.Fy * cs.manifold_projector(kLowerF) +
                          s4 * cs.manifold_projector(kUpperF) * cs.Fy * cs.manifold_projector(kUpperF);
    }
    grid_ = doppler_grid(params_.doppler_fwhm, params_.doppler_points, params_.doppler_sigma_cut);
    light_.reserve(grid_.shifts.size());
    for (double shift : grid_.shifts) light_.push_back(light_operators(shift));
  }

  const MagnetometerParams& params() const { return params_; }
  const PulseSchedule& schedule() const { return schedule_; }
  const PhysicalConstants& constants() const { return constants_; }
  const DopplerGrid& grid() const { return grid_; }
  const std::vector<LightOperators>& light_table() const { return light_; }
  double larmor() const { return larmor_; }
  double rabi() const { return rabi_; }
  double detuning(HalfInt f, HalfInt f_prime) const { return dynamics::detuning(schedule_, f, f_prime, constants_); }

  /// H_A^eff (hbar = 1): Larmor precession plus, with the laser on, the
  /// light shift and absorption at the given Doppler shift.
  Matrix16 effective_hamiltonian(bool laser_on, double doppler_shift) const {
    Matrix16 h = larmor_ * larmor_generator_;
    if (laser_on) h += light_hamiltonian(doppler_shift);
    return h;
  }

  JumpOperators jump_operators(double doppler_shift) const {
    const auto& cs = angular::coupled_space();
    const std::array<HalfInt, 2> levels{kLowerF, kUpperF};
    JumpOperators w;
    for (auto& per_q : w)
      for (auto& row : per_q)
        for (auto& op : row) op = Matrix16::Zero();

    for (std::size_t ia = 0; ia < 2; ++ia) {
      const HalfInt fa = levels[ia];
      const auto& ba = cs.block(fa);
      for (HalfInt fp : levels) {
        const cplx c = (0.5 * rabi_) / cplx(detuning(fa, fp) + doppler_shift, 0.5 * constants_.gamma_nat);
        const MatrixC excite = polarization_raising(fa, fp);  // (2f'+1) x (2fa+1)
        for (std::size_t ib = 0; ib < 2; ++ib) {
          const HalfInt fb = levels[ib];
          const auto& bb = cs.block(fb);
          const auto raising_b = angular::dipole_raising(fb, fp);
          for (int q = -1; q <= 1; ++q) {
            // e_q^* . D_{f_b f'} is the adjoint of the q-th raising component
            const MatrixC decay = raising_b[static_cast<std::size_t>(q + 1)].adjoint();
            w[static_cast<std::size_t>(q + 1)][ib][ia].block(bb.offset, ba.offset, bb.size, ba.size) +=
                c * decay * excite;
          }
        }
      }
    }
    return w;
  }

  /// Laser-independent part: spin exchange, spin destruction, hyperfine
  /// coupling and Larmor precession.
  Matrix16 collisional_rhs(const Matrix16& rho) const {
    return linear_collisional_rhs(rho) + spin_exchange_drive(rho, expectation_s(rho));
  }

  /// Collisional terms with the <S>-dependent spin-exchange drive removed.
  Matrix16 linear_collisional_rhs(const Matrix16& rho) const {
    const auto& cs = angular::coupled_space();
    const Matrix16 phi = nuclear_part(rho);
    Matrix16 out = (params_.r_se + params_.r_sd) * (phi - rho);
    out += -kI * larmor_ * (larmor_generator_ * rho - rho * larmor_generator_);
    if (params_.hyperfine_term) {
      const Matrix16 ks = cs.k_dot_s();
      out += -kI * constants_.a_hf * (ks * rho - rho * ks);
    }
    return out;
  }

  /// R_se * phi * 4 <S>.S, symmetrized or literal per configuration.
  Matrix16 spin_exchange_drive(const Matrix16& rho, const Eigen::Vector3d& s_mean) const {
    const auto& cs = angular::coupled_space();
    const Matrix16 phi = nuclear_part(rho);
    const Matrix16 sdot = s_mean.x() * cs.Sx + s_mean.y() * cs.Sy + s_mean.z() * cs.Sz;
    if (params_.spin_exchange_form == SpinExchangeForm::Literal) return 4.0 * params_.r_se * (phi * sdot);
    return 2.0 * params_.r_se * (phi * sdot + sdot * phi);
  }

  /// Light-induced terms at one Doppler node: non-Hermitian evolution plus
  /// optical-pumping repopulation.
  Matrix16 light_rhs(const Matrix16& rho, const LightOperators& ops) const {
    const auto& cs = angular::coupled_space();
    const Matrix16 p3 = cs.manifold_projector(kLowerF);
    const Matrix16 p4 = cs.manifold_projector(kUpperF);
    const std::array<Matrix16, 2> proj{p3, p4};
    Matrix16 out = -kI * (ops.hamiltonian * rho - rho * ops.hamiltonian.adjoint());
    Matrix16 feed = Matrix16::Zero();
    for (const auto& w : ops.jumps) {
      for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t f1 = 0; f1 < 2; ++f1) feed += w[f][f1] * (proj[f1] * rho * proj[f1]) * w[f][f1].adjoint();
      for (std::size_t f1 = 0; f1 < 2; ++f1)
        for (std::size_t f2 = 0; f2 < 2; ++f2) {
          if (f1 == f2) continue;
          feed += w[f2][f2] * (proj[f2] * rho * proj[f1]) * w[f1][f1].adjoint();
        }
    }
    return out + constants_.gamma_nat * feed;
  }

  Matrix16 master_rhs(const Matrix16& rho, bool laser_on, double doppler_shift) const {
    Matrix16 out = collisional_rhs(rho);
    if (laser_on) out += light_rhs(rho, light_operators(doppler_shift));
    return out;
  }

  /// Right-hand side averaged over the Doppler grid; only the light terms
  /// depend on the detuning.
  Matrix16 averaged_master_rhs(const Matrix16& rho, bool laser_on) const {
    Matrix16 out = collisional_rhs(rho);
    if (laser_on) {
      for (std::size_t i = 0; i < light_.size(); ++i) out += grid_.weights[i] * light_rhs(rho, light_[i]);
    }
    return out;
  }

  /// One explicit Euler step followed by coherence removal and the
  /// configured clean-ups.
  StepResult euler_step(const Matrix16& rho, double dt, bool laser_on, double positivity_tolerance = 1e-8) const {
    if (!(dt > 0.0)) throw ValidationError("euler_step: dt must be positive");
    StepResult r;
    r.rho = zero_hyperfine_coherences(rho + dt * averaged_master_rhs(rho, laser_on));
    if (params_.hermitize_each_step) {
      r.hermiticity_drift = hermiticity_defect(r.rho);
      r.rho = hermitian_part(r.rho);
    }
    const double tr = r.rho.trace().real();
    r.trace_drift = std::abs(tr - 1.0);
    if (params_.renormalize_trace && r.trace_drift > kTraceRenormalizationThreshold) {
      r.rho /= tr;
      r.trace_correction = r.trace_drift;
    }
    const double lam = min_eigenvalue(r.rho);
    if (lam < -positivity_tolerance) {
      throw NumericalError("euler_step: density matrix lost positivity (min eigenvalue " + std::to_string(lam) + ")");
    }
    return r;
  }

  /// Kicked-top strength of one pulse on the f=3 manifold:
  /// (2f+1) T_pulse |sum_f' Omega^2 C2 / (4 Delta_{3f'})|.
  double effective_kick_strength() const {
    double shift = 0.0;
    for (HalfInt fp : {kLowerF, kUpperF}) {
      shift += rabi_ * rabi_ * angular::c2_coeff(fp, kLowerF) / (4.0 * detuning(kLowerF, fp));
    }
    return std::abs(shift) * schedule_.pulse_duration * kLowerF.multiplicity();
  }

  /// Light part of H_eff at one Doppler shift, assembled from the C0/C2
  /// decomposition on each manifold.
  Matrix16 light_hamiltonian(double doppler_shift) const {
    const auto& cs = angular::coupled_space();
    const Eigen::Vector3d& e = schedule_.polarization;
    const Matrix16 ef = e.x() * cs.Fx + e.y() * cs.Fy + e.z() * cs.Fz;
    const Matrix16 ef2 = ef * ef;
    Matrix16 h = Matrix16::Zero();
    for (HalfInt f : {kLowerF, kUpperF}) {
      const Matrix16 p = cs.manifold_projector(f);
      const double ff1 = f.value() * (f.value() + 1.0);
      for (HalfInt fp : {kLowerF, kUpperF}) {
        const cplx c = rabi_ * rabi_ / (4.0 * cplx(detuning(f, fp) + doppler_shift, 0.5 * constants_.gamma_nat));
        const double c2 = angular::c2_coeff(fp, f);
        h += c * c2 * (p * ef2 * p);
        if (schedule_.light_model == LightShiftModel::FullTensor) {
          h += c * (angular::c0_coeff(fp, f) - c2 * ff1 / 3.0) * p;
        }
      }
    }
    return h;
  }

  LightOperators light_operators(double doppler_shift) const {
    return LightOperators{doppler_shift, light_hamiltonian(doppler_shift), jump_operators(doppler_shift)};
  }

  static constexpr double kTraceRenormalizationThreshold = 1e-9;

 private:
  /// eps_L . D^dag_{ff'} from the spherical components.
  MatrixC polarization_raising(HalfInt f, HalfInt f_prime) const {
    const auto comps = angular::dipole_raising(f, f_prime);
    const double s = 1.0 / std::sqrt(2.0);
    // e_q^* for q = -1, 0, +1
    const std::array<Eigen::Vector3cd, 3> e_conj{
        Eigen::Vector3cd(s, kI * s, 0.0), Eigen::Vector3cd(0.0, 0.0, 1.0), Eigen::Vector3cd(-s, kI * s, 0.0)};
    const Eigen::Vector3cd eps = schedule_.polarization.cast<cplx>();
    MatrixC out = MatrixC::Zero(comps[0].rows(), comps[0].cols());
    for (std::size_t i = 0; i < 3; ++i) out += eps.cwiseProduct(e_conj[i]).sum() * comps[i];
    return out;
  }

  MagnetometerParams params_;
  PulseSchedule schedule_;
  PhysicalConstants constants_;
  double larmor_ = 0.0;
  double rabi_ = 0.0;
  Matrix16 larmor_generator_;
  DopplerGrid grid_;
  std::vector<LightOperators> light_;
};

}  // namespace serfkick::dynamics
