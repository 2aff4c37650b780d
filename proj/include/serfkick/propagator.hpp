#pragma once

// Fast integrator for the master equation. Because the coherence blocks are
// removed after every Euler step, the state lives in the 7x7 and 9x9
// Hermitian diagonal blocks: 130 real coordinates. Every linear part of the
// generator (relaxation, Larmor, the Doppler-averaged light terms) is
// tabulated once as a sparse real superoperator on those coordinates, and the
// spin-exchange drive is kept as sum_i <S_i> M_i with sparse M_i.

#include "serfkick/dynamics.hpp"
#include "serfkick/trajectory.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace serfkick::dynamics {

/// Real coordinates of a block-diagonal Hermitian 16x16 matrix.
class BlockCoordinates {
 public:
  struct Entry {
    int row, col;
    bool imaginary;
  };

  BlockCoordinates() {
    const auto& cs = angular::coupled_space();
    for (const auto& b : cs.blocks) {
      for (int i = 0; i < b.size; ++i) {
        trace_indices_.push_back(static_cast<int>(entries_.size()));
        entries_.push_back({b.offset + i, b.offset + i, false});
        for (int j = i + 1; j < b.size; ++j) {
          entries_.push_back({b.offset + i, b.offset + j, false});
          entries_.push_back({b.offset + i, b.offset + j, true});
        }
      }
    }
  }

  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<int>& trace_indices() const { return trace_indices_; }

  /// Reads the diagonal blocks of a (Hermitian) matrix.
  VectorR to_vector(const Matrix16& m) const {
    VectorR v(size());
    for (int k = 0; k < size(); ++k) {
      const Entry& e = entries_[static_cast<std::size_t>(k)];
      v(k) = e.imaginary ? m(e.row, e.col).imag() : m(e.row, e.col).real();
    }
    return v;
  }

  Matrix16 to_matrix(const VectorR& v) const {
    Matrix16 m = Matrix16::Zero();
    for (int k = 0; k < size(); ++k) {
      const Entry& e = entries_[static_cast<std::size_t>(k)];
      if (e.row == e.col) {
        m(e.row, e.col) += v(k);
      } else if (e.imaginary) {
        m(e.row, e.col) += kI * v(k);
        m(e.col, e.row) -= kI * v(k);
      } else {
        m(e.row, e.col) += v(k);
        m(e.col, e.row) += v(k);
      }
    }
    return m;
  }

  double trace(const VectorR& v) const {
    double t = 0.0;
    for (int i : trace_indices_) t += v(i);
    return t;
  }

  /// Row vector r with r.v = tr(op * rho) for Hermitian op.
  VectorR expectation_row(const Matrix16& op) const {
    VectorR r(size());
    for (int k = 0; k < size(); ++k) r(k) = (op * to_matrix(VectorR::Unit(size(), k))).trace().real();
    return r;
  }

  using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  /// Tabulates a linear, Hermiticity-preserving map restricted to the blocks.
  SparseMatrix superoperator(const std::function<Matrix16(const Matrix16&)>& map) const {
    std::vector<Eigen::Triplet<double>> triplets;
    for (int k = 0; k < size(); ++k) {
      const VectorR col = to_vector(map(to_matrix(VectorR::Unit(size(), k))));
      for (int r = 0; r < size(); ++r) {
        if (col(r) != 0.0) triplets.emplace_back(r, k, col(r));
      }
    }
    SparseMatrix s(size(), size());
    s.setFromTriplets(triplets.begin(), triplets.end());
    return s;
  }

 private:
  std::vector<Entry> entries_;
  std::vector<int> trace_indices_;
};

struct EvolveOptions {
  int snapshot_stride = 1;  ///< periods between snapshots
  double positivity_tolerance = 1e-8;
  std::ostream* log = nullptr;  ///< diagnostic line (t, trace drift, min eigenvalue, <S>, <F>) when set
  int log_stride = 1;           ///< periods between log lines
};

struct TrajectoryDiagnostics {
  long long steps = 0;
  double max_trace_drift = 0.0;         ///< largest per-step |tr - 1| before renormalization
  double cumulative_trace_correction = 0.0;
  double max_hermiticity_drift = 0.0;  ///< per-step bound from the generator's anti-Hermitian leakage
  double min_eigenvalue = 1.0;          ///< over all checked period boundaries
};

struct EvolutionResult {
  StateTrajectory trajectory;
  TrajectoryDiagnostics diagnostics;
};

class Propagator {
 public:
  using SparseMatrix = BlockCoordinates::SparseMatrix;

  explicit Propagator(MasterEquation equation) : eq_(std::move(equation)) {
    const MasterEquation& eq = eq_;
    const auto& cs = angular::coupled_space();
    auto track = [this](const std::function<Matrix16(const Matrix16&)>& map, double scale) {
      return [this, map, scale](const Matrix16& r) {
        const Matrix16 out = map(r);
        leak_rate_ = std::max(leak_rate_, scale * hermiticity_defect(zero_hyperfine_coherences(out)));
        return out;
      };
    };
    free_ = coords_.superoperator(track([&](const Matrix16& r) { return eq.linear_collisional_rhs(r); }, 1.0));
    if (eq.schedule().kicks_enabled) {
      const auto& grid = eq.grid();
      const auto& table = eq.light_table();
      pulse_ = free_ + coords_.superoperator(track(
                           [&](const Matrix16& r) {
                             Matrix16 out = Matrix16::Zero();
                             for (std::size_t i = 0; i < table.size(); ++i)
                               out += grid.weights[i] * eq.light_rhs(r, table[i]);
                             return out;
                           },
                           1.0));
      pulse_.prune(0.0);
    }
    const std::array<Eigen::Vector3d, 3> axes{Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                              Eigen::Vector3d::UnitZ()};
    const std::array<const Matrix16*, 3> s_ops{&cs.Sx, &cs.Sy, &cs.Sz};
    for (std::size_t i = 0; i < 3; ++i) {
      // |<S_i>| <= 1/2
      drive_[i] = coords_.superoperator(track([&](const Matrix16& r) { return eq.spin_exchange_drive(r, axes[i]); }, 0.5));
      s_rows_[i] = coords_.expectation_row(*s_ops[i]);
    }
  }

  const BlockCoordinates& coordinates() const { return coords_; }
  const MasterEquation& equation() const { return eq_; }
  /// Largest anti-Hermitian component the tabulated generator produces from
  /// a unit coordinate; the block representation discards it.
  double hermiticity_leak_rate() const { return leak_rate_; }

  /// Generator applied to block coordinates.
  VectorR rhs(const VectorR& v, bool laser_on) const {
    VectorR out = (laser_on ? pulse_ : free_) * v;
    for (std::size_t i = 0; i < 3; ++i) {
      const double s = s_rows_[i].dot(v);
      if (s != 0.0) out.noalias() += s * (drive_[i] * v);
    }
    return out;
  }

  /// Euler step in place; returns the pre-renormalization trace drift.
  double step(VectorR& v, double dt, bool laser_on, TrajectoryDiagnostics& diag) const {
    if (laser_on && !eq_.schedule().kicks_enabled) throw std::logic_error("Propagator: light terms not tabulated");
    v.noalias() += dt * rhs(v, laser_on);
    ++diag.steps;
    diag.max_hermiticity_drift = std::max(diag.max_hermiticity_drift, dt * leak_rate_ * v.lpNorm<1>());
    const double tr = coords_.trace(v);
    const double drift = std::abs(tr - 1.0);
    diag.max_trace_drift = std::max(diag.max_trace_drift, drift);
    if (eq_.params().renormalize_trace && drift > MasterEquation::kTraceRenormalizationThreshold) {
      v /= tr;
      diag.cumulative_trace_correction += drift;
    }
    return drift;
  }

  /// Integrates whole periods from rho0, recording every
  /// `snapshot_stride`-th period boundary.
  EvolutionResult evolve(const Matrix16& rho0, double total_time, const EvolveOptions& opt = {}) const {
    const auto& sched = eq_.schedule();
    const auto& par = eq_.params();
    if (!(total_time > 0.0)) throw ValidationError("evolve: total_time must be positive");
    if (opt.snapshot_stride < 1 || opt.log_stride < 1) throw ValidationError("evolve: strides must be >= 1");
    const double periods_real = total_time / sched.period_tau;
    const auto periods = static_cast<long long>(std::llround(periods_real));
    if (periods < 1 || std::abs(periods_real - static_cast<double>(periods)) > 1e-6) {
      throw ValidationError("evolve: total_time must be a whole number of periods");
    }

    const double free_len = sched.kicks_enabled ? sched.pulse_start() : sched.period_tau;
    const auto n_free = segment_steps(free_len, par.dt_free);
    const double dt_free = free_len / static_cast<double>(n_free);
    const auto n_pulse = segment_steps(sched.pulse_duration, par.dt_pulse);
    const double dt_pulse = sched.pulse_duration / static_cast<double>(n_pulse);

    EvolutionResult out;
    auto& diag = out.diagnostics;
    VectorR v = coords_.to_vector(zero_hyperfine_coherences(rho0));
    const double tr0 = coords_.trace(v);
    if (std::abs(tr0 - 1.0) > 1e-8) throw ValidationError("evolve: initial state must have unit trace");

    for (long long p = 1; p <= periods; ++p) {
      for (long long i = 0; i < n_free; ++i) step(v, dt_free, false, diag);
      if (sched.kicks_enabled) {
        for (long long i = 0; i < n_pulse; ++i) step(v, dt_pulse, true, diag);
      }
      const double t = static_cast<double>(p) * sched.period_tau;
      const bool snapshot = p % opt.snapshot_stride == 0;
      const bool log_line = opt.log != nullptr && p % opt.log_stride == 0;
      if (!snapshot && !log_line) continue;

      const Matrix16 rho = coords_.to_matrix(v);
      const double lam = min_block_eigenvalue(rho);
      diag.min_eigenvalue = std::min(diag.min_eigenvalue, lam);
      if (lam < -opt.positivity_tolerance) {
        throw NumericalError("evolve: density matrix lost positivity at t = " + std::to_string(t) +
                             " s (min eigenvalue " + std::to_string(lam) + ")");
      }
      if (log_line) {
        const Eigen::Vector3d s = expectation_s(rho);
        const Eigen::Vector3d f = expectation_f(rho);
        *opt.log << t << ' ' << coords_.trace(v) - 1.0 << ' ' << lam << ' ' << s.x() << ' ' << s.y() << ' '
                 << s.z() << ' ' << f.x() << ' ' << f.y() << ' ' << f.z() << '\n';
      }
      if (snapshot) {
        out.trajectory.times.push_back(t);
        out.trajectory.states.push_back(rho);
      }
    }
    return out;
  }

  static long long segment_steps(double length, double dt_max) {
    return std::max<long long>(1, static_cast<long long>(std::ceil(length / dt_max - 1e-9)));
  }

 private:
  double min_block_eigenvalue(const Matrix16& rho) const {
    const auto& cs = angular::coupled_space();
    double lam = 1.0;
    for (const auto& b : cs.blocks) {
      const MatrixC blk = rho.block(b.offset, b.offset, b.size, b.size);
      lam = std::min(lam, hermitian_eigen(blk).eigenvalues().minCoeff());
    }
    return lam;
  }

  MasterEquation eq_;
  BlockCoordinates coords_;
  double leak_rate_ = 0.0;  ///< max Hermiticity defect of the generator on unit basis elements
  SparseMatrix free_;
  SparseMatrix pulse_;
  std::array<SparseMatrix, 3> drive_;
  std::array<VectorR, 3> s_rows_;
};

}  // namespace serfkick::dynamics
