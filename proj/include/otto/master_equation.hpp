#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "otto/fock.hpp"
#include "otto/params.hpp"
#include "otto/series.hpp"

namespace otto {

/// omega_a a^dagger a + omega_b b^dagger b - g a^dagger a (b + b^dagger).
Operator build_hamiltonian(const EngineParams& p, ModeDim dims);

/// One Lindblad channel rate * D[op].
struct Dissipator {
  double rate;
  Operator op;
};

/// All channels of the selected model with kappa_h switched on or off.
std::vector<Dissipator> build_dissipators(const EngineParams& p, ModeDim dims, bool heating);

/// Generator of the master equation on the full composite space.
class Liouvillian {
 public:
  Liouvillian(const EngineParams& p, ModeDim dims);

  /// d rho / dt for a dense composite-space matrix.
  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho, bool heating) const;
  void apply(const Eigen::MatrixXcd& rho, bool heating, Eigen::MatrixXcd& out) const;

  const Operator& hamiltonian() const { return h_; }
  ModeDim dims() const { return dims_; }

 private:
  struct Channels {
    Operator h_eff;  // H - (i/2) sum rate L^dagger L
    Operator h_eff_adj;
    std::vector<Dissipator> jumps;
    std::vector<Operator> jump_adj;
  };
  ModeDim dims_;
  Operator h_;
  Channels on_, off_;
};

/// d rho / dt at time t (kappa_h(t) from the schedule).
Eigen::MatrixXcd apply_liouvillian(const DensityMatrix& rho, const EngineParams& p,
                                   const DriveSchedule& schedule, double t);

/// States diagonal in the HF photon number, rho = sum_m |m><m| (x) R_m, are
/// closed under the dynamics. They are stored as an lf x (hf * lf) matrix whose
/// m-th column block is R_m.
class SectorLiouvillian {
 public:
  /// Zero-padded planar storage used by the time stepper: block m occupies
  /// columns [(m + 1) P, (m + 2) P) with P = lf + 2, and the outer blocks are zero.
  struct Planar {
    Eigen::ArrayXXd re, im;
  };

  SectorLiouvillian(const EngineParams& p, ModeDim dims);

  void apply(const Eigen::MatrixXcd& blocks, bool heating, Eigen::MatrixXcd& out) const;
  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& blocks, bool heating) const;
  void apply(const Planar& x, bool heating, Planar& out) const;

  Planar pack(const Eigen::MatrixXcd& blocks) const;
  Eigen::MatrixXcd unpack(const Planar& x) const;

  /// The same generator as a sparse matrix acting on the column-stacked blocks.
  Eigen::SparseMatrix<cplx> matrix(bool heating) const;

  ModeDim dims() const { return dims_; }

 private:
  ModeDim dims_;
  EngineParams params_;
  Eigen::VectorXd diag_half_, diag_freq_;
  Eigen::VectorXd s_;  // s_(I) = sqrt(I - 1) in padded row index I
  double lf_down_ = 0.0, lf_up_ = 0.0;
  Eigen::VectorXd hf_raise_diag_;
};

bool is_hf_block_diagonal(const DensityMatrix& rho, double tol = 1e-14);
Eigen::MatrixXcd to_sector_blocks(const DensityMatrix& rho);
DensityMatrix from_sector_blocks(const Eigen::MatrixXcd& blocks, ModeDim dims, bool validate = true);

/// Observables of the closed moment set evaluated on a composite-space state.
MomentVector moments_of(const DensityMatrix& rho, double t = 0.0);
/// <b^dagger b^dagger b b> / <n_b>^2 and LF populations from a composite state.
double lf_factorial_moment2(const DensityMatrix& rho);

struct PropagationOptions {
  double t_end = 5000.0;
  double dt = 0.02;
  std::size_t sample_every = 25;
  std::vector<Operator> observables;
  bool record_lf_populations = false;
  /// Positivity check cadence in samples; 0 checks only the final state.
  std::size_t positivity_every = 0;
  /// Use the full-space engine even for HF-diagonal input.
  bool force_full_space = false;
};

/// Fixed-step RK4 propagation sampling the moment set, g2(0) and any requested
/// observables. Throws PropagationDiverged when an invariant breaks.
TimeSeries propagate(const DensityMatrix& rho0, const EngineParams& p, const DriveSchedule& schedule,
                     const PropagationOptions& opts);

/// rho_a(nbar_c) (x) rho_b(nbar_c).
DensityMatrix initial_thermal_state(const EngineParams& p, ModeDim dims);

struct SteadyStateOptions {
  double horizon = 20000.0;
  double dt = 0.02;
  double residual_tol = 1e-9;   ///< on the entrywise 1-norm of d rho / dt
  double check_interval = 5.0;  ///< time between residual evaluations
  double agreement_tol = 1e-6;  ///< elementwise, propagation vs null space
};

struct SteadyState {
  DensityMatrix by_propagation;
  DensityMatrix by_nullspace;
  double max_elementwise_difference = 0.0;
  double final_residual = 0.0;
  double converged_at = 0.0;
};

/// Null-space solve of the constant-drive generator.
DensityMatrix steady_state_nullspace(const EngineParams& p, ModeDim dims);
/// Propagation with kappa_h held on until the residual drops below tolerance.
DensityMatrix steady_state_by_propagation(const EngineParams& p, ModeDim dims,
                                          const SteadyStateOptions& opts, double* residual = nullptr,
                                          double* t_converged = nullptr);
/// Both routes; throws ConvergenceError when either fails or they disagree.
SteadyState steady_state_constant_drive(const EngineParams& p, ModeDim dims,
                                        const SteadyStateOptions& opts = {});

}  // namespace otto
