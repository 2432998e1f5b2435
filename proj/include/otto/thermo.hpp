#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "otto/langevin.hpp"
#include "otto/moments.hpp"
#include "otto/params.hpp"
#include "otto/series.hpp"

namespace otto {

struct ThermoSample {
  double t = 0.0;
  double n_a = 0.0;
  double omega_eff = 0.0;
  double U_a = 0.0;
  double S_a = 0.0;
  double T_eff = 0.0;
  double P = 0.0;
  double J_b = 0.0;
  double Sigma = 0.0;
  double g2 = 0.0;
  /// Unitary part of -dU_a/dt, g omega_b <n_a p>.
  double work_rate = 0.0;
  bool heating = false;
  /// Set when n_a <= 0; S_a and T_eff are then NaN.
  bool undefined = false;
  Tier tier = Tier::QuantumMoments;
};

/// Thermodynamic quantities per sample. Quantum tiers use
/// U_a = omega_a n_a - g <n_a q>; the others use omega_eff n_a. The heat
/// current is J_b = P - g (kappa_b / 2) <n_a q>.
std::vector<ThermoSample> thermo_from_series(const TimeSeries& series, const EngineParams& p,
                                             const DriveSchedule& schedule);

/// (1 + n) ln(1 + n) - n ln n; zero at n = 0, NaN for n < 0.
double hf_entropy(double n_a);
/// omega_b kappa_b (n_b - nbar_c).
double dissipative_power(double n_b, const EngineParams& p);

/// -Tr{omega_b n_b L_b(rho)} evaluated with the LF dissipators themselves.
double dissipative_power_trace(const DensityMatrix& rho, const EngineParams& p, ModeDim dims);
/// -Tr[H L_b(rho)] with L_b all kappa_b-dependent dissipators of the configured model.
double heat_current_trace(const DensityMatrix& rho, const EngineParams& p, ModeDim dims, bool heating);

/// <b^dagger b^dagger b b> / <n_b>^2 of a single-mode state; throws
/// UndefinedCoherence when <n_b> <= 1e-9.
double g2_zero(const DensityMatrix& rho_b);
/// Diagonal of rho_b, clipped at zero above -1e-10.
Eigen::VectorXd occupation_distribution(const DensityMatrix& rho_b);

enum class Branch {
  IsochoricHeating,
  TransitionHeating,
  AdiabaticExpansion,
  IsochoricCooling,
  TransitionCooling,
  AdiabaticCompression,
};

std::string to_string(Branch b);

/// Thresholds of the branch classifier.
struct BranchCriteria {
  /// |d ln n_a / dt| below this fraction of omega_b counts as thermalised.
  double thermalised_rate = 0.05;
  /// Percentile of |d omega_eff / dt| under which a sample is isochoric.
  double isochoric_percentile = 0.2;
};

/// One label per sample of a single period.
std::vector<Branch> label_branches(const std::vector<ThermoSample>& period, const EngineParams& p,
                                   const BranchCriteria& c = {});

/// Sample indices [first, last] of the last whole period between two rising
/// drive edges; throws NotConverged when the series holds no such period.
std::pair<std::size_t, std::size_t> last_period_window(const std::vector<double>& t, const DriveSchedule& s);

/// Largest |x(t) - x(t - T)| / max|x| over the samples in [t_from, end], for
/// n_a, q, p and n_b. Returns +inf when no sample has a partner one period back.
double stroboscopic_defect(const TimeSeries& series, double period, double t_from);

struct CircleFit {
  double radius = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double rms_residual = 0.0;
};

/// Algebraic least-squares circle through the points.
CircleFit fit_circle(const std::vector<double>& x, const std::vector<double>& y);

struct CycleSummary {
  double period = 0.0;
  double W = 0.0;
  double Q_in = 0.0;
  /// Integral over the heating half of the hot-bath energy flow.
  double Q_in_flow = 0.0;
  double eta = 0.0;
  double eta_otto = 0.0;
  double W_rect = 0.0;
  double P_avg = 0.0;
  double P_max = 0.0;
  /// Period mean of P and of the unitary work rate.
  double P_mean = 0.0;
  double work_rate_mean = 0.0;
  double J_b_mean = 0.0;
  double n_H = 0.0;
  double n_L = 0.0;
  double omega_H = 0.0;
  double omega_L = 0.0;
  double R_fit = 0.0;
  double center_fit_x = 0.0;
  double center_fit_y = 0.0;
  double closure_defect = 0.0;
  /// Largest relative entropy spread over either adiabatic branch.
  double adiabatic_entropy_spread = 0.0;
  std::vector<Branch> branches;
  double t_start = 0.0;
};

/// Cycle diagnostics of the last complete period. Throws NotConverged when the
/// stroboscopic defect over that period exceeds `closure_tol`.
CycleSummary segment_cycle(const TimeSeries& series, const std::vector<ThermoSample>& thermo,
                           const DriveSchedule& schedule, const EngineParams& p, double closure_tol = 1e-3,
                           const BranchCriteria& c = {});

/// Samples of the last whole period, the closing edge sample excluded.
std::vector<ThermoSample> last_period(const std::vector<ThermoSample>& thermo, const DriveSchedule& s);

struct MaxPowerOptions {
  double t_end = 5000.0;
  MomentOptions moments{};
  EnsembleSpec ensemble{};
  std::size_t classical_sample_every = 50;
};

struct MaxPowerRow {
  double nbar_h = 0.0;
  double P_q = 0.0;
  double P_c = 0.0;
  double P_c_se = 0.0;
  double P_sc = 0.0;
  double rel_c = 0.0;
  double rel_sc = 0.0;
};

/// Largest P over the last period for the quantum-moment, classical and
/// semiclassical tiers. Throws DomainError for nbar_h >= 3.25.
std::vector<MaxPowerRow> max_power_sweep(const std::vector<double>& nbar_h_values, const EngineParams& base,
                                         const MaxPowerOptions& opts);

/// Maximum of omega_b kappa_b (n_b - nbar_c) over the last whole period; the
/// standard error at the maximising sample goes to `se` when the series has errors.
double max_power(const TimeSeries& series, const EngineParams& p, const DriveSchedule& s, double* se = nullptr);

}  // namespace otto
