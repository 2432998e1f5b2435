#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "otto/params.hpp"
#include "otto/series.hpp"

namespace otto {

using MomentDerivative = Eigen::Matrix<double, 7, 1>;

/// Right-hand side of the closed moment system. The semiclassical tier pins
/// c_nq = c_np = 0 and drops their equations.
MomentDerivative moment_rhs(const MomentVector& s, const EngineParams& p, bool heating, Tier tier);
MomentDerivative moment_rhs(const MomentVector& s, const EngineParams& p, const DriveSchedule& schedule,
                            double t, Tier tier);

/// Moments of rho_a(nbar_c) (x) rho_b(nbar_c).
MomentVector initial_moments(const EngineParams& p);

struct MomentOptions {
  double t_end = 5000.0;
  double dt = 0.02;
  std::size_t sample_every = 25;
};

/// Fixed-step RK4 on the same edge-aligned grid as the Lindblad propagator.
TimeSeries integrate_moments(const MomentVector& init, const EngineParams& p, const DriveSchedule& schedule,
                             Tier tier, const MomentOptions& opts);

/// Piecewise-exponential n_a(t) for the symmetric square wave.
double analytic_na_piecewise(double t, const EngineParams& p);

/// First-harmonic model of the steady q oscillation, q0 + Q sin(omega_b t + phi).
struct SquareWaveQ {
  double q0;
  double Q;
  double phi;
  double omega_b;
  double operator()(double t) const;
};

SquareWaveQ analytic_q_steady(const EngineParams& p);

struct LimitCycleGeometry {
  double R;
  double q_b0;
  double p_b0;
};

/// Circle traced by (q/sqrt 2, p/sqrt 2) in the steady state.
LimitCycleGeometry limit_cycle_geometry(const EngineParams& p);

/// Closed-form constant-drive fixed point of the moment system.
MomentVector steady_state_analytic(const EngineParams& p);

struct AdiabaticCorrelations {
  double c_nq;
  double c_np;
};

/// Adiabatic-following estimates; throws RegimeError unless C / omega_b > 5.
AdiabaticCorrelations correlation_adiabatic(const EngineParams& p, double var_na, double t);

}  // namespace otto
