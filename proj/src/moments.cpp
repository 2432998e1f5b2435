#include "otto/moments.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "otto/error.hpp"

namespace otto {

MomentDerivative moment_rhs(const MomentVector& s, const EngineParams& p, bool heating, Tier tier) {
  const DerivedRates r = derived_rates(p, heating);
  const double alpha = p.alpha();
  const double kb = r.kappa_b_total;
  const double kd = p.kappa_b;  // carried by the displaced dissipators only
  const bool quantum = is_quantum(tier);
  const double c_nq = quantum ? s.c_nq : 0.0;
  const double c_np = quantum ? s.c_np : 0.0;

  MomentDerivative d;
  d(0) = r.A - r.B * s.n_a;
  d(1) = p.omega_b * s.p - 0.5 * kb * s.q + alpha * kd * s.n_a;
  d(2) = -p.omega_b * s.q - 0.5 * kb * s.p + 2.0 * p.g * s.n_a;
  d(3) = r.A + (2.0 * r.A + r.B) * s.n_a - 2.0 * r.B * s.var_na;
  d(4) = quantum ? -r.C * c_nq + p.omega_b * c_np + alpha * kd * s.var_na : 0.0;
  d(5) = quantum ? -r.C * c_np - p.omega_b * c_nq + 2.0 * p.g * s.var_na : 0.0;
  d(6) = -kb * (s.n_b - r.nbar_b_eff) + p.g * (c_np + s.n_a * s.p) +
         0.5 * alpha * kd * (c_nq + s.n_a * s.q);
  return d;
}

MomentDerivative moment_rhs(const MomentVector& s, const EngineParams& p, const DriveSchedule& schedule,
                            double t, Tier tier) {
  return moment_rhs(s, p, schedule.heating(t), tier);
}

MomentVector initial_moments(const EngineParams& p) {
  const double n = p.nbar_c();
  MomentVector m;
  m.n_a = n;
  m.var_na = n * (n + 1.0);
  m.n_b = n;
  return m;
}

TimeSeries integrate_moments(const MomentVector& init, const EngineParams& p, const DriveSchedule& schedule,
                             Tier tier, const MomentOptions& opts) {
  p.validate();
  schedule.validate();
  if (tier != Tier::QuantumMoments && tier != Tier::Semiclassical) {
    throw DomainError("integrate_moments: tier must be quantum-moments or semiclassical");
  }
  if (!(opts.dt > 0.0) || !(opts.t_end >= 0.0)) throw DomainError("integrate_moments: dt must be > 0, t_end >= 0");
  const double b_max = derived_rates(p, true).B;
  if (opts.dt > 0.1 / std::max(1.0, b_max)) throw DomainError("integrate_moments: dt must be <= 0.1 / max(1, B)");

  TimeSeries ts;
  ts.tier = tier;
  const std::size_t every = std::max<std::size_t>(opts.sample_every, 1);
  MomentVector x0 = init;
  if (!is_quantum(tier)) x0.c_nq = x0.c_np = 0.0;
  Eigen::Matrix<double, 7, 1> x = x0.values();

  auto sample = [&](double t) {
    const MomentVector mv = MomentVector::from_values(t, x);
    if (!mv.finite()) {
      std::ostringstream os;
      os << "moment integration produced non-finite values at t = " << t;
      throw PropagationDiverged(os.str(), t);
    }
    if (p.g * std::abs(mv.q) >= p.omega_a) throw RegimeError("g |q| reached omega_a; the dispersive model is invalid");
    ts.samples.push_back(mv);
  };

  auto f = [&](const Eigen::Matrix<double, 7, 1>& v, bool heating) {
    return moment_rhs(MomentVector::from_values(0.0, v), p, heating, tier);
  };

  sample(0.0);
  for (const Segment& seg : segment_grid(schedule, 0.0, opts.t_end, opts.dt, every)) {
    const double h = seg.h;
    for (std::size_t step = 1; step <= seg.steps; ++step) {
      const auto k1 = f(x, seg.heating);
      const auto k2 = f(x + 0.5 * h * k1, seg.heating);
      const auto k3 = f(x + 0.5 * h * k2, seg.heating);
      const auto k4 = f(x + h * k3, seg.heating);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (step % every == 0) sample(step == seg.steps ? seg.t_stop : seg.t_start + static_cast<double>(step) * h);
    }
  }
  return ts;
}

double analytic_na_piecewise(double t, const EngineParams& p) {
  if (t < 0.0) throw DomainError("analytic_na_piecewise: t must be >= 0");
  const double half = std::numbers::pi / p.omega_b;
  const double tau = std::fmod(t, 2.0 * half);
  const double na = p.nbar_a;
  const double nh = p.nbar_h;
  if (tau < half) return 0.5 * (na + nh) - 0.5 * (nh - na) * std::exp(-(p.kappa_a + p.kappa_h) * tau);
  return na + 0.5 * (nh - na) * std::exp(-p.kappa_a * (tau - half));
}

double SquareWaveQ::operator()(double t) const { return q0 + Q * std::sin(omega_b * t + phi); }

SquareWaveQ analytic_q_steady(const EngineParams& p) {
  const double wb = p.omega_b;
  const double kb = p.kappa_b;
  const double nc = p.nbar_c();
  const double nh = p.nbar_h;
  const double omega_sq = wb * wb + 0.25 * kb * kb;
  SquareWaveQ s{};
  s.omega_b = wb;
  s.q0 = 2.0 * wb * p.g / omega_sq * (nh + 3.0 * nc) / 4.0;
  s.Q = 4.0 / std::numbers::pi * 2.0 * wb * p.g / std::sqrt(kb * kb * (wb * wb + kb * kb / 16.0)) * (nh - nc) / 4.0;
  s.phi = std::atan(kb * wb / (wb * wb - omega_sq));
  return s;
}

LimitCycleGeometry limit_cycle_geometry(const EngineParams& p) {
  const SquareWaveQ s = analytic_q_steady(p);
  return LimitCycleGeometry{s.Q / std::numbers::sqrt2, s.q0 / std::numbers::sqrt2, 0.0};
}

MomentVector steady_state_analytic(const EngineParams& p) {
  p.validate();
  const DerivedRates r = derived_rates(p, true);
  const double alpha = p.alpha();
  const double wb = p.omega_b;
  const double kb = r.kappa_b_total;
  const double kd = p.kappa_b;
  const double g = p.g;
  MomentVector m;
  m.n_a = r.A / r.B;
  m.var_na = r.A * (r.A + r.B) / (r.B * r.B);
  const double den_q = 4.0 * wb * wb + kb * kb;
  m.q = (8.0 * g * wb + 2.0 * alpha * kd * kb) / den_q * m.n_a;
  m.p = (4.0 * g * kb - 4.0 * alpha * kd * wb) / den_q * m.n_a;
  const double den_c = wb * wb + r.C * r.C;
  m.c_np = (2.0 * g * r.C - alpha * kd * wb) / den_c * m.var_na;
  m.c_nq = (2.0 * g * wb + alpha * kd * r.C) / den_c * m.var_na;
  m.n_b = r.nbar_b_eff + (g / kb) * (m.c_np + m.n_a * m.p) + 0.5 * alpha * (kd / kb) * (m.c_nq + m.n_a * m.q);
  return m;
}

AdiabaticCorrelations correlation_adiabatic(const EngineParams& p, double var_na, double t) {
  const DerivedRates r = derived_rates(p, true);
  if (!(r.C / p.omega_b > 5.0)) throw RegimeError("correlation_adiabatic requires C / omega_b > 5");
  if (!(p.kappa_a > 0.0)) throw RegimeError("correlation_adiabatic requires kappa_a > 0");
  AdiabaticCorrelations c{};
  c.c_nq = p.g * p.omega_b / (2.0 * p.kappa_a * p.kappa_a) * var_na * (1.0 - std::exp(-r.C * t));
  c.c_np = p.g / p.kappa_a * var_na;
  return c;
}

}  // namespace otto
