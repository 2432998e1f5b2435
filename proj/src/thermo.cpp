#include "otto/thermo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "otto/error.hpp"
#include "otto/master_equation.hpp"

namespace otto {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// <n_a q> and <n_a p> from the centred moments.
double na_q(const MomentVector& m) { return m.c_nq + m.n_a * m.q; }
double na_p(const MomentVector& m) { return m.c_np + m.n_a * m.p; }

Eigen::MatrixXcd dissipate(const Operator& L, const Eigen::MatrixXcd& rho) {
  const Operator Ld = L.adjoint();
  const Operator LdL = Ld * L;
  Eigen::MatrixXcd out = L * (rho * Ld);
  out -= 0.5 * (LdL * rho);
  out -= 0.5 * (rho * LdL);
  return out;
}

std::size_t find_time(const std::vector<double>& t, double target, double tol) {
  auto it = std::lower_bound(t.begin(), t.end(), target - tol);
  if (it != t.end() && std::abs(*it - target) <= tol) return static_cast<std::size_t>(it - t.begin());
  return t.size();
}

}  // namespace

double hf_entropy(double n) {
  if (!(n >= 0.0)) return kNaN;
  if (n == 0.0) return 0.0;
  return (1.0 + n) * std::log1p(n) - n * std::log(n);
}

double dissipative_power(double n_b, const EngineParams& p) { return p.omega_b * p.kappa_b * (n_b - p.nbar_c()); }

std::vector<ThermoSample> thermo_from_series(const TimeSeries& series, const EngineParams& p,
                                             const DriveSchedule& schedule) {
  const bool quantum = is_quantum(series.tier);
  const bool have_g2 = series.g2.size() == series.size();
  std::vector<ThermoSample> out;
  out.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const MomentVector& m = series.samples[i];
    ThermoSample s;
    s.t = m.t;
    s.tier = series.tier;
    s.n_a = m.n_a;
    s.heating = schedule.heating(m.t);
    s.omega_eff = p.omega_a - p.g * m.q;
    const double nq = quantum ? na_q(m) : m.n_a * m.q;
    const double np = quantum ? na_p(m) : m.n_a * m.p;
    s.U_a = quantum ? p.omega_a * m.n_a - p.g * nq : s.omega_eff * m.n_a;
    if (m.n_a > 0.0) {
      s.S_a = hf_entropy(m.n_a);
      s.T_eff = s.omega_eff / std::log1p(1.0 / m.n_a);
    } else {
      s.undefined = true;
      s.S_a = m.n_a == 0.0 ? 0.0 : kNaN;
      s.T_eff = kNaN;
    }
    s.P = dissipative_power(m.n_b, p);
    s.J_b = s.P - p.g * 0.5 * p.kappa_b * nq;
    s.Sigma = -m.c_np;
    s.g2 = have_g2 ? series.g2[i] : kNaN;
    s.work_rate = p.g * p.omega_b * np;
    out.push_back(s);
  }
  return out;
}

double dissipative_power_trace(const DensityMatrix& rho, const EngineParams& p, ModeDim dims) {
  const ModeOperators ops = mode_operators(dims);
  const Eigen::MatrixXcd& r = rho.matrix();
  if (r.rows() != dims.composite()) throw ShapeError("dissipative_power_trace: state does not match dims");
  Eigen::MatrixXcd L = p.kappa_b * (p.nbar_b + 1.0) * dissipate(ops.b, r);
  L += p.kappa_b * p.nbar_b * dissipate(ops.bd, r);
  return -p.omega_b * expectation(ops.n_b, L).real();
}

double heat_current_trace(const DensityMatrix& rho, const EngineParams& p, ModeDim dims, bool heating) {
  const Eigen::MatrixXcd& r = rho.matrix();
  if (r.rows() != dims.composite()) throw ShapeError("heat_current_trace: state does not match dims");
  EngineParams lf_only = p;
  lf_only.kappa_a = 0.0;
  lf_only.kappa_h = 0.0;
  lf_only.include_background = false;
  Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(r.rows(), r.cols());
  for (const Dissipator& d : build_dissipators(lf_only, dims, heating)) L += d.rate * dissipate(d.op, r);
  return -expectation(build_hamiltonian(p, dims), L).real();
}

double g2_zero(const DensityMatrix& rho_b) {
  const Eigen::MatrixXcd& r = rho_b.matrix();
  if (rho_b.dims()) throw ShapeError("g2_zero expects a single-mode state");
  double n = 0.0;
  double nn = 0.0;
  for (Eigen::Index k = 0; k < r.rows(); ++k) {
    const double pk = r(k, k).real();
    const double kk = static_cast<double>(k);
    n += kk * pk;
    nn += kk * (kk - 1.0) * pk;
  }
  if (!(n > 1e-9)) throw UndefinedCoherence("g2(0) undefined: <n_b> <= 1e-9");
  return nn / (n * n);
}

Eigen::VectorXd occupation_distribution(const DensityMatrix& rho_b) {
  Eigen::VectorXd d = rho_b.matrix().diagonal().real();
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (d(k) < -1e-10) throw InvariantError("occupation_distribution: negative population");
    d(k) = std::max(d(k), 0.0);
  }
  return d;
}

std::string to_string(Branch b) {
  switch (b) {
    case Branch::IsochoricHeating: return "isochoric-heating";
    case Branch::TransitionHeating: return "transition-heating";
    case Branch::AdiabaticExpansion: return "adiabatic-expansion";
    case Branch::IsochoricCooling: return "isochoric-cooling";
    case Branch::TransitionCooling: return "transition-cooling";
    case Branch::AdiabaticCompression: return "adiabatic-compression";
  }
  return "unknown";
}

std::vector<Branch> label_branches(const std::vector<ThermoSample>& period, const EngineParams& p,
                                   const BranchCriteria& c) {
  const std::size_t n = period.size();
  if (n < 3) throw DomainError("label_branches: need at least three samples");
  const double span = period.back().t - period.front().t;
  const double T = span * static_cast<double>(n) / static_cast<double>(n - 1);

  // Central differences; the window is one period so it wraps around.
  std::vector<double> dln(n), dw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = (i + n - 1) % n;
    const std::size_t hi = (i + 1) % n;
    double dt = period[hi].t - period[lo].t;
    if (dt <= 0.0) dt += T;
    dln[i] = (std::log(period[hi].n_a) - std::log(period[lo].n_a)) / dt;
    dw[i] = std::abs(period[hi].omega_eff - period[lo].omega_eff) / dt;
  }
  std::vector<double> sorted = dw;
  const auto k = static_cast<std::size_t>(std::floor(c.isochoric_percentile * static_cast<double>(n - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  const double dw_cut = sorted[k];

  std::vector<Branch> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool heat = period[i].heating;
    if (std::abs(dln[i]) < c.thermalised_rate * p.omega_b) {
      out[i] = heat ? Branch::AdiabaticExpansion : Branch::AdiabaticCompression;
    } else if (dw[i] <= dw_cut) {
      out[i] = heat ? Branch::IsochoricHeating : Branch::IsochoricCooling;
    } else {
      out[i] = heat ? Branch::TransitionHeating : Branch::TransitionCooling;
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> last_period_window(const std::vector<double>& t, const DriveSchedule& s) {
  if (t.empty()) throw NotConverged("empty series has no complete period");
  const double tol = 1e-9 * s.period;
  const double k_end = std::floor((t.back() - s.phase + tol) / s.period);
  for (double k = k_end; k >= 1.0; k -= 1.0) {
    const std::size_t i1 = find_time(t, s.phase + k * s.period, tol);
    const std::size_t i0 = find_time(t, s.phase + (k - 1.0) * s.period, tol);
    if (i0 < t.size() && i1 < t.size()) return {i0, i1};
  }
  throw NotConverged("series does not contain a complete drive period on its sample grid");
}

std::vector<ThermoSample> last_period(const std::vector<ThermoSample>& thermo, const DriveSchedule& s) {
  std::vector<double> t(thermo.size());
  for (std::size_t i = 0; i < thermo.size(); ++i) t[i] = thermo[i].t;
  const auto [i0, i1] = last_period_window(t, s);
  std::vector<ThermoSample> out(thermo.begin() + static_cast<std::ptrdiff_t>(i0),
                                thermo.begin() + static_cast<std::ptrdiff_t>(i1));
  // Samples sitting on a drive edge belong to the half that starts there.
  for (ThermoSample& x : out) x.heating = s.heating(x.t + 1e-9 * s.period);
  return out;
}

double stroboscopic_defect(const TimeSeries& series, double period, double t_from) {
  const std::vector<double> t = series.times();
  const double tol = 1e-9 * period;
  double scale[4] = {0.0, 0.0, 0.0, 0.0};
  auto fields = [](const MomentVector& m) { return std::array<double, 4>{m.n_a, m.q, m.p, m.n_b}; };
  for (const MomentVector& m : series.samples) {
    if (m.t < t_from - period - tol) continue;
    const auto f = fields(m);
    for (int k = 0; k < 4; ++k) scale[k] = std::max(scale[k], std::abs(f[k]));
  }
  double worst = -1.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_from - tol) continue;
    const std::size_t j = find_time(t, t[i] - period, tol);
    if (j >= t.size()) continue;
    const auto a = fields(series.samples[i]);
    const auto b = fields(series.samples[j]);
    for (int k = 0; k < 4; ++k) {
      if (scale[k] > 0.0) worst = std::max(worst, std::abs(a[k] - b[k]) / scale[k]);
    }
  }
  return worst < 0.0 ? std::numeric_limits<double>::infinity() : worst;
}

CircleFit fit_circle(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("fit_circle: x and y differ in length");
  if (x.size() < 3) throw DomainError("fit_circle: need at least three points");
  const auto n = static_cast<Eigen::Index>(x.size());
  // x^2 + y^2 = 2 cx x + 2 cy y + (r^2 - cx^2 - cy^2)
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = 2.0 * x[static_cast<std::size_t>(i)];
    A(i, 1) = 2.0 * y[static_cast<std::size_t>(i)];
    A(i, 2) = 1.0;
    rhs(i) = x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)] +
             y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d sol = A.colPivHouseholderQr().solve(rhs);
  CircleFit f;
  f.cx = sol(0);
  f.cy = sol(1);
  const double r2 = sol(2) + f.cx * f.cx + f.cy * f.cy;
  if (!(r2 > 0.0)) throw DomainError("fit_circle: points are degenerate");
  f.radius = std::sqrt(r2);
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::hypot(x[i] - f.cx, y[i] - f.cy) - f.radius;
    ss += d * d;
  }
  f.rms_residual = std::sqrt(ss / static_cast<double>(x.size()));
  return f;
}

CycleSummary segment_cycle(const TimeSeries& series, const std::vector<ThermoSample>& thermo,
                           const DriveSchedule& schedule, const EngineParams& p, double closure_tol,
                           const BranchCriteria& c) {
  if (thermo.size() != series.size()) throw ShapeError("segment_cycle: thermo and series differ in length");
  const std::vector<double> times = series.times();
  const auto [i0, i1] = last_period_window(times, schedule);
  const double T = schedule.period;

  CycleSummary s;
  s.period = T;
  s.t_start = times[i0];
  s.closure_defect = stroboscopic_defect(series, T, times[i0]);
  if (!(s.closure_defect <= closure_tol)) {
    throw NotConverged("stroboscopic defect " + std::to_string(s.closure_defect) + " exceeds " +
                       std::to_string(closure_tol));
  }

  const std::vector<ThermoSample> per = last_period(thermo, schedule);
  const std::size_t n = per.size();
  if (n < 3) throw NotConverged("segment_cycle: period holds fewer than three samples");

  // Shoelace in (omega_eff, U_a / omega_eff); counterclockwise is positive.
  double area = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ThermoSample& a = per[i];
    const ThermoSample& b = per[(i + 1) % n];
    area += a.omega_eff * (b.U_a / b.omega_eff) - b.omega_eff * (a.U_a / a.omega_eff);
  }
  s.W = 0.5 * area;

  const bool quantum = is_quantum(series.tier);
  double q_in = 0.0;
  double flow = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ThermoSample& a = per[i];
    const ThermoSample& b = i + 1 < n ? per[i + 1] : thermo[i1];
    const double tm = 0.5 * (a.t + b.t);
    if (!schedule.heating(tm)) continue;
    q_in += std::max(0.0, b.U_a - a.U_a);
    auto hot_flow = [&](std::size_t idx) {
      const MomentVector& m = series.samples[idx];
      const double cq = quantum ? m.c_nq : 0.0;
      return p.kappa_h * ((p.omega_a - p.g * m.q) * (p.nbar_h - m.n_a) + p.g * cq);
    };
    flow += 0.5 * (b.t - a.t) * (hot_flow(i0 + i) + hot_flow(i + 1 < n ? i0 + i + 1 : i1));
  }
  s.Q_in = q_in;
  s.Q_in_flow = flow;

  s.n_H = -std::numeric_limits<double>::infinity();
  s.n_L = std::numeric_limits<double>::infinity();
  s.omega_H = -std::numeric_limits<double>::infinity();
  s.omega_L = std::numeric_limits<double>::infinity();
  s.P_max = -std::numeric_limits<double>::infinity();
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n; ++i) {
    const ThermoSample& x = per[i];
    s.n_H = std::max(s.n_H, x.n_a);
    s.n_L = std::min(s.n_L, x.n_a);
    s.omega_H = std::max(s.omega_H, x.omega_eff);
    s.omega_L = std::min(s.omega_L, x.omega_eff);
    s.P_max = std::max(s.P_max, x.P);
    s.P_mean += x.P;
    s.work_rate_mean += x.work_rate;
    s.J_b_mean += x.J_b;
    const MomentVector& m = series.samples[i0 + i];
    xs.push_back(m.q / std::numbers::sqrt2);
    ys.push_back(m.p / std::numbers::sqrt2);
  }
  s.P_mean /= static_cast<double>(n);
  s.work_rate_mean /= static_cast<double>(n);
  s.J_b_mean /= static_cast<double>(n);
  s.eta = s.Q_in > 0.0 ? s.W / s.Q_in : kNaN;
  s.eta_otto = 1.0 - s.omega_L / s.omega_H;
  s.W_rect = (s.n_H - s.n_L) * (s.omega_H - s.omega_L);
  s.P_avg = s.W / T;

  try {
    const CircleFit f = fit_circle(xs, ys);
    s.R_fit = f.radius;
    s.center_fit_x = f.cx;
    s.center_fit_y = f.cy;
  } catch (const DomainError&) {
    s.R_fit = 0.0;
    s.center_fit_x = xs.front();
    s.center_fit_y = ys.front();
  }

  bool have_na = true;
  for (const ThermoSample& x : per) have_na = have_na && x.n_a > 0.0;
  if (have_na) {
    s.branches = label_branches(per, p, c);
    for (Branch b : {Branch::AdiabaticExpansion, Branch::AdiabaticCompression}) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
      std::size_t cnt = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (s.branches[i] != b) continue;
        lo = std::min(lo, per[i].S_a);
        hi = std::max(hi, per[i].S_a);
        sum += per[i].S_a;
        ++cnt;
      }
      if (cnt > 1) s.adiabatic_entropy_spread = std::max(s.adiabatic_entropy_spread, (hi - lo) / (sum / cnt));
    }
  }
  return s;
}

double max_power(const TimeSeries& series, const EngineParams& p, const DriveSchedule& s, double* se) {
  const auto [i0, i1] = last_period_window(series.times(), s);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t arg = i0;
  for (std::size_t i = i0; i < i1; ++i) {
    const double P = dissipative_power(series.samples[i].n_b, p);
    if (P > best) {
      best = P;
      arg = i;
    }
  }
  if (se) *se = series.errors.size() == series.size() ? p.omega_b * p.kappa_b * series.errors[arg].n_b : 0.0;
  return best;
}

std::vector<MaxPowerRow> max_power_sweep(const std::vector<double>& nbar_h_values, const EngineParams& base,
                                         const MaxPowerOptions& opts) {
  for (double nh : nbar_h_values) {
    if (!(nh < 3.25)) throw DomainError("max_power_sweep: nbar_h must stay below 3.25");
  }
  std::vector<MaxPowerRow> rows;
  for (double nh : nbar_h_values) {
    EngineParams p = base;
    p.nbar_h = nh;
    p.validate();
    const DriveSchedule sched = DriveSchedule::for_params(p);
    MomentOptions mo = opts.moments;
    mo.t_end = opts.t_end;
    const MomentVector init = initial_moments(p);
    MaxPowerRow r;
    r.nbar_h = nh;
    r.P_q = max_power(integrate_moments(init, p, sched, Tier::QuantumMoments, mo), p, sched);
    r.P_sc = max_power(integrate_moments(init, p, sched, Tier::Semiclassical, mo), p, sched);
    EnsembleOptions eo;
    eo.t_end = opts.t_end;
    eo.sample_every = opts.classical_sample_every;
    r.P_c = max_power(run_ensemble(p, sched, opts.ensemble, eo), p, sched, &r.P_c_se);
    r.rel_c = (r.P_q - r.P_c) / r.P_q;
    r.rel_sc = (r.P_q - r.P_sc) / r.P_q;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace otto
