#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "generators.hpp"
#include "otto/error.hpp"
#include "otto/moments.hpp"
#include "otto/thermo.hpp"

using namespace otto;

namespace {

TimeSeries steady_run(const EngineParams& p, Tier tier, double t_end = 5000.0) {
  MomentOptions o;
  o.t_end = t_end;
  return integrate_moments(initial_moments(p), p, DriveSchedule::for_params(p), tier, o);
}

// Samples of the last whole period, closing edge excluded.
std::vector<MomentVector> last_period(const TimeSeries& ts, const EngineParams& p) {
  const double T = DriveSchedule::for_params(p).period;
  const double t1 = std::floor(ts.samples.back().t / T + 1e-9) * T;
  std::vector<MomentVector> out;
  for (const MomentVector& m : ts.samples)
    if (m.t >= t1 - T - 1e-9 && m.t < t1 - 1e-9) out.push_back(m);
  return out;
}

}  // namespace

TEST_CASE("decoupled fixed point") {
  EngineParams p;
  p.g = 0.0;
  MomentVector s;
  s.n_a = (p.kappa_a * p.nbar_a + p.kappa_h * p.nbar_h) / (p.kappa_a + p.kappa_h);
  s.var_na = s.n_a * (s.n_a + 1.0);
  s.n_b = p.nbar_b;
  const MomentDerivative d = moment_rhs(s, p, true, Tier::QuantumMoments);
  CHECK(d.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("initial moments are thermal") {
  const EngineParams p;
  const MomentVector m = initial_moments(p);
  CHECK(m.n_a == p.nbar_a);
  CHECK(m.n_b == p.nbar_b);
  CHECK(m.var_na == doctest::Approx(0.01 * 1.01));
  CHECK(m.q == 0.0);
  CHECK(m.c_np == 0.0);
}

TEST_CASE("semiclassical tier keeps the correlations at zero") {
  for (int trial = 0; trial < 10; ++trial) {
    const EngineParams p = gen::params();
    MomentVector s;
    s.n_a = gen::uniform(0.0, 0.2);
    s.q = gen::uniform(-1.0, 1.0);
    s.p = gen::uniform(-1.0, 1.0);
    s.var_na = s.n_a * (1.0 + s.n_a);
    s.n_b = gen::uniform(0.0, 0.5);
    const MomentDerivative d = moment_rhs(s, p, trial % 2 == 0, Tier::Semiclassical);
    CHECK(d(4) == 0.0);
    CHECK(d(5) == 0.0);
    // d n_b / dt = g n_a p - kappa_b (n_b - nbar_b)
    CHECK(d(6) == doctest::Approx(p.g * s.n_a * s.p - p.kappa_b * (s.n_b - p.nbar_b)));
  }
}

TEST_CASE("n_a follows the piecewise exponential solution") {
  const EngineParams p;
  const double T = 2.0 * std::numbers::pi / p.omega_b;
  CHECK(analytic_na_piecewise(0.0, p) == doctest::Approx(0.01));
  CHECK(analytic_na_piecewise(0.5 * T - 1e-9, p) == doctest::Approx(0.0675).epsilon(1e-6));
  // Branch junction.
  const double heat_end = 0.5 * (p.nbar_a + p.nbar_h) - 0.5 * (p.nbar_h - p.nbar_a) * std::exp(-0.4 * 0.5 * T);
  const double cool_start = p.nbar_a + 0.5 * (p.nbar_h - p.nbar_a);
  CHECK(std::abs(heat_end - cool_start) < 1e-10);
  CHECK_THROWS_AS(analytic_na_piecewise(-1.0, p), DomainError);

  const TimeSeries ts = steady_run(p, Tier::QuantumMoments, 3.0 * T);
  double worst = 0.0;
  for (const MomentVector& m : ts.samples) {
    if (m.t < T) continue;
    worst = std::max(worst, std::abs(m.n_a - analytic_na_piecewise(m.t, p)) / m.n_a);
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("constant-drive closed forms") {
  const EngineParams p;
  const MomentVector s = steady_state_analytic(p);
  const double B = p.kappa_a + p.kappa_h, C = B + 0.5 * p.kappa_b;
  const double na = (p.kappa_a * p.nbar_a + p.kappa_h * p.nbar_h) / B;
  const double var = na * (na + 1.0);
  const double q = 8.0 * p.g * p.omega_b / (4.0 * p.omega_b * p.omega_b + p.kappa_b * p.kappa_b) * na;
  // Fixed point of the c_nq, c_np pair: the numerator carries C, not B.
  const double cnp = 2.0 * p.g * C / (p.omega_b * p.omega_b + C * C) * var;
  CHECK(s.n_a == doctest::Approx(na));
  CHECK(s.var_na == doctest::Approx(0.0720563).epsilon(1e-6));
  CHECK(s.q == doctest::Approx(q));
  CHECK(s.q == doctest::Approx(0.134663).epsilon(1e-5));
  CHECK(s.c_np == doctest::Approx(cnp));
  CHECK(s.c_np == doctest::Approx(0.01763).epsilon(1e-3));
  CHECK(s.n_b == doctest::Approx(p.nbar_b + p.g / p.kappa_b * (s.c_np + s.n_a * s.p)));
  CHECK(s.n_b == doctest::Approx(0.1908).epsilon(1e-3));

  // The closed form is a fixed point of the constant-drive system.
  for (int trial = 0; trial < 10; ++trial) {
    EngineParams r = gen::params();
    r.model = trial % 2 ? MasterModel::Global : MasterModel::Local;
    if (r.model == MasterModel::Global) r.g = std::max(r.g, 0.01);
    const MomentVector f = steady_state_analytic(r);
    CHECK(moment_rhs(f, r, true, Tier::QuantumMoments).cwiseAbs().maxCoeff() < 1e-14);
  }

  EngineParams gp;
  gp.model = MasterModel::Global;
  CHECK(std::abs(steady_state_analytic(gp).p) < 1e-15);
}

TEST_CASE("steady q waveform: mean and first harmonic") {
  EngineParams p;
  const SquareWaveQ w = analytic_q_steady(p);
  CHECK(w.q0 == doctest::Approx(0.0773).epsilon(1e-3));
  CHECK(w.Q == doctest::Approx(0.732).epsilon(1e-3));
  CHECK(w.Q == doctest::Approx(20.0 * (p.nbar_h - p.nbar_a) / std::numbers::pi).epsilon(2e-3));

  const auto period = last_period(steady_run(p, Tier::QuantumMoments), p);
  double mean = 0.0;
  std::complex<double> h1 = 0.0;
  for (const MomentVector& m : period) {
    mean += m.q;
    h1 += m.q * std::exp(std::complex<double>(0.0, -p.omega_b * m.t));
  }
  mean /= static_cast<double>(period.size());
  h1 *= 2.0 / static_cast<double>(period.size());
  CHECK(mean == doctest::Approx(0.5 * (p.nbar_h + 3.0 * p.nbar_a)).epsilon(0.05));
  CHECK(std::abs(h1) == doctest::Approx(w.Q).epsilon(0.05));

  p.nbar_h = p.nbar_a;
  CHECK(analytic_q_steady(p).Q == 0.0);
}

TEST_CASE("limit cycle geometry") {
  EngineParams p;
  const LimitCycleGeometry g = limit_cycle_geometry(p);
  const SquareWaveQ w = analytic_q_steady(p);
  CHECK(g.R == doctest::Approx(0.518).epsilon(1e-3));
  CHECK(g.q_b0 == doctest::Approx(0.0547).epsilon(1e-3));
  CHECK(g.R == doctest::Approx(w.Q / std::sqrt(2.0)));
  CHECK(g.q_b0 == doctest::Approx(w.q0 / std::sqrt(2.0)));
  CHECK(g.p_b0 == 0.0);
  p.nbar_h = p.nbar_a;
  CHECK(limit_cycle_geometry(p).R == 0.0);
}

TEST_CASE("adiabatic correlation estimates") {
  const EngineParams p;
  const AdiabaticCorrelations a = correlation_adiabatic(p, 0.07, 1e6);
  CHECK(a.c_np / 0.07 == doctest::Approx(p.g / p.kappa_a));
  CHECK(correlation_adiabatic(p, 0.07, 0.0).c_nq == 0.0);
  const MomentVector s = steady_state_analytic(p);
  CHECK(s.c_np / s.var_na == doctest::Approx(0.2447).epsilon(1e-3));
  CHECK(std::abs(s.c_np / s.var_na - 0.25) / 0.25 < 0.03);

  EngineParams slow = p;
  slow.kappa_a = 0.05;
  slow.kappa_h = 0.05;
  slow.omega_b = 0.08;
  CHECK_THROWS_AS(correlation_adiabatic(slow, 0.07, 1.0), RegimeError);
}

TEST_CASE("steady correlations and hierarchy") {
  const EngineParams p;
  const auto q = last_period(steady_run(p, Tier::QuantumMoments), p);
  const auto sc = last_period(steady_run(p, Tier::Semiclassical), p);
  double nb_q = 0.0, nb_sc = 0.0, cnq = 0.0, cnp = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(q[i].c_np >= 0.0);  // Sigma = -c_np <= 0
    nb_q += q[i].n_b;
    nb_sc += sc[i].n_b;
    cnq += std::abs(q[i].c_nq);
    cnp += std::abs(q[i].c_np);
  }
  CHECK(nb_sc < nb_q);
  CHECK(cnp > 3.0 * cnq);

  // Pulsed drive beats a constant drive carrying the same mean kappa_h nbar_h.
  EngineParams half_k = p, half_n = p;
  half_k.kappa_h *= 0.5;
  half_n.nbar_h *= 0.5;
  const double pulsed = nb_q / static_cast<double>(q.size());
  CHECK(pulsed >= steady_state_analytic(half_k).n_b);
  CHECK(pulsed >= steady_state_analytic(half_n).n_b);
}

TEST_CASE("var_na has the periodicity and phase of n_a") {
  const EngineParams p;
  const auto per = last_period(steady_run(p, Tier::QuantumMoments), p);
  const std::size_t n = per.size();
  double mn = 0.0, mv = 0.0;
  for (const MomentVector& m : per) {
    mn += m.n_a;
    mv += m.var_na;
  }
  mn /= static_cast<double>(n);
  mv /= static_cast<double>(n);
  std::size_t best = 1;
  double best_c = -1e300;
  for (std::size_t lag = 0; lag < n; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += (per[i].n_a - mn) * (per[(i + lag) % n].var_na - mv);
    if (c > best_c) {
      best_c = c;
      best = lag;
    }
  }
  CHECK(best == 0);
}

TEST_CASE("steady q oscillates at the LF frequency") {
  const EngineParams p;
  const TimeSeries ts = steady_run(p, Tier::QuantumMoments);
  const double T = 2.0 * std::numbers::pi / p.omega_b;
  CHECK(stroboscopic_defect(ts, T, 3000.0) < 1e-3);
}

TEST_CASE("integration guards") {
  EngineParams p;
  MomentOptions o;
  o.t_end = 100.0;
  o.dt = 1.0;
  CHECK_THROWS_AS(integrate_moments(initial_moments(p), p, DriveSchedule::for_params(p), Tier::QuantumMoments, o),
                  DomainError);
}
