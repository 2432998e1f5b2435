#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "generators.hpp"
#include "otto/error.hpp"
#include "otto/master_equation.hpp"
#include "otto/moments.hpp"
#include "otto/thermo.hpp"

using namespace otto;

namespace {

TimeSeries moment_run(const EngineParams& p, double t_end = 5000.0, Tier tier = Tier::QuantumMoments) {
  MomentOptions o;
  o.t_end = t_end;
  return integrate_moments(initial_moments(p), p, DriveSchedule::for_params(p), tier, o);
}

// Composite state living on HF levels < 3 and LF levels < 6 inside a larger space.
DensityMatrix low_lying_state(ModeDim d) {
  const ModeDim s{3, 6};
  const Eigen::MatrixXcd small = gen::density(s.composite());
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d.composite(), d.composite());
  for (int m = 0; m < s.hf; ++m)
    for (int n = 0; n < s.lf; ++n)
      for (int m2 = 0; m2 < s.hf; ++m2)
        for (int n2 = 0; n2 < s.lf; ++n2) rho(m * d.lf + n, m2 * d.lf + n2) = small(m * s.lf + n, m2 * s.lf + n2);
  return DensityMatrix(rho, d);
}

}  // namespace

TEST_CASE("HF entropy") {
  CHECK(hf_entropy(0.0) == 0.0);
  CHECK(hf_entropy(1e-12) < 1e-10);
  CHECK(hf_entropy(1.0) == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(std::isnan(hf_entropy(-0.1)));
  // dS/dn = ln(1 + 1/n) = omega / T for a thermal mode.
  for (int trial = 0; trial < 20; ++trial) {
    const double n = gen::uniform(0.005, 2.0), h = 1e-6;
    const double dS = (hf_entropy(n + h) - hf_entropy(n - h)) / (2.0 * h);
    const double omega = gen::uniform(0.9, 1.1);
    CHECK(dS == doctest::Approx(omega / effective_temperature(omega, n)).epsilon(1e-6));
    CHECK(hf_entropy(n + 0.01) > hf_entropy(n));
  }
}

TEST_CASE("dissipative power") {
  const EngineParams p;
  CHECK(dissipative_power(p.nbar_a, p) == 0.0);
  CHECK(dissipative_power(0.2, p) == doctest::Approx(p.omega_b * p.kappa_b * 0.19));

  // Formula and dissipator trace agree on any state away from the truncation edge.
  for (int trial = 0; trial < 10; ++trial) {
    EngineParams r = gen::params();
    const ModeDim d{4, 10};
    const DensityMatrix rho = low_lying_state(d);
    const double n_b = moments_of(rho).n_b;
    CHECK(std::abs(dissipative_power_trace(rho, r, d) - dissipative_power(n_b, r)) <= 1e-10);
  }
}

TEST_CASE("heat current from the LF dissipators") {
  for (int trial = 0; trial < 10; ++trial) {
    EngineParams r = gen::params();
    const ModeDim d{4, 10};
    const DensityMatrix rho = low_lying_state(d);
    const MomentVector m = moments_of(rho);
    const double naq = m.c_nq + m.n_a * m.q;
    const double expect = dissipative_power(m.n_b, r) - r.g * 0.5 * r.kappa_b * naq;
    CHECK(heat_current_trace(rho, r, d, trial % 2 == 0) == doctest::Approx(expect).scale(1e-10));
  }
}

TEST_CASE("g2(0) of reference states") {
  CHECK(g2_zero(thermal_density(80, 0.5)) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(g2_zero(thermal_density(50, 0.01)) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(g2_zero(coherent_density(60, cplx(1.5, 0.5))) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g2_zero(fock_density(5, 1)) == 0.0);
  CHECK(g2_zero(fock_density(5, 3)) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(g2_zero(fock_density(5, 0)), UndefinedCoherence);
  CHECK_THROWS_AS(g2_zero(initial_thermal_state(EngineParams{}, ModeDim{2, 4})), ShapeError);
}

TEST_CASE("occupation distribution") {
  const Eigen::VectorXd pn = occupation_distribution(thermal_density(40, 0.3));
  CHECK(pn.sum() == doctest::Approx(1.0));
  for (int n = 1; n < 40; ++n) CHECK(pn(n) / pn(n - 1) == doctest::Approx(0.3 / 1.3));
  const Eigen::VectorXd c = occupation_distribution(coherent_density(40, cplx(2.0, 0.0)));
  Eigen::Index mode = 0;
  c.maxCoeff(&mode);
  CHECK(mode >= 3);
}

TEST_CASE("thermodynamic samples") {
  EngineParams p;
  const DriveSchedule s = DriveSchedule::for_params(p);
  const TimeSeries ts = moment_run(p, 300.0);
  const auto th = thermo_from_series(ts, p, s);
  REQUIRE(th.size() == ts.size());
  CHECK(th.front().P == 0.0);  // LF starts in equilibrium with its bath
  for (std::size_t i = 0; i < th.size(); ++i) {
    const MomentVector& m = ts.samples[i];
    const ThermoSample& x = th[i];
    CHECK(x.omega_eff == doctest::Approx(p.omega_a - p.g * m.q));
    CHECK(x.U_a == doctest::Approx(p.omega_a * m.n_a - p.g * (m.c_nq + m.n_a * m.q)));
    CHECK(x.Sigma == doctest::Approx(-m.c_np));
    CHECK(x.work_rate == doctest::Approx(p.g * p.omega_b * (m.c_np + m.n_a * m.p)));
    CHECK(x.J_b == doctest::Approx(x.P - p.g * 0.5 * p.kappa_b * (m.c_nq + m.n_a * m.q)));
    CHECK(x.S_a == doctest::Approx(hf_entropy(m.n_a)));
    CHECK(x.heating == s.heating(m.t));
  }

  const TimeSeries sc = moment_run(p, 300.0, Tier::Semiclassical);
  const auto ts2 = thermo_from_series(sc, p, s);
  for (std::size_t i = 0; i < ts2.size(); ++i)
    CHECK(ts2[i].U_a == doctest::Approx(ts2[i].omega_eff * sc.samples[i].n_a));
}

TEST_CASE("period windows and stroboscopic closure") {
  const DriveSchedule s{10.0, 0.5, 0.0};
  std::vector<double> t;
  for (int i = 0; i <= 35; ++i) t.push_back(i);
  const auto [i0, i1] = last_period_window(t, s);
  CHECK(t[i0] == 20.0);
  CHECK(t[i1] == 30.0);
  CHECK_THROWS_AS(last_period_window(std::vector<double>{0.0, 1.0, 2.0}, s), NotConverged);

  TimeSeries ts;
  for (int i = 0; i <= 400; ++i) {
    MomentVector m;
    m.t = 0.5 * i;
    m.n_a = 1.0 + std::sin(2.0 * std::numbers::pi * m.t / 10.0);
    m.q = std::cos(2.0 * std::numbers::pi * m.t / 10.0);
    m.p = 0.2;
    m.n_b = 0.5;
    ts.samples.push_back(m);
  }
  CHECK(stroboscopic_defect(ts, 10.0, 50.0) < 1e-12);
  CHECK(stroboscopic_defect(ts, 7.0, 50.0) > 0.1);
  CHECK(stroboscopic_defect(ts, 1000.0, 0.0) == std::numeric_limits<double>::infinity());
}

TEST_CASE("circle fit recovers generated circles") {
  for (int trial = 0; trial < 20; ++trial) {
    const double r = gen::uniform(0.1, 2.0), cx = gen::uniform(-1.0, 1.0), cy = gen::uniform(-1.0, 1.0);
    std::vector<double> x, y;
    for (int k = 0; k < 60; ++k) {
      const double th = gen::uniform(0.0, 2.0 * std::numbers::pi);
      x.push_back(cx + r * std::cos(th));
      y.push_back(cy + r * std::sin(th));
    }
    const CircleFit f = fit_circle(x, y);
    CHECK(f.radius == doctest::Approx(r).epsilon(1e-9));
    CHECK(f.cx == doctest::Approx(cx).scale(1.0).epsilon(1e-9));
    CHECK(f.cy == doctest::Approx(cy).scale(1.0).epsilon(1e-9));
    CHECK(f.rms_residual < 1e-9);
  }
  CHECK_THROWS_AS(fit_circle({0.0, 1.0}, {0.0, 1.0}), DomainError);
}

TEST_CASE("steady cycle at the default parameters") {
  const EngineParams p;
  const DriveSchedule s = DriveSchedule::for_params(p);
  const TimeSeries ts = moment_run(p);
  const auto th = thermo_from_series(ts, p, s);
  const CycleSummary c = segment_cycle(ts, th, s, p);
  CHECK(c.closure_defect < 1e-3);
  CHECK(c.W == doctest::Approx(3.5e-3).epsilon(0.3));
  CHECK(c.Q_in == doctest::Approx(0.06).epsilon(0.3));
  CHECK(c.omega_H == doctest::Approx(1.03).epsilon(0.01));
  CHECK(c.omega_L == doctest::Approx(0.96).epsilon(0.01));
  CHECK(c.eta == doctest::Approx(c.W / c.Q_in));
  CHECK(c.eta_otto == doctest::Approx(1.0 - c.omega_L / c.omega_H));
  CHECK(std::abs(c.eta - c.eta_otto) / c.eta_otto < 0.4);
  CHECK(c.W <= c.W_rect * 1.05);
  // Over a period the LF energy is periodic, so the work delivered equals the dissipated power.
  CHECK(c.work_rate_mean == doctest::Approx(c.P_mean).epsilon(1e-3));
  CHECK(c.P_max >= c.P_mean);
  CHECK(c.n_H > c.n_L);
  CHECK(c.adiabatic_entropy_spread < 0.02);
  CHECK(std::abs(c.J_b_mean - c.P_mean) / c.P_mean < 0.02);

  const LimitCycleGeometry g = limit_cycle_geometry(p);
  CHECK(c.R_fit == doctest::Approx(g.R).epsilon(0.15));
  CHECK(c.center_fit_x == doctest::Approx(g.q_b0).epsilon(0.15));

  // Every stage of the cycle is visited, in order, starting with heating.
  REQUIRE(c.branches.size() > 100);
  CHECK(c.branches.front() == Branch::IsochoricHeating);
  int visited[6] = {};
  for (Branch b : c.branches) ++visited[static_cast<int>(b)];
  for (int v : visited) CHECK(v > 0);
  for (std::size_t i = 0; i + 1 < c.branches.size(); ++i)
    CHECK(static_cast<int>(c.branches[i + 1]) >= static_cast<int>(c.branches[i]));

  CHECK(max_power(ts, p, s) == doctest::Approx(c.P_max));
}

TEST_CASE("no thermal asymmetry gives no work") {
  EngineParams p;
  p.nbar_h = p.nbar_a;
  const DriveSchedule s = DriveSchedule::for_params(p);
  MomentOptions o;
  o.t_end = 2000.0;
  // Started on the fixed point so that no LF ringing is left to decay.
  for (Tier tier : {Tier::QuantumMoments, Tier::Semiclassical}) {
    const TimeSeries ts = integrate_moments(steady_state_analytic(p), p, s, tier, o);
    const CycleSummary c = segment_cycle(ts, thermo_from_series(ts, p, s), s, p);
    CHECK(std::abs(c.W) < 1e-12);
  }
}

TEST_CASE("an unsettled run is not summarised") {
  const EngineParams p;
  const DriveSchedule s = DriveSchedule::for_params(p);
  const TimeSeries early = moment_run(p, 3.0 * s.period);
  CHECK_THROWS_AS(segment_cycle(early, thermo_from_series(early, p, s), s, p), NotConverged);
  const TimeSeries tiny = moment_run(p, 0.5 * s.period);
  CHECK_THROWS_AS(segment_cycle(tiny, thermo_from_series(tiny, p, s), s, p), NotConverged);
}

TEST_CASE("power sweep domain") {
  MaxPowerOptions o;
  o.t_end = 100.0;
  CHECK_THROWS_AS(max_power_sweep({0.125, 3.25}, EngineParams{}, o), DomainError);
}

TEST_CASE("branch names") {
  CHECK(to_string(Branch::AdiabaticExpansion) == "adiabatic-expansion");
  CHECK(to_string(Branch::TransitionCooling) == "transition-cooling");
}
