#include <doctest.h>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "otto/error.hpp"
#include "otto/langevin.hpp"
#include "otto/moments.hpp"

using namespace otto;

namespace {

// The quadrature SDEs written out term by term, one Euler-Maruyama step.
ClassicalState em_reference(const ClassicalState& s, const EngineParams& p, bool heating, double dt,
                            const NoiseDraws& xi) {
  const double kh = heating ? p.kappa_h : 0.0;
  const double kpa = 0.5 * kh + 0.5 * p.kappa_a;
  const double wa = std::sqrt(p.kappa_a * p.nbar_a * dt);
  const double wh = std::sqrt(kh * p.nbar_h * dt);
  const double wb = std::sqrt(p.kappa_b * p.nbar_b * dt);
  const double r2 = std::sqrt(2.0);
  ClassicalState o;
  o.X_a = s.X_a + (p.omega_a * s.Y_a - p.g * r2 * s.X_b * s.Y_a - kpa * s.X_a) * dt + wh * xi[4] + wa * xi[0];
  o.Y_a = s.Y_a - (p.omega_a * s.X_a - p.g * r2 * s.X_a * s.X_b + kpa * s.Y_a) * dt + wh * xi[5] + wa * xi[1];
  o.X_b = s.X_b + (p.omega_b * s.Y_b - 0.5 * p.kappa_b * s.X_b) * dt + wb * xi[2];
  o.Y_b = s.Y_b - (p.omega_b * s.X_b + 0.5 * p.kappa_b * s.Y_b - p.g / r2 * (s.X_a * s.X_a + s.Y_a * s.Y_a)) * dt +
          wb * xi[3];
  o.t = s.t + dt;
  return o;
}

ClassicalState random_state() {
  ClassicalState s;
  s.X_a = gen::normal();
  s.Y_a = gen::normal();
  s.X_b = gen::normal();
  s.Y_b = gen::normal();
  return s;
}

NoiseDraws random_noise() {
  NoiseDraws n;
  for (double& x : n) x = gen::normal();
  return n;
}

}  // namespace

TEST_CASE("Euler-Maruyama step is the printed SDE") {
  for (int trial = 0; trial < 50; ++trial) {
    const EngineParams p = gen::params();
    const ClassicalState s = random_state();
    const NoiseDraws xi = random_noise();
    const bool heating = trial % 2 == 0;
    const double dt = gen::uniform(1e-3, 0.05);
    const ClassicalState a = langevin_step(s, p, heating, dt, xi, LangevinScheme::EulerMaruyama);
    const ClassicalState b = em_reference(s, p, heating, dt, xi);
    CHECK(a.X_a == doctest::Approx(b.X_a).epsilon(1e-13));
    CHECK(a.Y_a == doctest::Approx(b.Y_a).epsilon(1e-13));
    CHECK(a.X_b == doctest::Approx(b.X_b).epsilon(1e-13));
    CHECK(a.Y_b == doctest::Approx(b.Y_b).epsilon(1e-13));
  }
}

TEST_CASE("noiseless decoupled rotation") {
  EngineParams p;
  p.g = 0.0;
  p.kappa_a = p.kappa_b = p.kappa_h = 0.0;
  const NoiseDraws zero{};
  const double dt = 0.01;
  ClassicalState s = random_state();
  const double ra = s.X_a * s.X_a + s.Y_a * s.Y_a, rb = s.X_b * s.X_b + s.Y_b * s.Y_b;
  const ClassicalState em = langevin_step(s, p, true, dt, zero, LangevinScheme::EulerMaruyama);
  CHECK(std::abs(em.X_a * em.X_a + em.Y_a * em.Y_a - ra) / ra == doctest::Approx(dt * dt).epsilon(1e-9));
  for (int k = 0; k < 1000; ++k) s = langevin_step(s, p, k % 2 == 0, dt, zero, LangevinScheme::Exponential);
  CHECK(s.X_a * s.X_a + s.Y_a * s.Y_a == doctest::Approx(ra).epsilon(1e-12));
  CHECK(s.X_b * s.X_b + s.Y_b * s.Y_b == doctest::Approx(rb).epsilon(1e-12));
}

TEST_CASE("the two schemes share the same drift") {
  // Without noise both are consistent integrators, so their single-step
  // difference shrinks as dt^2.
  for (int trial = 0; trial < 10; ++trial) {
    const EngineParams p = gen::params();
    const ClassicalState s = random_state();
    auto gap = [&](double dt) {
      const ClassicalState a = langevin_step(s, p, true, dt, NoiseDraws{}, LangevinScheme::EulerMaruyama);
      const ClassicalState b = langevin_step(s, p, true, dt, NoiseDraws{}, LangevinScheme::Exponential);
      return std::abs(a.X_a - b.X_a) + std::abs(a.Y_a - b.Y_a) + std::abs(a.X_b - b.X_b) + std::abs(a.Y_b - b.Y_b);
    };
    const double ratio = gap(0.02) / gap(0.01);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.1));
  }
}

TEST_CASE("ensembles are deterministic and independent of threading") {
  const EngineParams p;
  const DriveSchedule s = DriveSchedule::for_params(p);
  EnsembleSpec spec;
  spec.n_traj = 300;
  spec.chunk = 40;
  EnsembleOptions o;
  o.t_end = 100.0;
  spec.workers = 1;
  const TimeSeries a = run_ensemble(p, s, spec, o);
  const TimeSeries b = run_ensemble(p, s, spec, o);
  spec.workers = 3;
  const TimeSeries c = run_ensemble(p, s, spec, o);
  REQUIRE(a.size() == c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].values() == b.samples[i].values());
    CHECK(a.samples[i].values() == c.samples[i].values());
    CHECK(a.errors[i].n_a == c.errors[i].n_a);
    CHECK(a.g2[i] == c.g2[i]);
  }
  spec.seed += 1;
  const TimeSeries d = run_ensemble(p, s, spec, o);
  CHECK(d.samples.back().n_a != a.samples.back().n_a);
}

TEST_CASE("single trajectories reproduce the ensemble members") {
  const EngineParams p;
  const DriveSchedule s = DriveSchedule::for_params(p);
  EnsembleSpec spec;
  spec.n_traj = 2;
  EnsembleOptions o;
  o.t_end = 50.0;
  const TimeSeries e = run_ensemble(p, s, spec, o);
  const auto t0 = run_trajectory(p, s, spec, o, 0);
  const auto t1 = run_trajectory(p, s, spec, o, 1);
  REQUIRE(t0.size() == e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(e.samples[i].t == t0[i].t);
    CHECK(e.samples[i].n_a == doctest::Approx(0.5 * (t0[i].n_a() + t1[i].n_a())).epsilon(1e-12));
    CHECK(e.samples[i].q == doctest::Approx(std::sqrt(2.0) * 0.5 * (t0[i].X_b + t1[i].X_b)).scale(1e-12));
  }
  CHECK(t0.front().t == 0.0);
}

TEST_CASE("decoupled LF mode relaxes to its bath") {
  EngineParams p;
  p.g = 0.0;
  p.nbar_b = 0.05;
  const DriveSchedule s = DriveSchedule::for_params(p);
  EnsembleSpec spec;
  spec.n_traj = 4000;
  spec.dt = 0.1;  // the linear part is integrated exactly, so a coarse step is fine at g = 0
  EnsembleOptions o;
  o.t_end = 1500.0;
  o.sample_every = 3000;
  const TimeSeries e = run_ensemble(p, s, spec, o);
  REQUIRE(e.size() > 2);
  for (std::size_t i = 1; i < e.size(); ++i) {
    const double t = e.samples[i].t;
    const double expect = p.nbar_b + (p.nbar_a - p.nbar_b) * std::exp(-p.kappa_b * t);
    INFO("t = " << t);
    CHECK(std::abs(e.samples[i].n_b - expect) < 4.0 * e.errors[i].n_b);
  }
  CHECK(std::abs(e.samples.back().n_b - p.nbar_b) < 4.0 * e.errors.back().n_b);
}

TEST_CASE("HF mode reaches the heating plateau") {
  const EngineParams p;
  DriveSchedule s = DriveSchedule::for_params(p);
  s.duty = 1.0;
  EnsembleSpec spec;
  spec.n_traj = 4000;
  EnsembleOptions o;
  o.t_end = 100.0;
  o.sample_every = 5000;
  const TimeSeries e = run_ensemble(p, s, spec, o);
  const double plateau = (p.kappa_a * p.nbar_a + p.kappa_h * p.nbar_h) / (p.kappa_a + p.kappa_h);
  CHECK(std::abs(e.samples.back().n_a - plateau) < 3.0 * e.errors.back().n_a);
}

TEST_CASE("standard errors scale as one over root n") {
  const EngineParams p;
  const DriveSchedule s = DriveSchedule::for_params(p);
  EnsembleSpec spec;
  EnsembleOptions o;
  o.t_end = 200.0;
  o.sample_every = 5000;
  spec.n_traj = 1000;
  const TimeSeries small = run_ensemble(p, s, spec, o);
  spec.n_traj = 2000;
  const TimeSeries big = run_ensemble(p, s, spec, o);
  for (std::size_t i = 1; i < small.size(); ++i) {
    CHECK(small.errors[i].n_a / big.errors[i].n_a == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
    CHECK(small.errors[i].q / big.errors[i].q == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
  }
}

TEST_CASE("classical first moments follow the moment equations") {
  const EngineParams p;
  const DriveSchedule s = DriveSchedule::for_params(p);
  EnsembleSpec spec;
  spec.n_traj = 2000;
  EnsembleOptions o;
  o.t_end = 2.0 * s.period;
  o.sample_every = 1250;
  const TimeSeries e = run_ensemble(p, s, spec, o);
  MomentOptions mo;
  mo.t_end = o.t_end;
  mo.sample_every = 625;
  const TimeSeries m = integrate_moments(initial_moments(p), p, s, Tier::QuantumMoments, mo);
  REQUIRE(m.size() == e.size());
  for (std::size_t i = 1; i < e.size(); ++i) {
    CHECK(std::abs(e.samples[i].n_a - m.samples[i].n_a) < 4.0 * e.errors[i].n_a);
    CHECK(std::abs(e.samples[i].q - m.samples[i].q) < 4.0 * e.errors[i].q);
    CHECK(std::abs(e.samples[i].p - m.samples[i].p) < 4.0 * e.errors[i].p);
  }
}

TEST_CASE("classical correlation") {
  const EngineParams base;
  EngineParams p = base;
  p.g = 0.0;
  const DriveSchedule s = DriveSchedule::for_params(p);
  EnsembleSpec spec;
  spec.n_traj = 50;
  EnsembleOptions o;
  o.t_end = 20.0;
  CHECK_THROWS_AS(classical_correlation(run_ensemble(p, s, spec, o)), StatisticsError);

  spec.n_traj = 2000;
  o.t_end = 300.0;
  o.sample_every = 2000;
  const TimeSeries e = run_ensemble(p, s, spec, o);
  const auto sigma = classical_correlation(e);
  REQUIRE(sigma.size() == e.size());
  for (std::size_t i = 1; i < e.size(); ++i) {
    // Independent modes: the covariance estimate has spread sqrt(var n_a var p / N), var p = 2 n_b.
    const double spread = std::sqrt(e.samples[i].var_na * 2.0 * e.samples[i].n_b / static_cast<double>(spec.n_traj));
    CHECK(std::abs(sigma[i]) < 4.0 * spread);
    CHECK(sigma[i] == doctest::Approx(-e.samples[i].c_np));
  }
}

TEST_CASE("scheme names round-trip") {
  for (LangevinScheme sc : {LangevinScheme::EulerMaruyama, LangevinScheme::Exponential})
    CHECK(langevin_scheme_from_string(to_string(sc)) == sc);
  CHECK_THROWS_AS(langevin_scheme_from_string("rk4"), DomainError);
}
