#include "otto/langevin.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <boost/random/normal_distribution.hpp>

#include "otto/error.hpp"

namespace otto {

bool ClassicalState::finite() const {
  return std::isfinite(X_a) && std::isfinite(Y_a) && std::isfinite(X_b) && std::isfinite(Y_b);
}

std::string to_string(LangevinScheme s) {
  return s == LangevinScheme::EulerMaruyama ? "euler-maruyama" : "exponential";
}

LangevinScheme langevin_scheme_from_string(const std::string& s) {
  if (s == "euler-maruyama") return LangevinScheme::EulerMaruyama;
  if (s == "exponential") return LangevinScheme::Exponential;
  throw DomainError("unknown Langevin scheme '" + s + "'");
}

namespace {

using zc = std::complex<double>;

/// Noise strengths D_i = kappa_i nbar_i and damping rates for one drive phase.
struct PhaseRates {
  double kappa_hf;  // kappa'_a: amplitude damping of the HF mode
  double kappa_lf;  // kappa_b (amplitude damping kappa_b / 2)
  double d_a, d_h, d_b;
};

PhaseRates phase_rates(const EngineParams& p, bool heating) {
  const BathRates r = bath_rates(p, heating);
  PhaseRates pr{};
  pr.kappa_hf = 0.5 * (r.hf_down - r.hf_up);
  pr.kappa_lf = r.lf_down - r.lf_up;
  pr.d_h = heating ? p.kappa_h * p.nbar_h : 0.0;
  pr.d_a = r.hf_up - pr.d_h;
  pr.d_b = r.lf_up;
  return pr;
}

/// (1 - exp(-x)) / x, continuous at 0.
double one_minus_exp_over(double x) { return x > 1e-300 ? -std::expm1(-x) / x : 1.0; }

/// Precomputed propagators of the exponential scheme for a fixed step.
struct ExpStep {
  zc hf_rot;   // exp(-(i omega_a + kappa'_a) h)
  zc lf_prop;  // exp(-(i omega_b + kappa_b / 2) h)
  zc lf_phi;   // (1 - exp(-lambda h)) / lambda
  double sa, sh, sb;  // noise amplitudes per quadrature component
  double gh;          // g sqrt 2 h, the coupling phase per unit X_b
  double g_over_sqrt2;

  ExpStep(const EngineParams& p, bool heating, double h) {
    const PhaseRates r = phase_rates(p, heating);
    hf_rot = std::exp(zc(-r.kappa_hf * h, -p.omega_a * h));
    const zc lambda(0.5 * r.kappa_lf, p.omega_b);
    lf_prop = std::exp(-lambda * h);
    lf_phi = (1.0 - lf_prop) / lambda;
    const double fa = std::sqrt(one_minus_exp_over(2.0 * r.kappa_hf * h));
    const double fb = std::sqrt(one_minus_exp_over(r.kappa_lf * h));
    sa = fa * std::sqrt(r.d_a * h);
    sh = fa * std::sqrt(r.d_h * h);
    sb = fb * std::sqrt(r.d_b * h);
    gh = p.g * std::numbers::sqrt2 * h;
    g_over_sqrt2 = p.g / std::numbers::sqrt2;
  }

  void apply(ClassicalState& s, const NoiseDraws& xi) const {
    const zc za(s.X_a, s.Y_a);
    const zc zb(s.X_b, s.Y_b);
    const double n2 = std::norm(za);  // |z_a|^2 = 2 |alpha_a|^2
    // exp(+i g sqrt2 X_b h) through the Cayley form; unitary to rounding.
    const double th = gh * s.X_b;
    const double q = 0.25 * th * th;
    const zc shift((1.0 - q) / (1.0 + q), th / (1.0 + q));
    const zc za_new = hf_rot * shift * za + zc(sa * xi[0] + sh * xi[4], sa * xi[1] + sh * xi[5]);
    const zc zb_new = lf_prop * zb + zc(0.0, g_over_sqrt2 * n2) * lf_phi + zc(sb * xi[2], sb * xi[3]);
    s.X_a = za_new.real();
    s.Y_a = za_new.imag();
    s.X_b = zb_new.real();
    s.Y_b = zb_new.imag();
  }
};

}  // namespace

ClassicalState langevin_step(const ClassicalState& s, const EngineParams& p, bool heating, double dt,
                             const NoiseDraws& noise, LangevinScheme scheme) {
  if (!(dt > 0.0)) throw DomainError("langevin_step: dt must be > 0");
  ClassicalState out = s;
  if (scheme == LangevinScheme::Exponential) {
    ExpStep(p, heating, dt).apply(out, noise);
  } else {
    const PhaseRates r = phase_rates(p, heating);
    const double omega = p.omega_a - p.g * std::numbers::sqrt2 * s.X_b;
    const double sa = std::sqrt(r.d_a * dt);
    const double sh = std::sqrt(r.d_h * dt);
    const double sb = std::sqrt(r.d_b * dt);
    out.X_a = s.X_a + (omega * s.Y_a - r.kappa_hf * s.X_a) * dt + sh * noise[4] + sa * noise[0];
    out.Y_a = s.Y_a - (omega * s.X_a + r.kappa_hf * s.Y_a) * dt + sh * noise[5] + sa * noise[1];
    out.X_b = s.X_b + (p.omega_b * s.Y_b - 0.5 * r.kappa_lf * s.X_b) * dt + sb * noise[2];
    out.Y_b = s.Y_b -
              (p.omega_b * s.X_b + 0.5 * r.kappa_lf * s.Y_b -
               p.g / std::numbers::sqrt2 * (s.X_a * s.X_a + s.Y_a * s.Y_a)) *
                  dt +
              sb * noise[3];
  }
  out.t = s.t + dt;
  return out;
}

namespace {

// Raw per-sample sums over trajectories; x = n_a, u = q, v = p, w = n_b.
enum Sum : int {
  kX, kX2, kX3, kX4, kU, kU2, kV, kV2, kXU, kXV, kX2U, kX2V, kXU2, kXV2, kX2U2, kX2V2, kW, kW2, kSums
};

struct Accumulator {
  std::vector<double> s;
  explicit Accumulator(std::size_t samples = 0) : s(samples * kSums, 0.0) {}
  Accumulator& operator+=(const Accumulator& o) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += o.s[i];
    return *this;
  }
};

void accumulate(double* a, const ClassicalState& st) {
  const double x = st.n_a();
  const double u = std::numbers::sqrt2 * st.X_b;
  const double v = std::numbers::sqrt2 * st.Y_b;
  const double w = st.n_b();
  const double x2 = x * x;
  a[kX] += x;
  a[kX2] += x2;
  a[kX3] += x2 * x;
  a[kX4] += x2 * x2;
  a[kU] += u;
  a[kU2] += u * u;
  a[kV] += v;
  a[kV2] += v * v;
  a[kXU] += x * u;
  a[kXV] += x * v;
  a[kX2U] += x2 * u;
  a[kX2V] += x2 * v;
  a[kXU2] += x * u * u;
  a[kXV2] += x * v * v;
  a[kX2U2] += x2 * u * u;
  a[kX2V2] += x2 * v * v;
  a[kW] += w;
  a[kW2] += w * w;
}

struct Grid {
  std::vector<Segment> segments;
  std::vector<double> sample_times;
  std::size_t every;
};

Grid make_grid(const DriveSchedule& schedule, const EnsembleSpec& spec, const EnsembleOptions& opts) {
  Grid g;
  g.every = std::max<std::size_t>(opts.sample_every, 1);
  g.segments = segment_grid(schedule, 0.0, opts.t_end, spec.dt, g.every);
  g.sample_times.push_back(0.0);
  for (const Segment& seg : g.segments)
    for (std::size_t step = g.every; step <= seg.steps; step += g.every)
      g.sample_times.push_back(step == seg.steps ? seg.t_stop : seg.t_start + static_cast<double>(step) * seg.h);
  return g;
}

/// Runs trajectory `index`, calling sink(sample_index, state) on the grid.
template <typename Sink>
void simulate(const EngineParams& p, const Grid& grid, const EnsembleSpec& spec, std::size_t index, Sink&& sink) {
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  const std::uint64_t idx = index;
  std::seed_seq seq{lo(spec.seed), hi(spec.seed), lo(idx), hi(idx)};
  std::mt19937_64 rng(seq);
  boost::random::normal_distribution<double> normal(0.0, 1.0);

  ClassicalState s;
  const double sd0 = std::sqrt(p.nbar_c());
  s.X_a = sd0 * normal(rng);
  s.Y_a = sd0 * normal(rng);
  s.X_b = sd0 * normal(rng);
  s.Y_b = sd0 * normal(rng);

  std::size_t k = 0;
  sink(k++, s);
  NoiseDraws xi{};
  for (const Segment& seg : grid.segments) {
    const ExpStep exp_step(p, seg.heating, seg.h);
    for (std::size_t step = 1; step <= seg.steps; ++step) {
      xi[0] = normal(rng);
      xi[1] = normal(rng);
      xi[2] = normal(rng);
      xi[3] = normal(rng);
      if (seg.heating) {
        xi[4] = normal(rng);
        xi[5] = normal(rng);
      } else {
        xi[4] = xi[5] = 0.0;
      }
      if (spec.scheme == LangevinScheme::Exponential) {
        exp_step.apply(s, xi);
        s.t = seg.t_start + static_cast<double>(step) * seg.h;
      } else {
        s = langevin_step(s, p, seg.heating, seg.h, xi, LangevinScheme::EulerMaruyama);
      }
      if (step % grid.every == 0) {
        s.t = step == seg.steps ? seg.t_stop : seg.t_start + static_cast<double>(step) * seg.h;
        if (!s.finite()) {
          std::ostringstream os;
          os << "Langevin trajectory " << index << " became non-finite at t = " << s.t;
          throw PropagationDiverged(os.str(), s.t);
        }
        sink(k++, s);
      }
    }
  }
}

/// Streaming pairwise merge of equally sized chunk sums.
class PairwiseReducer {
 public:
  void push(Accumulator a) {
    std::size_t level = 0;
    while (!stack_.empty() && stack_.back().first == level) {
      Accumulator prev = std::move(stack_.back().second);
      stack_.pop_back();
      prev += a;
      a = std::move(prev);
      ++level;
    }
    stack_.emplace_back(level, std::move(a));
  }
  Accumulator finish(std::size_t samples) {
    Accumulator out(samples);
    while (!stack_.empty()) {
      out += stack_.back().second;
      stack_.pop_back();
    }
    return out;
  }

 private:
  std::vector<std::pair<std::size_t, Accumulator>> stack_;
};

}  // namespace

TimeSeries run_ensemble(const EngineParams& p, const DriveSchedule& schedule, const EnsembleSpec& spec,
                        const EnsembleOptions& opts) {
  p.validate();
  schedule.validate();
  if (spec.n_traj < 2) throw StatisticsError("run_ensemble: need at least two trajectories");
  if (!(spec.dt > 0.0) || !(opts.t_end >= 0.0)) throw DomainError("run_ensemble: dt must be > 0, t_end >= 0");
  const Grid grid = make_grid(schedule, spec, opts);
  const std::size_t ns = grid.sample_times.size();
  const std::size_t chunk = std::max<std::size_t>(spec.chunk, 1);
  const std::size_t n_chunks = (spec.n_traj + chunk - 1) / chunk;
  unsigned workers = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_chunks));

  auto run_chunk = [&](std::size_t c) {
    Accumulator acc(ns);
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(spec.n_traj, begin + chunk);
    for (std::size_t i = begin; i < end; ++i)
      simulate(p, grid, spec, i, [&](std::size_t k, const ClassicalState& st) { accumulate(&acc.s[k * kSums], st); });
    return acc;
  };

  PairwiseReducer reducer;
  for (std::size_t first = 0; first < n_chunks; first += workers) {
    const std::size_t batch = std::min<std::size_t>(workers, n_chunks - first);
    std::vector<Accumulator> results(batch);
    if (batch == 1) {
      results[0] = run_chunk(first);
    } else {
      std::vector<std::exception_ptr> errors(batch);
      std::vector<std::thread> pool;
      for (std::size_t b = 0; b < batch; ++b)
        pool.emplace_back([&, b] {
          try {
            results[b] = run_chunk(first + b);
          } catch (...) {
            errors[b] = std::current_exception();
          }
        });
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (auto& r : results) reducer.push(std::move(r));
  }
  const Accumulator total = reducer.finish(ns);

  TimeSeries ts;
  ts.tier = Tier::Classical;
  ts.n_traj = spec.n_traj;
  const double N = static_cast<double>(spec.n_traj);
  const double bessel = N / (N - 1.0);
  for (std::size_t k = 0; k < ns; ++k) {
    const double* a = &total.s[k * kSums];
    auto E = [&](int i) { return a[i] / N; };
    const double mx = E(kX), mu = E(kU), mv = E(kV), mw = E(kW);
    MomentVector m;
    m.t = grid.sample_times[k];
    m.n_a = mx;
    m.q = mu;
    m.p = mv;
    m.var_na = E(kX2) - mx * mx;
    m.c_nq = E(kXU) - mx * mu;
    m.c_np = E(kXV) - mx * mv;
    m.n_b = mw;
    if (p.g * std::abs(m.q) >= p.omega_a) throw RegimeError("g |q| reached omega_a; the dispersive model is invalid");
    ts.samples.push_back(m);
    ts.g2.push_back(mw > 0.0 ? E(kW2) / (mw * mw) : std::nan(""));

    auto se_mean = [&](double m2, double m1) { return std::sqrt(std::max(0.0, (m2 - m1 * m1) * bessel) / N); };
    // Influence-function variance of a covariance estimator.
    auto se_cov = [&](int y2, int xy, int x2y, int xy2, int x2y2, double my, double c) {
      const double c4 = E(x2y2) - 2.0 * my * E(x2y) - 2.0 * mx * E(xy2) + my * my * E(kX2) + mx * mx * E(y2) +
                        4.0 * mx * my * E(xy) - 3.0 * mx * mx * my * my;
      return std::sqrt(std::max(0.0, (c4 - c * c) * bessel) / N);
    };
    EnsembleErrors e;
    e.n_a = se_mean(E(kX2), mx);
    e.q = se_mean(E(kU2), mu);
    e.p = se_mean(E(kV2), mv);
    e.n_b = se_mean(E(kW2), mw);
    const double c4x = E(kX4) - 4.0 * mx * E(kX3) + 6.0 * mx * mx * E(kX2) - 3.0 * mx * mx * mx * mx;
    e.var_na = std::sqrt(std::max(0.0, (c4x - m.var_na * m.var_na) * bessel) / N);
    e.c_nq = se_cov(kU2, kXU, kX2U, kXU2, kX2U2, mu, m.c_nq);
    e.c_np = se_cov(kV2, kXV, kX2V, kXV2, kX2V2, mv, m.c_np);
    ts.errors.push_back(e);
  }
  return ts;
}

std::vector<ClassicalState> run_trajectory(const EngineParams& p, const DriveSchedule& schedule,
                                           const EnsembleSpec& spec, const EnsembleOptions& opts,
                                           std::size_t index) {
  p.validate();
  const Grid grid = make_grid(schedule, spec, opts);
  std::vector<ClassicalState> out;
  out.reserve(grid.sample_times.size());
  simulate(p, grid, spec, index, [&](std::size_t, const ClassicalState& s) { out.push_back(s); });
  return out;
}

std::vector<double> classical_correlation(const TimeSeries& series) {
  if (series.n_traj < 100) throw StatisticsError("classical_correlation needs at least 100 trajectories");
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& s : series.samples) out.push_back(-s.c_np);
  return out;
}

}  // namespace otto
