#include "otto/params.hpp"

#include <cmath>
#include <limits>

#include "otto/error.hpp"

namespace otto {

namespace {
constexpr double kPlanck = 6.62607015e-34;
constexpr double kBoltzmann = 1.380649e-23;

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(name) + " must be finite and >= 0");
  }
}
}  // namespace

std::string to_string(MasterModel m) { return m == MasterModel::Local ? "local" : "global"; }

MasterModel master_model_from_string(const std::string& s) {
  if (s == "local") return MasterModel::Local;
  if (s == "global") return MasterModel::Global;
  throw DomainError("unknown master-equation model '" + s + "'");
}

double EngineParams::alpha() const { return model == MasterModel::Global ? g / omega_b : 0.0; }

double EngineParams::kappa_d() const {
  if (model != MasterModel::Global || nbar_b <= 0.0) return 0.0;
  return 4.0 * kappa_b * effective_temperature(omega_b, nbar_b) / omega_b;
}

void EngineParams::validate() const {
  require_nonnegative(g, "g");
  require_nonnegative(kappa_a, "kappa_a");
  require_nonnegative(kappa_b, "kappa_b");
  require_nonnegative(kappa_h, "kappa_h");
  require_nonnegative(nbar_a, "nbar_a");
  require_nonnegative(nbar_b, "nbar_b");
  require_nonnegative(nbar_h, "nbar_h");
  require_nonnegative(kappa_0a, "kappa_0a");
  require_nonnegative(kappa_0b, "kappa_0b");
  require_nonnegative(nbar_0a, "nbar_0a");
  require_nonnegative(nbar_0b, "nbar_0b");
  if (!(omega_b > 0.0)) throw DomainError("omega_b must be > 0");
  if (!(omega_a > omega_b)) throw DomainError("omega_a must exceed omega_b");
}

DriveSchedule DriveSchedule::for_params(const EngineParams& p) {
  DriveSchedule s;
  s.period = 2.0 * std::numbers::pi / p.omega_b;
  return s;
}

bool DriveSchedule::heating(double t) const {
  double x = std::fmod(t - phase, period);
  if (x < 0.0) x += period;
  return x < duty * period;
}

void DriveSchedule::validate() const {
  if (!(period > 0.0) || !std::isfinite(period)) throw DomainError("schedule.period must be > 0");
  if (!(duty >= 0.0 && duty <= 1.0)) throw DomainError("schedule.duty must lie in [0, 1]");
  if (!std::isfinite(phase)) throw DomainError("schedule.phase must be finite");
}

BathRates bath_rates(const EngineParams& p, bool heating) {
  const double kh = heating ? p.kappa_h : 0.0;
  BathRates r{};
  r.hf_up = p.kappa_a * p.nbar_a + kh * p.nbar_h;
  r.hf_down = p.kappa_a * (p.nbar_a + 1.0) + kh * (p.nbar_h + 1.0);
  r.lf_dressed_up = p.kappa_b * p.nbar_b;
  r.lf_dressed_down = p.kappa_b * (p.nbar_b + 1.0);
  r.lf_up = r.lf_dressed_up;
  r.lf_down = r.lf_dressed_down;
  if (p.include_background) {
    r.hf_up += p.kappa_0a * p.nbar_0a;
    r.hf_down += p.kappa_0a * (p.nbar_0a + 1.0);
    r.lf_up += p.kappa_0b * p.nbar_0b;
    r.lf_down += p.kappa_0b * (p.nbar_0b + 1.0);
  }
  return r;
}

DerivedRates derived_rates(const EngineParams& p, bool heating) {
  const BathRates r = bath_rates(p, heating);
  DerivedRates d{};
  d.A = r.hf_up;
  d.B = r.hf_down - r.hf_up;
  d.kappa_b_total = r.lf_down - r.lf_up;
  d.nbar_b_eff = d.kappa_b_total > 0.0 ? r.lf_up / d.kappa_b_total : 0.0;
  d.C = d.B + 0.5 * d.kappa_b_total;
  d.omega_sq_corr = p.omega_b * p.omega_b + d.C * d.C;
  d.omega_sq_q = p.omega_b * p.omega_b + 0.25 * d.kappa_b_total * d.kappa_b_total;
  return d;
}

double planck_occupancy(double omega, double T) {
  if (!(omega > 0.0)) throw DomainError("planck_occupancy: omega must be > 0");
  if (!(T > 0.0)) throw DomainError("planck_occupancy: temperature must be > 0");
  return 1.0 / std::expm1(omega / T);
}

double effective_temperature(double omega, double nbar) {
  if (!(omega > 0.0)) throw DomainError("effective_temperature: omega must be > 0");
  if (!(nbar > 0.0)) throw DomainError("effective_temperature: nbar must be > 0");
  return omega / std::log1p(1.0 / nbar);
}

double PhysicalUnits::energy_joule(double e) const { return e * kPlanck * omega_a_over_2pi_hz; }

double PhysicalUnits::time_seconds(double t) const {
  return t / (2.0 * std::numbers::pi * omega_a_over_2pi_hz);
}

double PhysicalUnits::power_watt(double p) const {
  return energy_joule(p) / time_seconds(1.0);
}

double PhysicalUnits::temperature_kelvin(double T) const {
  return T * kPlanck * omega_a_over_2pi_hz / kBoltzmann;
}

double PhysicalUnits::frequency_hz(double omega) const { return omega * omega_a_over_2pi_hz; }

std::vector<Segment> segment_grid(const DriveSchedule& s, double t0, double t_end, double dt,
                                  std::size_t step_multiple) {
  if (!(dt > 0.0)) throw DomainError("time step must be > 0");
  if (t_end < t0) throw DomainError("t_end must not precede t0");
  if (step_multiple == 0) step_multiple = 1;

  // Drive edges relative to the phase: k T and k T + duty T.
  std::vector<double> edges;
  const double on = s.duty * s.period;
  const double k0 = std::floor((t0 - s.phase) / s.period) - 1.0;
  for (double k = k0;; k += 1.0) {
    const double base = s.phase + k * s.period;
    if (base > t_end) break;
    for (double e : {base, base + on}) {
      if (e > t0 && e < t_end) edges.push_back(e);
    }
  }
  edges.push_back(t_end);

  std::vector<Segment> out;
  double start = t0;
  const double tiny = 1e-12 * std::max(1.0, std::abs(t_end));
  for (double stop : edges) {
    const double len = stop - start;
    if (len <= tiny) continue;
    auto steps = static_cast<std::size_t>(std::ceil(len / dt - 1e-9));
    steps = std::max<std::size_t>(steps, 1);
    steps = ((steps + step_multiple - 1) / step_multiple) * step_multiple;
    const double mid = 0.5 * (start + stop);
    out.push_back(Segment{start, stop, steps, len / static_cast<double>(steps), s.heating(mid)});
    start = stop;
  }
  return out;
}

}  // namespace otto
