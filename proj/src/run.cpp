#include "otto/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <future>
#include <sstream>

#include "otto/error.hpp"
#include "otto/io.hpp"
#include "otto/langevin.hpp"
#include "otto/master_equation.hpp"
#include "otto/moments.hpp"

#ifndef OTTO_VERSION
#define OTTO_VERSION "0.0.0"
#endif

namespace otto {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr Tier kTierOrder[] = {Tier::QuantumLindblad, Tier::QuantumMoments, Tier::Semiclassical, Tier::Classical};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// nan is not representable in JSON; null marks it.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json cycle_json(const CycleSummary& c) {
  json branches = json::object();
  for (Branch b : c.branches) {
    const std::string k = to_string(b);
    branches[k] = branches.value(k, 0) + 1;
  }
  return json{{"period", num(c.period)},
              {"t_start", num(c.t_start)},
              {"W", num(c.W)},
              {"Q_in", num(c.Q_in)},
              {"Q_in_hot_flow", num(c.Q_in_flow)},
              {"eta", num(c.eta)},
              {"eta_otto", num(c.eta_otto)},
              {"eta_is_ratio_not_percent", true},
              {"W_rect", num(c.W_rect)},
              {"P_avg", num(c.P_avg)},
              {"P_max", num(c.P_max)},
              {"P_mean", num(c.P_mean)},
              {"work_rate_mean", num(c.work_rate_mean)},
              {"J_b_mean", num(c.J_b_mean)},
              {"n_H", num(c.n_H)},
              {"n_L", num(c.n_L)},
              {"omega_H", num(c.omega_H)},
              {"omega_L", num(c.omega_L)},
              {"R_fit", num(c.R_fit)},
              {"center_fit", {num(c.center_fit_x), num(c.center_fit_y)}},
              {"closure_defect", num(c.closure_defect)},
              {"adiabatic_entropy_spread", num(c.adiabatic_entropy_spread)},
              {"branch_samples", branches}};
}

json units_json(const CycleSummary& c) {
  const PhysicalUnits u;
  return json{{"omega_a_over_2pi_hz", u.omega_a_over_2pi_hz},
              {"period_s", num(u.time_seconds(c.period))},
              {"W_J", num(u.energy_joule(c.W))},
              {"Q_in_J", num(u.energy_joule(c.Q_in))},
              {"P_avg_W", num(u.power_watt(c.P_avg))},
              {"P_max_W", num(u.power_watt(c.P_max))}};
}

json moments_json(const MomentVector& m) {
  return json{{"n_a", m.n_a},   {"q", m.q},       {"p", m.p},     {"var_na", m.var_na},
              {"c_nq", m.c_nq}, {"c_np", m.c_np}, {"n_b", m.n_b}};
}

void analyse(TierResult& r, const ScenarioConfig& cfg) {
  r.thermo = thermo_from_series(r.series, cfg.engine, cfg.schedule);
  try {
    r.cycle = segment_cycle(r.series, r.thermo, cfg.schedule, cfg.engine, cfg.checks.closure_tol);
  } catch (const Error& e) {
    r.cycle_error = e.what();
  }
  try {
    r.P_max = max_power(r.series, cfg.engine, cfg.schedule, &r.P_max_se);
  } catch (const Error&) {
    r.P_max = std::nan("");
  }
}

std::string populations_csv(const TimeSeries& s, int lf) {
  std::ostringstream os;
  os << 't';
  for (int n = 0; n < lf; ++n) os << ",P" << n;
  os << '\n';
  for (std::size_t i = 0; i < s.lf_populations.size(); ++i) {
    os << format_number(s.samples[i].t);
    for (Eigen::Index n = 0; n < s.lf_populations[i].size(); ++n) os << ',' << format_number(s.lf_populations[i](n));
    os << '\n';
  }
  return os.str();
}

std::string csv_escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
  return out + "\"";
}

}  // namespace

const char* code_version() { return OTTO_VERSION; }

ScenarioResult simulate(const ScenarioConfig& cfg) {
  cfg.validate();
  ScenarioResult out;
  out.config = cfg;
  const EngineParams& p = cfg.engine;
  const DriveSchedule& sched = cfg.schedule;

  for (Tier tier : kTierOrder) {
    if (!cfg.wants(tier)) continue;
    try {
      TierResult r;
      switch (tier) {
        case Tier::QuantumLindblad: {
          PropagationOptions po;
          po.t_end = cfg.integration.t_end;
          po.dt = cfg.integration.dt;
          po.sample_every = cfg.integration.sample_every;
          po.record_lf_populations = cfg.wants_output("populations");
          r.series = propagate(initial_thermal_state(p, cfg.dims), p, sched, po);
          break;
        }
        case Tier::QuantumMoments:
        case Tier::Semiclassical: {
          MomentOptions mo{cfg.integration.t_end, cfg.integration.dt, cfg.integration.sample_every};
          r.series = integrate_moments(initial_moments(p), p, sched, tier, mo);
          break;
        }
        case Tier::Classical: {
          EnsembleOptions eo{cfg.integration.t_end, cfg.classical_sample_every};
          r.series = run_ensemble(p, sched, cfg.ensemble, eo);
          break;
        }
      }
      analyse(r, cfg);
      out.tiers.emplace(tier, std::move(r));
    } catch (const Error& e) {
      out.failures[tier] = e.what();
    }
  }

  auto lind = out.tiers.find(Tier::QuantumLindblad);
  if (lind != out.tiers.end() && cfg.checks.truncation) {
    TruncationCheck& tc = out.truncation;
    tc.ran = true;
    tc.lf_base = cfg.dims.lf;
    tc.lf_extended = cfg.dims.lf + cfg.checks.truncation_extra;
    tc.horizon = std::min(cfg.integration.t_end, cfg.checks.truncation_horizon);
    const TimeSeries& base = lind->second.series;
    if (base.final_state) {
      const DensityMatrix rb = partial_trace(*base.final_state, cfg.dims, Mode::LF);
      for (int n = std::max(0, cfg.dims.lf - 5); n < cfg.dims.lf; ++n) tc.tail_mass += rb.matrix()(n, n).real();
    }
    try {
      PropagationOptions po;
      po.t_end = tc.horizon;
      po.dt = cfg.integration.dt;
      po.sample_every = cfg.integration.sample_every;
      const ModeDim ext{cfg.dims.hf, tc.lf_extended};
      const TimeSeries big = propagate(initial_thermal_state(p, ext), p, sched, po);
      double scale = 0.0, drift = 0.0;
      for (std::size_t i = 0; i < big.size() && i < base.size(); ++i) scale = std::max(scale, std::abs(big.samples[i].n_b));
      for (std::size_t i = 0; i < big.size() && i < base.size(); ++i) {
        drift = std::max(drift, std::abs(big.samples[i].n_b - base.samples[i].n_b) / scale);
      }
      tc.max_relative_drift = drift;
      tc.passed = drift < cfg.checks.truncation_tol;
    } catch (const Error& e) {
      tc.passed = false;
      out.failures[Tier::QuantumLindblad] = std::string("truncation check: ") + e.what();
    }
  }
  return out;
}

json RunManifest::to_json() const {
  return json{{"config_hash", config_hash}, {"code_version", code_version},
              {"started", started},         {"finished", finished},
              {"diagnostics", diagnostics}, {"outputs", outputs},
              {"failures", failures},       {"success", success},
              {"rng", kRngAlgorithm}};
}

json summary_json(const ScenarioResult& r) {
  const EngineParams& p = r.config.engine;
  json j;
  j["config_hash"] = config_hash(r.config);
  j["tiers"] = json::object();
  for (const auto& [tier, tr] : r.tiers) {
    json t;
    t["P_max"] = num(tr.P_max);
    if (tier == Tier::Classical) t["P_max_se"] = num(tr.P_max_se);
    if (tr.cycle) {
      t["cycle"] = cycle_json(*tr.cycle);
      t["physical_units"] = units_json(*tr.cycle);
    } else {
      t["cycle_error"] = tr.cycle_error;
    }
    if (!tr.series.samples.empty()) t["final"] = moments_json(tr.series.samples.back());
    j["tiers"][to_string(tier)] = t;
  }
  const SquareWaveQ sq = analytic_q_steady(p);
  const LimitCycleGeometry geo = limit_cycle_geometry(p);
  j["analytic"] = {{"constant_drive_steady_state", moments_json(steady_state_analytic(p))},
                   {"square_wave_q", {{"q0", sq.q0}, {"Q", sq.Q}, {"phi", sq.phi}}},
                   {"limit_cycle", {{"R", geo.R}, {"q_b0", geo.q_b0}, {"p_b0", geo.p_b0}}}};
  return j;
}

RunManifest run_scenario(const ScenarioConfig& cfg, const fs::path& out_dir, ScenarioResult* result) {
  RunManifest m;
  m.code_version = code_version();
  m.started = utc_now();
  m.config_hash = config_hash(cfg);
  ScenarioResult r = simulate(cfg);
  fs::create_directories(out_dir);

  atomic_write(out_dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  m.outputs.push_back("config.json");

  json diag;
  for (const auto& [tier, tr] : r.tiers) {
    const std::string name = to_string(tier);
    json d;
    d["samples"] = tr.series.size();
    d["closure_defect"] = tr.cycle ? num(tr.cycle->closure_defect) : json(nullptr);
    if (!tr.cycle) {
      d["cycle_error"] = tr.cycle_error;
      m.failures.push_back(name + ": " + tr.cycle_error);
    }
    if (tier == Tier::Classical && !tr.series.errors.empty()) {
      EnsembleErrors worst;
      for (const EnsembleErrors& e : tr.series.errors) {
        worst.n_a = std::max(worst.n_a, e.n_a);
        worst.q = std::max(worst.q, e.q);
        worst.p = std::max(worst.p, e.p);
        worst.n_b = std::max(worst.n_b, e.n_b);
        worst.c_np = std::max(worst.c_np, e.c_np);
      }
      d["max_standard_error"] = {{"n_a", worst.n_a}, {"q", worst.q}, {"p", worst.p},
                                 {"n_b", worst.n_b}, {"c_np", worst.c_np}};
      d["n_traj"] = tr.series.n_traj;
    }
    diag[name] = d;

    if (cfg.wants_output("timeseries")) {
      const std::string file = "timeseries_" + name + ".csv";
      atomic_write(out_dir / file, timeseries_csv(tr.series, tr.thermo));
      try {
        validate_timeseries_csv(out_dir / file, tier);
      } catch (const Error& e) {
        m.failures.push_back(file + ": " + e.what());
      }
      m.outputs.push_back(file);
    }
    if (tier == Tier::QuantumLindblad && cfg.wants_output("populations")) {
      const std::string file = "populations_" + name + ".csv";
      atomic_write(out_dir / file, populations_csv(tr.series, cfg.dims.lf));
      m.outputs.push_back(file);
    }
  }
  for (const auto& [tier, msg] : r.failures) m.failures.push_back(to_string(tier) + ": " + msg);
  if (r.truncation.ran) {
    diag["truncation"] = {{"lf_base", r.truncation.lf_base},
                          {"lf_extended", r.truncation.lf_extended},
                          {"horizon", r.truncation.horizon},
                          {"max_relative_drift_n_b", r.truncation.max_relative_drift},
                          {"tail_mass", r.truncation.tail_mass},
                          {"passed", r.truncation.passed}};
    if (!r.truncation.passed) m.failures.push_back("truncation check failed");
  }
  m.diagnostics = diag;

  if (cfg.wants_output("summary")) {
    atomic_write(out_dir / "summary.json", summary_json(r).dump(2) + "\n");
    m.outputs.push_back("summary.json");
  }
  m.success = m.failures.empty();
  m.finished = utc_now();
  m.outputs.push_back("manifest.json");
  atomic_write(out_dir / "manifest.json", m.to_json().dump(2) + "\n");
  if (result) *result = std::move(r);
  return m;
}

bool SweepResult::all_ok() const {
  return std::all_of(points.begin(), points.end(), [](const SweepPoint& p) { return p.ok; });
}

SweepResult run_sweep(const ScenarioConfig& base, const std::string& parameter, const std::vector<double>& values,
                      const fs::path& out_dir) {
  SweepResult s;
  s.parameter = parameter;
  s.points.resize(values.size());

  auto one = [&](std::size_t i) {
    SweepPoint& pt = s.points[i];
    pt.value = values[i];
    try {
      const ScenarioConfig cfg = with_parameter(base, parameter, values[i]);
      ScenarioResult r;
      const RunManifest m = run_scenario(cfg, out_dir / ("point_" + std::to_string(i)), &r);
      pt.ok = m.success;
      for (const std::string& f : m.failures) pt.error += (pt.error.empty() ? "" : "; ") + f;
      for (const auto& [tier, tr] : r.tiers) pt.P_max[tier] = tr.P_max;
      if (auto c = r.tiers.find(Tier::Classical); c != r.tiers.end()) pt.P_max_classical_se = c->second.P_max_se;
      pt.g2_final = std::nan("");
      for (Tier t : {Tier::QuantumLindblad, Tier::Classical}) {
        auto it = r.tiers.find(t);
        if (it != r.tiers.end() && !it->second.series.g2.empty()) {
          pt.g2_final = it->second.series.g2.back();
          break;
        }
      }
      for (Tier t : kTierOrder) {
        auto it = r.tiers.find(t);
        if (it != r.tiers.end() && !it->second.series.samples.empty()) {
          pt.n_a_final = it->second.series.samples.back().n_a;
          pt.n_b_final = it->second.series.samples.back().n_b;
          break;
        }
      }
    } catch (const Error& e) {
      pt.ok = false;
      pt.error = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, base.workers);
  for (std::size_t first = 0; first < values.size(); first += workers) {
    std::vector<std::future<void>> batch;
    for (std::size_t i = first; i < std::min(values.size(), first + workers); ++i) {
      batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, one, i));
    }
    for (auto& f : batch) f.get();
  }
  fs::create_directories(out_dir);
  atomic_write(out_dir / "sweep.csv", sweep_csv(s));
  return s;
}

std::string sweep_csv(const SweepResult& s) {
  std::ostringstream os;
  os << "index,value,status,P_max_quantum_lindblad,P_max_quantum_moments,P_max_semiclassical,P_max_classical,"
        "se_P_max_classical,rel_classical,rel_semiclassical,g2_final,n_a_final,n_b_final,error\n";
  auto get = [](const SweepPoint& p, Tier t) {
    auto it = p.P_max.find(t);
    return it == p.P_max.end() ? std::nan("") : it->second;
  };
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const SweepPoint& p = s.points[i];
    double Pq = get(p, Tier::QuantumLindblad);
    if (std::isnan(Pq)) Pq = get(p, Tier::QuantumMoments);
    const double Pc = get(p, Tier::Classical);
    const double Psc = get(p, Tier::Semiclassical);
    os << i << ',' << format_number(p.value) << ',' << (p.ok ? "ok" : "failed");
    for (double x : {get(p, Tier::QuantumLindblad), get(p, Tier::QuantumMoments), Psc, Pc,
                     p.P_max.count(Tier::Classical) ? p.P_max_classical_se : std::nan(""), (Pq - Pc) / Pq,
                     (Pq - Psc) / Pq, p.g2_final, p.n_a_final, p.n_b_final}) {
      os << ',' << format_number(x);
    }
    os << ',' << csv_escape(p.error) << '\n';
  }
  return os.str();
}

json steady_report(const ScenarioConfig& cfg) {
  cfg.validate();
  json j;
  for (MasterModel model : {MasterModel::Local, MasterModel::Global}) {
    EngineParams p = cfg.engine;
    p.model = model;
    const MomentVector num_ss = moments_of(steady_state_nullspace(p, cfg.dims));
    const MomentVector ana = steady_state_analytic(p);
    json rows = json::object();
    double worst = 0.0;
    const auto nv = num_ss.values();
    const auto av = ana.values();
    for (int k = 0; k < kMomentCount; ++k) {
      const double rel = std::abs(nv(k) - av(k)) / std::max(std::abs(av(k)), 1e-300);
      // Observables whose closed form vanishes (global-model p) are compared absolutely.
      const double err = std::abs(av(k)) > 1e-12 ? rel : std::abs(nv(k) - av(k));
      worst = std::max(worst, err);
      rows[kMomentNames[k]] = {{"numeric", nv(k)}, {"analytic", av(k)}, {"error", err}};
    }
    j[to_string(model)] = {{"observables", rows}, {"max_error", worst}};
  }
  j["dims"] = {cfg.dims.hf, cfg.dims.lf};
  return j;
}

json report_run(const fs::path& run_dir) {
  std::ifstream in(run_dir / "config.json");
  if (!in) throw ConfigError((run_dir / "config.json").string(), "missing run configuration");
  json cj;
  in >> cj;
  const ScenarioConfig cfg = config_from_json(cj);
  json j;
  j["run_dir"] = run_dir.string();
  j["tiers"] = json::object();
  for (Tier tier : kTierOrder) {
    const fs::path f = run_dir / ("timeseries_" + to_string(tier) + ".csv");
    if (!fs::exists(f)) continue;
    TierResult r;
    r.series = timeseries_from_csv(f, tier);
    analyse(r, cfg);
    json t;
    t["P_max"] = num(r.P_max);
    if (r.cycle) {
      t["cycle"] = cycle_json(*r.cycle);
      t["physical_units"] = units_json(*r.cycle);
    } else {
      t["cycle_error"] = r.cycle_error;
    }
    j["tiers"][to_string(tier)] = t;
  }
  return j;
}

}  // namespace otto
