#include "otto/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "otto/error.hpp"

namespace otto {

using nlohmann::json;

namespace {

json toml_to_json(const toml::node& n, const std::string& path) {
  if (const auto* t = n.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) {
      const std::string key(k.str());
      out[key] = toml_to_json(v, path.empty() ? key : path + "." + key);
    }
    return out;
  }
  if (const auto* a = n.as_array()) {
    json out = json::array();
    for (std::size_t i = 0; i < a->size(); ++i) out.push_back(toml_to_json((*a)[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }
  if (const auto* v = n.as_integer()) return v->get();
  if (const auto* v = n.as_floating_point()) return v->get();
  if (const auto* v = n.as_boolean()) return v->get();
  if (const auto* v = n.as_string()) return v->get();
  throw ConfigError(path, "unsupported TOML value type");
}

// Reads the keys of one JSON table, rejecting anything it was not asked about.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected a table");
  }

  std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  void number(const std::string& k, double& out) {
    seen_.insert(k);
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number()) throw ConfigError(field(k), "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(field(k), "must be finite");
  }

  template <typename Int>
  void integer(const std::string& k, Int& out) {
    seen_.insert(k);
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_integer()) throw ConfigError(field(k), "expected an integer");
    if (v.is_number_unsigned()) {
      out = static_cast<Int>(v.get<std::uint64_t>());
      return;
    }
    const auto x = v.get<std::int64_t>();
    if (x < 0 && !std::is_signed_v<Int>) throw ConfigError(field(k), "must be >= 0");
    out = static_cast<Int>(x);
  }

  void boolean(const std::string& k, bool& out) {
    seen_.insert(k);
    if (!has(k)) return;
    if (!j_.at(k).is_boolean()) throw ConfigError(field(k), "expected true or false");
    out = j_.at(k).get<bool>();
  }

  void string(const std::string& k, std::string& out) {
    seen_.insert(k);
    if (!has(k)) return;
    if (!j_.at(k).is_string()) throw ConfigError(field(k), "expected a string");
    out = j_.at(k).get<std::string>();
  }

  void strings(const std::string& k, std::vector<std::string>& out) {
    seen_.insert(k);
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_array()) throw ConfigError(field(k), "expected an array of strings");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw ConfigError(field(k) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(v[i].get<std::string>());
    }
  }

  Reader table(const std::string& k) {
    seen_.insert(k);
    static const json empty = json::object();
    return Reader(has(k) ? j_.at(k) : empty, field(k));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

bool ScenarioConfig::wants(Tier t) const { return std::find(tiers.begin(), tiers.end(), t) != tiers.end(); }

bool ScenarioConfig::wants_output(const std::string& name) const {
  return std::find(outputs.begin(), outputs.end(), name) != outputs.end();
}

void ScenarioConfig::validate() const {
  // Library validators lead their messages with the field name.
  auto wrap = [](const std::string& section, auto&& fn) {
    try {
      fn();
    } catch (const DomainError& e) {
      const std::string msg = e.what();
      const std::string head = msg.substr(0, msg.find(' '));
      throw ConfigError(head.find('.') != std::string::npos ? head : section + "." + head, msg);
    }
  };
  wrap("engine", [&] { engine.validate(); });
  if (!(engine.nbar_h < 3.25)) throw ConfigError("engine.nbar_h", "must stay below 3.25");
  wrap("schedule", [&] { schedule.validate(); });
  if (dims.hf < 2) throw ConfigError("dims.hf", "must be >= 2");
  if (dims.lf < 2) throw ConfigError("dims.lf", "must be >= 2");
  if (!(integration.dt > 0.0)) throw ConfigError("integration.dt", "must be > 0");
  if (!(integration.t_end >= 0.0)) throw ConfigError("integration.t_end", "must be >= 0");
  if (integration.sample_every == 0) throw ConfigError("integration.sample_every", "must be >= 1");
  if (ensemble.n_traj == 0) throw ConfigError("ensemble.n_traj", "must be >= 1");
  if (!(ensemble.dt > 0.0)) throw ConfigError("ensemble.dt", "must be > 0");
  if (ensemble.chunk == 0) throw ConfigError("ensemble.chunk", "must be >= 1");
  if (classical_sample_every == 0) throw ConfigError("ensemble.sample_every", "must be >= 1");
  if (tiers.empty()) throw ConfigError("tiers", "at least one tier is required");
  static const std::set<std::string> known_outputs{"timeseries", "summary", "populations"};
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (!known_outputs.count(outputs[i])) {
      throw ConfigError("outputs[" + std::to_string(i) + "]", "unknown output '" + outputs[i] + "'");
    }
  }
  if (checks.truncation_extra < 1) throw ConfigError("checks.truncation_extra", "must be >= 1");
  if (!(checks.truncation_horizon > 0.0)) throw ConfigError("checks.truncation_horizon", "must be > 0");
  if (!(checks.truncation_tol > 0.0)) throw ConfigError("checks.truncation_tol", "must be > 0");
  if (!(checks.closure_tol > 0.0)) throw ConfigError("checks.closure_tol", "must be > 0");
  if (workers == 0) throw ConfigError("workers", "must be >= 1");
}

std::string default_config_toml() {
  return R"(# Scenario defaults. Units: omega_a = hbar = k_B = 1.

seed = 20170721            # classical-ensemble RNG seed
tiers = ["quantum-lindblad", "quantum-moments", "semiclassical", "classical"]
outputs = ["timeseries", "summary"]   # add "populations" for LF P(n) per sample
workers = 1                # sweep points run concurrently

[engine]
omega_a = 1.0              # HF mode frequency
omega_b = 0.05             # LF mode frequency
g = 0.05                   # optomechanical coupling
kappa_a = 0.2              # HF cold-bath rate
kappa_b = 0.005            # LF cold-bath rate
kappa_h = 0.2              # hot-bath rate while the drive is on
nbar_a = 0.01              # HF cold-bath occupancy
nbar_b = 0.01              # LF cold-bath occupancy
nbar_h = 0.125             # hot-bath occupancy, below 3.25
model = "local"            # "local" or "global" (dressed-state) dissipators

[engine.background]
include = false            # environment terms at T_0
kappa_0a = 0.0
kappa_0b = 0.0
nbar_0a = 0.0
nbar_0b = 0.0

[schedule]
# period = 125.66          # defaults to 2 pi / omega_b
duty = 0.5                 # heating fraction of each period
phase = 0.0                # first rising edge

[dims]
hf = 6                     # HF Fock levels
lf = 50                    # LF Fock levels

[integration]
dt = 0.02                  # RK4 step of the Lindblad and moment tiers
t_end = 5000.0
sample_every = 25          # steps between samples

[ensemble]
n_traj = 10000
dt = 0.01
sample_every = 50
scheme = "exponential"     # or "euler-maruyama"
chunk = 125                # trajectories per reduction chunk
workers = 0                # threads, 0 = hardware concurrency

[checks]
truncation = true          # rerun Lindblad with lf + truncation_extra levels
truncation_extra = 10
truncation_horizon = 250.0
truncation_tol = 0.005     # max relative drift of <n_b>
closure_tol = 1e-3         # stroboscopic defect accepted for the cycle summary
)";
}

ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c;
  Reader root(j, "");
  root.integer("seed", c.ensemble.seed);
  std::vector<std::string> tiers;
  root.strings("tiers", tiers);
  if (root.has("tiers")) {
    c.tiers.clear();
    for (std::size_t i = 0; i < tiers.size(); ++i) {
      try {
        const Tier t = tier_from_string(tiers[i]);
        if (!c.wants(t)) c.tiers.push_back(t);
      } catch (const Error& e) {
        throw ConfigError("tiers[" + std::to_string(i) + "]", e.what());
      }
    }
  }
  root.strings("outputs", c.outputs);
  root.integer("workers", c.workers);

  {
    Reader e = root.table("engine");
    EngineParams& p = c.engine;
    e.number("omega_a", p.omega_a);
    e.number("omega_b", p.omega_b);
    e.number("g", p.g);
    e.number("kappa_a", p.kappa_a);
    e.number("kappa_b", p.kappa_b);
    e.number("kappa_h", p.kappa_h);
    e.number("nbar_a", p.nbar_a);
    e.number("nbar_b", p.nbar_b);
    e.number("nbar_h", p.nbar_h);
    std::string model = to_string(p.model);
    e.string("model", model);
    try {
      p.model = master_model_from_string(model);
    } catch (const Error& err) {
      throw ConfigError("engine.model", err.what());
    }
    Reader b = e.table("background");
    b.boolean("include", p.include_background);
    b.number("kappa_0a", p.kappa_0a);
    b.number("kappa_0b", p.kappa_0b);
    b.number("nbar_0a", p.nbar_0a);
    b.number("nbar_0b", p.nbar_0b);
    b.finish();
    e.finish();
  }
  {
    Reader s = root.table("schedule");
    c.derive_period = !s.has("period");
    s.number("period", c.schedule.period);
    s.number("duty", c.schedule.duty);
    s.number("phase", c.schedule.phase);
    s.finish();
    if (c.derive_period) c.schedule.period = 2.0 * std::numbers::pi / c.engine.omega_b;
  }
  {
    Reader d = root.table("dims");
    d.integer("hf", c.dims.hf);
    d.integer("lf", c.dims.lf);
    d.finish();
  }
  {
    Reader i = root.table("integration");
    i.number("dt", c.integration.dt);
    i.number("t_end", c.integration.t_end);
    i.integer("sample_every", c.integration.sample_every);
    i.finish();
  }
  {
    Reader e = root.table("ensemble");
    e.integer("n_traj", c.ensemble.n_traj);
    e.number("dt", c.ensemble.dt);
    e.integer("sample_every", c.classical_sample_every);
    std::string scheme = to_string(c.ensemble.scheme);
    e.string("scheme", scheme);
    try {
      c.ensemble.scheme = langevin_scheme_from_string(scheme);
    } catch (const Error& err) {
      throw ConfigError("ensemble.scheme", err.what());
    }
    e.integer("chunk", c.ensemble.chunk);
    e.integer("workers", c.ensemble.workers);
    e.finish();
  }
  {
    Reader k = root.table("checks");
    k.boolean("truncation", c.checks.truncation);
    k.integer("truncation_extra", c.checks.truncation_extra);
    k.number("truncation_horizon", c.checks.truncation_horizon);
    k.number("truncation_tol", c.checks.truncation_tol);
    k.number("closure_tol", c.checks.closure_tol);
    k.finish();
  }
  root.finish();
  c.validate();
  return c;
}

json config_to_json(const ScenarioConfig& c) {
  json j;
  j["seed"] = c.ensemble.seed;
  j["tiers"] = json::array();
  for (Tier t : c.tiers) j["tiers"].push_back(to_string(t));
  j["outputs"] = c.outputs;
  j["workers"] = c.workers;
  const EngineParams& p = c.engine;
  j["engine"] = {{"omega_a", p.omega_a}, {"omega_b", p.omega_b}, {"g", p.g},
                 {"kappa_a", p.kappa_a}, {"kappa_b", p.kappa_b}, {"kappa_h", p.kappa_h},
                 {"nbar_a", p.nbar_a},   {"nbar_b", p.nbar_b},   {"nbar_h", p.nbar_h},
                 {"model", to_string(p.model)}};
  j["engine"]["background"] = {{"include", p.include_background}, {"kappa_0a", p.kappa_0a},
                               {"kappa_0b", p.kappa_0b},          {"nbar_0a", p.nbar_0a},
                               {"nbar_0b", p.nbar_0b}};
  j["schedule"] = {{"duty", c.schedule.duty}, {"phase", c.schedule.phase}};
  if (!c.derive_period) j["schedule"]["period"] = c.schedule.period;
  j["dims"] = {{"hf", c.dims.hf}, {"lf", c.dims.lf}};
  j["integration"] = {{"dt", c.integration.dt}, {"t_end", c.integration.t_end},
                      {"sample_every", c.integration.sample_every}};
  j["ensemble"] = {{"n_traj", c.ensemble.n_traj},     {"dt", c.ensemble.dt},
                   {"sample_every", c.classical_sample_every}, {"scheme", to_string(c.ensemble.scheme)},
                   {"chunk", c.ensemble.chunk},       {"workers", c.ensemble.workers}};
  j["checks"] = {{"truncation", c.checks.truncation},
                 {"truncation_extra", c.checks.truncation_extra},
                 {"truncation_horizon", c.checks.truncation_horizon},
                 {"truncation_tol", c.checks.truncation_tol},
                 {"closure_tol", c.checks.closure_tol}};
  return j;
}

ScenarioConfig parse_config_toml(const std::string& text, const std::string& source) {
  toml::table tbl;
  try {
    tbl = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(source, os.str());
  }
  return config_from_json(toml_to_json(tbl, ""));
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_toml(ss.str(), path);
}

std::string config_hash(const ScenarioConfig& c) {
  json j = config_to_json(c);
  // Thread counts do not change results.
  j.erase("workers");
  j["ensemble"].erase("workers");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScenarioConfig with_parameter(const ScenarioConfig& c, const std::string& path, double value) {
  json j = config_to_json(c);
  json* node = &j;
  std::string rest = path;
  std::string field;
  while (true) {
    const auto dot = rest.find('.');
    field = rest.substr(0, dot);
    if (dot == std::string::npos) break;
    if (!node->contains(field) || !(*node)[field].is_object()) throw ConfigError(path, "no such parameter");
    node = &(*node)[field];
    rest = rest.substr(dot + 1);
  }
  const bool period = path == "schedule.period";
  if (!period && (!node->contains(field) || !(*node)[field].is_number())) {
    throw ConfigError(path, "no such numeric parameter");
  }
  if (!period && (*node)[field].is_number_integer()) {
    if (value != std::floor(value)) throw ConfigError(path, "expects an integer");
    (*node)[field] = static_cast<std::int64_t>(value);
  } else {
    (*node)[field] = value;
  }
  return config_from_json(j);
}

}  // namespace otto
