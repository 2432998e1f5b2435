#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otto/config.hpp"
#include "otto/series.hpp"
#include "otto/thermo.hpp"

namespace otto {

const char* code_version();

struct TierResult {
  TimeSeries series;
  std::vector<ThermoSample> thermo;
  std::optional<CycleSummary> cycle;
  /// Why the cycle summary is missing, if it is.
  std::string cycle_error;
  double P_max = 0.0;
  double P_max_se = 0.0;
};

struct TruncationCheck {
  bool ran = false;
  int lf_base = 0;
  int lf_extended = 0;
  double horizon = 0.0;
  double max_relative_drift = 0.0;
  /// LF population above lf - 5 in the final Lindblad state.
  double tail_mass = 0.0;
  bool passed = true;
};

struct ScenarioResult {
  ScenarioConfig config;
  std::map<Tier, TierResult> tiers;
  TruncationCheck truncation;
  /// Tiers that failed outright, with their error messages.
  std::map<Tier, std::string> failures;
};

/// Runs every requested tier in memory. Tier failures are recorded, not thrown.
ScenarioResult simulate(const ScenarioConfig& cfg);

struct RunManifest {
  std::string config_hash;
  std::string code_version;
  std::string started;
  std::string finished;
  nlohmann::json diagnostics;
  std::vector<std::string> outputs;
  std::vector<std::string> failures;
  bool success = true;

  nlohmann::json to_json() const;
};

/// JSON summary: cycle diagnostics per tier, constant-drive and square-wave
/// closed forms, SI conversions.
nlohmann::json summary_json(const ScenarioResult& r);

/// simulate() plus CSV, summary and manifest files under `out_dir`.
RunManifest run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                         ScenarioResult* result = nullptr);

struct SweepPoint {
  double value = 0.0;
  bool ok = false;
  std::string error;
  std::map<Tier, double> P_max;
  double P_max_classical_se = 0.0;
  double g2_final = 0.0;
  double n_a_final = 0.0;
  double n_b_final = 0.0;
};

struct SweepResult {
  std::string parameter;
  std::vector<SweepPoint> points;
  bool all_ok() const;
};

/// One run_scenario per value in `out_dir/point_<i>`, plus `sweep.csv`.
SweepResult run_sweep(const ScenarioConfig& base, const std::string& parameter, const std::vector<double>& values,
                      const std::filesystem::path& out_dir);
std::string sweep_csv(const SweepResult& s);

/// Constant-drive steady state from the null space against the closed forms.
nlohmann::json steady_report(const ScenarioConfig& cfg);

/// Recomputes the cycle summary from the CSV files of a finished run.
nlohmann::json report_run(const std::filesystem::path& run_dir);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Invariant and oracle checks on small truncations.
std::vector<ValidationCheck> run_validation();

}  // namespace otto
