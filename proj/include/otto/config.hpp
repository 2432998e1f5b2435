#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "otto/fock.hpp"
#include "otto/langevin.hpp"
#include "otto/params.hpp"
#include "otto/series.hpp"

namespace otto {

struct IntegrationConfig {
  double dt = 0.02;
  double t_end = 5000.0;
  std::size_t sample_every = 25;
};

struct ChecksConfig {
  /// Rerun the Lindblad tier with lf + truncation_extra levels on a short horizon.
  bool truncation = true;
  int truncation_extra = 10;
  double truncation_horizon = 250.0;
  double truncation_tol = 0.005;
  double closure_tol = 1e-3;
};

struct ScenarioConfig {
  EngineParams engine{};
  DriveSchedule schedule{};
  /// When set the drive period follows 2 pi / omega_b.
  bool derive_period = true;
  ModeDim dims{};
  IntegrationConfig integration{};
  EnsembleSpec ensemble{};
  std::size_t classical_sample_every = 50;
  std::vector<Tier> tiers{Tier::QuantumLindblad, Tier::QuantumMoments, Tier::Semiclassical, Tier::Classical};
  std::vector<std::string> outputs{"timeseries", "summary"};
  ChecksConfig checks{};
  /// Sweep points evaluated concurrently.
  unsigned workers = 1;

  /// Throws ConfigError with the dotted path of the first invalid field.
  void validate() const;
  bool wants(Tier t) const;
  bool wants_output(const std::string& name) const;
};

/// Commented TOML carrying every default.
std::string default_config_toml();

ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& c);
ScenarioConfig parse_config_toml(const std::string& text, const std::string& source = "<string>");
ScenarioConfig load_config(const std::string& path);

/// FNV-1a 64 of the canonical (sorted-key) JSON form, as 16 hex digits.
std::string config_hash(const ScenarioConfig& c);

/// Replaces the numeric field at a dotted path such as `engine.nbar_h`.
ScenarioConfig with_parameter(const ScenarioConfig& c, const std::string& path, double value);

}  // namespace otto
