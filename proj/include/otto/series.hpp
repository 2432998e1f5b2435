#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "otto/fock.hpp"

namespace otto {

enum class Tier { QuantumLindblad, QuantumMoments, Semiclassical, Classical };

std::string to_string(Tier t);
Tier tier_from_string(const std::string& s);
/// Quantum tiers keep the n_a-q / n_a-p correlations.
inline bool is_quantum(Tier t) { return t == Tier::QuantumLindblad || t == Tier::QuantumMoments; }

/// The eight observables of the closed moment system (time included).
struct MomentVector {
  double t = 0.0;
  double n_a = 0.0;
  double q = 0.0;
  double p = 0.0;
  double var_na = 0.0;
  double c_nq = 0.0;  ///< <n_a q> - <n_a><q>
  double c_np = 0.0;  ///< <n_a p> - <n_a><p>
  double n_b = 0.0;

  Eigen::Matrix<double, 7, 1> values() const;
  static MomentVector from_values(double t, const Eigen::Matrix<double, 7, 1>& v);
  bool finite() const;
};

inline constexpr int kMomentCount = 7;
extern const char* const kMomentNames[kMomentCount];

/// Monte Carlo standard errors of the classical ensemble statistics.
struct EnsembleErrors {
  double n_a = 0.0;
  double q = 0.0;
  double p = 0.0;
  double var_na = 0.0;
  double c_nq = 0.0;
  double c_np = 0.0;
  double n_b = 0.0;
};

/// Sampled observables of one model tier.
struct TimeSeries {
  Tier tier = Tier::QuantumMoments;
  std::vector<MomentVector> samples;

  /// g2(0) of the LF mode per sample; empty when the tier cannot provide it.
  std::vector<double> g2;
  /// <b^dagger b^dagger b b> per sample (Lindblad tier).
  std::vector<double> bbbb;
  /// Reduced LF populations P(n) per sample when requested.
  std::vector<Eigen::VectorXd> lf_populations;
  /// Expectation values of caller-supplied operators, one row per sample.
  std::vector<std::vector<cplx>> observables;
  /// Standard errors per sample (classical tier only).
  std::vector<EnsembleErrors> errors;
  /// Ensemble size behind `samples` (classical tier only).
  std::size_t n_traj = 0;
  /// Final density matrix (Lindblad tier only).
  std::optional<DensityMatrix> final_state;

  std::size_t size() const { return samples.size(); }
  std::vector<double> times() const;
};

}  // namespace otto
