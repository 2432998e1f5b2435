#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "otto/params.hpp"
#include "otto/series.hpp"

namespace otto {

/// Quadratures of one classical trajectory; alpha_x = (X_x + i Y_x) / sqrt 2.
struct ClassicalState {
  double X_a = 0.0;
  double Y_a = 0.0;
  double X_b = 0.0;
  double Y_b = 0.0;
  double t = 0.0;

  double n_a() const { return 0.5 * (X_a * X_a + Y_a * Y_a); }
  double n_b() const { return 0.5 * (X_b * X_b + Y_b * Y_b); }
  bool finite() const;
};

enum class LangevinScheme {
  /// Drift and noise exactly as printed, first order in dt.
  EulerMaruyama,
  /// Linear part (rotation and damping) integrated exactly over the step, with
  /// the coupling frozen at the start of the step.
  Exponential,
};

std::string to_string(LangevinScheme s);
LangevinScheme langevin_scheme_from_string(const std::string& s);

/// Standard-normal draws (a_x, a_y, b_x, b_y, h_x, h_y); the h pair is ignored while cooling.
using NoiseDraws = std::array<double, 6>;

ClassicalState langevin_step(const ClassicalState& s, const EngineParams& p, bool heating, double dt,
                             const NoiseDraws& noise, LangevinScheme scheme = LangevinScheme::Exponential);

inline constexpr const char* kRngAlgorithm = "mt19937_64+seed_seq(seed,index)/boost-ziggurat-normal";

struct EnsembleSpec {
  std::size_t n_traj = 10000;
  std::uint64_t seed = 20170721;
  double dt = 0.01;
  LangevinScheme scheme = LangevinScheme::Exponential;
  /// Trajectories per reduction chunk; fixed so results do not depend on threading.
  std::size_t chunk = 125;
  /// Worker threads; 0 uses the hardware concurrency.
  unsigned workers = 0;
};

struct EnsembleOptions {
  double t_end = 5000.0;
  std::size_t sample_every = 50;
};

/// Ensemble statistics of the classical model: means in `samples`, standard
/// errors in `errors`, <|alpha_b|^4> / <|alpha_b|^2>^2 in `g2`. Initial
/// quadratures are N(0, nbar_c) per component.
TimeSeries run_ensemble(const EngineParams& p, const DriveSchedule& schedule, const EnsembleSpec& spec,
                        const EnsembleOptions& opts);

/// One trajectory sampled on the ensemble grid; used for inspection and tests.
std::vector<ClassicalState> run_trajectory(const EngineParams& p, const DriveSchedule& schedule,
                                           const EnsembleSpec& spec, const EnsembleOptions& opts,
                                           std::size_t index);

/// -(<n_a p> - <n_a><p>) per sample of a classical ensemble series; throws
/// StatisticsError below 100 trajectories.
std::vector<double> classical_correlation(const TimeSeries& series);

}  // namespace otto
