#pragma once

#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace otto {

enum class MasterModel { Local, Global };

std::string to_string(MasterModel m);
MasterModel master_model_from_string(const std::string& s);

/// Physical constants of one engine scenario, in units where omega_a = hbar = k_B = 1.
struct EngineParams {
  double omega_a = 1.0;
  double omega_b = 0.05;
  double g = 0.05;
  double kappa_a = 0.2;
  double kappa_b = 0.005;
  double kappa_h = 0.2;
  double nbar_a = 0.01;
  double nbar_b = 0.01;
  double nbar_h = 0.125;

  // Environment at T_0; only used when include_background is set.
  bool include_background = false;
  double kappa_0a = 0.0;
  double kappa_0b = 0.0;
  double nbar_0a = 0.0;
  double nbar_0b = 0.0;

  MasterModel model = MasterModel::Local;

  /// Reservoir non-locality g/omega_b in the dressed-state model, zero otherwise.
  double alpha() const;
  /// HF dephasing rate 4 kappa_b T_b / omega_b (dressed-state model only).
  double kappa_d() const;
  /// Cold-bath occupancy used by the thermodynamic formulas (n_a = n_b).
  double nbar_c() const { return nbar_a; }

  /// Throws DomainError naming the offending field.
  void validate() const;
};

/// Square-wave hot-bath switch: s(t) = 1 on [phase + k T, phase + k T + duty T).
struct DriveSchedule {
  double period = 2.0 * std::numbers::pi / 0.05;
  double duty = 0.5;
  double phase = 0.0;

  static DriveSchedule for_params(const EngineParams& p);

  bool heating(double t) const;
  double heating_fraction() const { return duty; }
  void validate() const;
};

/// Up/down jump rates seen by each mode (cold + hot + optional background).
struct BathRates {
  double hf_up;     ///< total rate of D[a^dagger]
  double hf_down;   ///< total rate of D[a]
  double lf_up;     ///< total rate of D[b^dagger]-type terms
  double lf_down;   ///< total rate of D[b]-type terms
  double lf_dressed_up;    ///< part of lf_up carried by the displaced operators (global model)
  double lf_dressed_down;  ///< part of lf_down carried by the displaced operators
};

BathRates bath_rates(const EngineParams& p, bool heating);

/// Rate combinations of the closed moment system.
struct DerivedRates {
  double A;               ///< kappa_a nbar_a + kappa_h(t) nbar_h (+ background)
  double B;               ///< kappa_a + kappa_h(t) (+ background)
  double C;               ///< B + kappa_b / 2
  double kappa_b_total;   ///< LF damping including background
  double nbar_b_eff;      ///< LF occupancy the damping relaxes towards
  double omega_sq_corr;   ///< omega_b^2 + C^2
  double omega_sq_q;      ///< omega_b^2 + kappa_b^2 / 4
};

DerivedRates derived_rates(const EngineParams& p, bool heating);

/// 1 / (exp(omega / T) - 1).
double planck_occupancy(double omega, double T);
/// Inverse of planck_occupancy: omega / ln(1 + 1/nbar).
double effective_temperature(double omega, double nbar);

/// Conversion from scaled units to SI, parametrised by omega_a / 2 pi.
struct PhysicalUnits {
  double omega_a_over_2pi_hz = 10e9;

  double energy_joule(double e_scaled) const;
  double time_seconds(double t_scaled) const;
  double power_watt(double p_scaled) const;
  double temperature_kelvin(double T_scaled) const;
  double frequency_hz(double omega_scaled) const;
};

/// One constant-rate stretch of the integration grid between drive edges.
struct Segment {
  double t_start;
  double t_stop;
  std::size_t steps;
  double h;
  bool heating;
};

/// Splits [t0, t_end] at every drive edge. Each segment gets a whole number of
/// equal steps of size <= dt, rounded up to a multiple of `step_multiple` so
/// that sample points land on the edges.
std::vector<Segment> segment_grid(const DriveSchedule& s, double t0, double t_end, double dt,
                                  std::size_t step_multiple = 1);

}  // namespace otto
