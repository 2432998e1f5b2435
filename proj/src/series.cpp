#include "otto/series.hpp"

#include <cmath>

#include "otto/error.hpp"

namespace otto {

const char* const kMomentNames[kMomentCount] = {"n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b"};

std::string to_string(Tier t) {
  switch (t) {
    case Tier::QuantumLindblad:
      return "quantum-lindblad";
    case Tier::QuantumMoments:
      return "quantum-moments";
    case Tier::Semiclassical:
      return "semiclassical";
    case Tier::Classical:
      return "classical";
  }
  return "unknown";
}

Tier tier_from_string(const std::string& s) {
  if (s == "quantum-lindblad") return Tier::QuantumLindblad;
  if (s == "quantum-moments") return Tier::QuantumMoments;
  if (s == "semiclassical") return Tier::Semiclassical;
  if (s == "classical") return Tier::Classical;
  throw DomainError("unknown tier '" + s + "'");
}

Eigen::Matrix<double, 7, 1> MomentVector::values() const {
  Eigen::Matrix<double, 7, 1> v;
  v << n_a, q, p, var_na, c_nq, c_np, n_b;
  return v;
}

MomentVector MomentVector::from_values(double t, const Eigen::Matrix<double, 7, 1>& v) {
  return MomentVector{t, v(0), v(1), v(2), v(3), v(4), v(5), v(6)};
}

bool MomentVector::finite() const { return std::isfinite(t) && values().allFinite(); }

std::vector<double> TimeSeries::times() const {
  std::vector<double> t;
  t.reserve(samples.size());
  for (const auto& s : samples) t.push_back(s.t);
  return t;
}

}  // namespace otto
