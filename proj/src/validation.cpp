#include <cmath>
#include <random>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "otto/langevin.hpp"
#include "otto/master_equation.hpp"
#include "otto/moments.hpp"
#include "otto/run.hpp"

namespace otto {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

// Column-stacked superoperator: vec(A X B) = (B^T (x) A) vec(X).
Eigen::MatrixXcd dense_generator(const EngineParams& p, ModeDim dims, bool heating) {
  const Eigen::MatrixXcd H(build_hamiltonian(p, dims));
  const auto n = H.rows();
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  const cplx i1(0.0, 1.0);
  Eigen::MatrixXcd G = -i1 * (Eigen::kroneckerProduct(I, H) - Eigen::kroneckerProduct(H.transpose(), I)).eval();
  for (const Dissipator& d : build_dissipators(p, dims, heating)) {
    const Eigen::MatrixXcd L(d.op);
    const Eigen::MatrixXcd LdL = L.adjoint() * L;
    G += d.rate * (Eigen::kroneckerProduct(L.conjugate(), L) - 0.5 * Eigen::kroneckerProduct(I, LdL) -
                   0.5 * Eigen::kroneckerProduct(LdL.transpose(), I))
                      .eval();
  }
  return G;
}

DensityMatrix random_sector_state(ModeDim dims, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  const int n = dims.composite();
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
  for (int m = 0; m < dims.hf; ++m) {
    Eigen::MatrixXcd A(dims.lf, dims.lf);
    for (int i = 0; i < dims.lf; ++i)
      for (int j = 0; j < dims.lf; ++j) A(i, j) = cplx(z(rng), z(rng));
    rho.block(m * dims.lf, m * dims.lf, dims.lf, dims.lf) = A * A.adjoint();
  }
  rho /= rho.trace().real();
  return DensityMatrix(rho, dims);
}

ValidationCheck check(std::string name, double value, double tol) {
  return ValidationCheck{std::move(name), value <= tol, "max deviation " + fmt(value) + " (tolerance " + fmt(tol) + ")"};
}

double max_relative(const TimeSeries& a, const TimeSeries& b) {
  double worst = 0.0;
  for (int k = 0; k < kMomentCount; ++k) {
    double scale = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
      scale = std::max(scale, std::abs(a.samples[i].values()(k)));
      diff = std::max(diff, std::abs(a.samples[i].values()(k) - b.samples[i].values()(k)));
    }
    if (scale > 0.0) worst = std::max(worst, diff / scale);
  }
  return worst;
}

}  // namespace

std::vector<ValidationCheck> run_validation() {
  std::vector<ValidationCheck> out;
  auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back(ValidationCheck{name, false, std::string("threw: ") + e.what()});
    }
  };

  guarded("commutator-defect", [] {
    const Eigen::MatrixXd c(commutator_defect<double>(5));
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(5, 5);
    expect(4, 4) = -5.0;
    return check("commutator-defect", (c - expect).cwiseAbs().maxCoeff(), 1e-14);
  });

  guarded("thermal-mean", [] {
    const DensityMatrix rho = thermal_density(60, 1.0);
    const double n = expectation(number(60), rho).real();
    return check("thermal-mean", std::abs(n - 1.0), 1e-12);
  });

  guarded("sector-vs-full-generator", [] {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (MasterModel model : {MasterModel::Local, MasterModel::Global}) {
      EngineParams p;
      p.model = model;
      p.nbar_b = 0.3;
      p.nbar_a = 0.2;
      const ModeDim dims{3, 6};
      const DensityMatrix rho = random_sector_state(dims, rng);
      const Liouvillian full(p, dims);
      const SectorLiouvillian sector(p, dims);
      for (bool heating : {true, false}) {
        const Eigen::MatrixXcd a = full.apply(rho.matrix(), heating);
        const Eigen::MatrixXcd b =
            from_sector_blocks(sector.apply(to_sector_blocks(rho), heating), dims, false).matrix();
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
      }
    }
    return check("sector-vs-full-generator", worst, 1e-13);
  });

  guarded("matrix-exponential-oracle", [] {
    EngineParams p;
    const ModeDim dims{3, 4};
    const DriveSchedule s = DriveSchedule::for_params(p);
    const DensityMatrix rho0 = initial_thermal_state(p, dims);
    PropagationOptions po;
    po.t_end = 0.5 * s.period;
    const TimeSeries ts = propagate(rho0, p, s, po);
    const Eigen::MatrixXcd G = dense_generator(p, dims, true);
    const Eigen::MatrixXcd U = (G * po.t_end).exp();
    Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho0.matrix().data(), rho0.matrix().size());
    v = U * v;
    const Eigen::MatrixXcd exact = Eigen::Map<Eigen::MatrixXcd>(v.data(), rho0.dim(), rho0.dim());
    return check("matrix-exponential-oracle", (ts.final_state->matrix() - exact).cwiseAbs().maxCoeff(), 1e-8);
  });

  guarded("constant-drive-closed-form", [] {
    EngineParams p;
    const MomentVector num = moments_of(steady_state_nullspace(p, ModeDim{6, 30}));
    const MomentVector ana = steady_state_analytic(p);
    double worst = 0.0;
    for (int k = 0; k < kMomentCount; ++k) {
      worst = std::max(worst, std::abs(num.values()(k) - ana.values()(k)) / std::abs(ana.values()(k)));
    }
    return check("constant-drive-closed-form", worst, 1e-3);
  });

  guarded("moment-closure", [] {
    EngineParams p;
    const ModeDim dims{6, 30};
    const DriveSchedule s = DriveSchedule::for_params(p);
    PropagationOptions po;
    po.t_end = 2.0 * s.period;
    const TimeSeries lind = propagate(initial_thermal_state(p, dims), p, s, po);
    const TimeSeries mom =
        integrate_moments(initial_moments(p), p, s, Tier::QuantumMoments, MomentOptions{po.t_end, po.dt, po.sample_every});
    return check("moment-closure", max_relative(lind, mom), 5e-3);
  });

  guarded("classical-first-moments", [] {
    EngineParams p;
    const DriveSchedule s = DriveSchedule::for_params(p);
    EnsembleSpec spec;
    spec.n_traj = 2000;
    const TimeSeries cl = run_ensemble(p, s, spec, EnsembleOptions{60.0, 50});
    const TimeSeries mom =
        integrate_moments(initial_moments(p), p, s, Tier::QuantumMoments, MomentOptions{60.0, 0.02, 25});
    double worst = 0.0;
    for (std::size_t i = 0; i < cl.size() && i < mom.size(); ++i) {
      worst = std::max(worst, std::abs(cl.samples[i].n_a - mom.samples[i].n_a) / cl.errors[i].n_a);
    }
    return check("classical-first-moments (z-score of n_a)", worst, 4.5);
  });
  return out;
}

}  // namespace otto
