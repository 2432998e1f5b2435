#include "otto/fock.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace otto {

ModeOperators mode_operators(ModeDim dims) {
  dims.validate();
  ModeOperators ops;
  ops.dims = dims;
  const Operator id_a = identity(dims.hf);
  const Operator id_b = identity(dims.lf);
  ops.a = tensor(destroy(dims.hf), id_b);
  ops.ad = tensor(create(dims.hf), id_b);
  ops.b = tensor(id_a, destroy(dims.lf));
  ops.bd = tensor(id_a, create(dims.lf));
  ops.n_a = tensor(number(dims.hf), id_b);
  ops.n_b = tensor(id_a, number(dims.lf));
  ops.q = ops.b + ops.bd;
  ops.p = cplx(0.0, 1.0) * (ops.bd - ops.b);
  ops.id = identity(dims.composite());
  for (Operator* o : {&ops.a, &ops.ad, &ops.b, &ops.bd, &ops.n_a, &ops.n_b, &ops.q, &ops.p}) {
    o->prune(cplx(0.0));
    o->makeCompressed();
  }
  return ops;
}

Operator hf_number_by_index(ModeDim dims) {
  dims.validate();
  const int n = dims.composite();
  Operator op(n, n);
  op.reserve(Eigen::VectorXi::Constant(n, 1));
  for (int i = 0; i < n; ++i) {
    const int m = i / dims.lf;
    if (m != 0) op.insert(i, i) = cplx(static_cast<double>(m));
  }
  op.makeCompressed();
  return op;
}

bool InvariantReport::ok() const {
  if (!finite) return false;
  if (hermiticity_defect > kHermiticityTol) return false;
  if (trace_defect > kTraceTol) return false;
  if (positivity_checked && min_eigenvalue < -kPositivityTol) return false;
  return true;
}

std::string InvariantReport::describe() const {
  std::ostringstream os;
  os << "hermiticity defect " << hermiticity_defect << ", trace defect " << trace_defect;
  if (positivity_checked) os << ", min eigenvalue " << min_eigenvalue;
  if (!finite) os << ", non-finite entries";
  return os.str();
}

DensityMatrix::DensityMatrix(Eigen::MatrixXcd m, bool validate) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw ShapeError("density matrix must be square");
  if (validate) this->validate();
}

DensityMatrix::DensityMatrix(Eigen::MatrixXcd m, ModeDim dims, bool validate)
    : m_(std::move(m)), dims_(dims) {
  dims.validate();
  if (m_.rows() != m_.cols()) throw ShapeError("density matrix must be square");
  if (m_.rows() != dims.composite()) throw ShapeError("density matrix size does not match ModeDim");
  if (validate) this->validate();
}

InvariantReport DensityMatrix::check(bool positivity) const {
  InvariantReport r;
  r.finite = m_.allFinite();
  r.hermiticity_defect = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  r.trace_defect = std::abs(m_.trace() - cplx(1.0));
  if (positivity && r.finite) {
    const Eigen::MatrixXcd h = 0.5 * (m_ + m_.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    r.positivity_checked = true;
  }
  return r;
}

void DensityMatrix::validate(bool positivity) const {
  const InvariantReport r = check(positivity);
  if (!r.ok()) throw InvariantError("density matrix invariant violated: " + r.describe());
}

DensityMatrix thermal_density(int dim, double nbar) {
  if (dim < 2) throw InvalidDimension("thermal_density: dim must be >= 2");
  if (!(nbar >= 0.0) || !std::isfinite(nbar)) throw DomainError("thermal_density: nbar must be >= 0");
  Eigen::VectorXd w(dim);
  const double x = nbar / (1.0 + nbar);
  double pw = 1.0;
  for (int n = 0; n < dim; ++n) {
    w(n) = pw;
    pw *= x;
  }
  w /= w.sum();
  return DensityMatrix(w.cast<cplx>().asDiagonal().toDenseMatrix());
}

DensityMatrix coherent_density(int dim, cplx beta) {
  if (dim < 2) throw InvalidDimension("coherent_density: dim must be >= 2");
  Eigen::VectorXcd psi(dim);
  psi(0) = 1.0;
  for (int n = 1; n < dim; ++n) psi(n) = psi(n - 1) * beta / std::sqrt(static_cast<double>(n));
  psi /= psi.norm();
  return DensityMatrix(psi * psi.adjoint());
}

DensityMatrix fock_density(int dim, int n) {
  if (dim < 2) throw InvalidDimension("fock_density: dim must be >= 2");
  if (n < 0 || n >= dim) throw DomainError("fock_density: level outside the truncation");
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  m(n, n) = 1.0;
  return DensityMatrix(std::move(m));
}

DensityMatrix product_state(const DensityMatrix& hf, const DensityMatrix& lf) {
  Eigen::MatrixXcd m = Eigen::kroneckerProduct(hf.matrix(), lf.matrix()).eval();
  return DensityMatrix(std::move(m),
                       ModeDim{static_cast<int>(hf.dim()), static_cast<int>(lf.dim())});
}

cplx expectation(const Operator& op, const Eigen::MatrixXcd& rho) {
  if (op.rows() != rho.rows() || op.cols() != rho.cols()) {
    throw ShapeError("expectation: operator and density matrix dimensions differ");
  }
  // Tr(rho op) = sum_{k,j} rho(j,k) op(k,j)
  cplx acc = 0.0;
  for (int j = 0; j < op.outerSize(); ++j) {
    for (Operator::InnerIterator it(op, j); it; ++it) acc += rho(j, it.row()) * it.value();
  }
  return acc;
}

cplx expectation(const Operator& op, const DensityMatrix& rho) { return expectation(op, rho.matrix()); }

DensityMatrix partial_trace(const DensityMatrix& rho, ModeDim dims, Mode keep) {
  dims.validate();
  if (rho.dim() != dims.composite()) throw ShapeError("partial_trace: dims inconsistent with matrix size");
  const Eigen::MatrixXcd& m = rho.matrix();
  const int da = dims.hf;
  const int db = dims.lf;
  if (keep == Mode::LF) {
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(db, db);
    for (int k = 0; k < da; ++k) r += m.block(k * db, k * db, db, db);
    return DensityMatrix(std::move(r), false);
  }
  Eigen::MatrixXcd r(da, da);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j) r(i, j) = m.block(i * db, j * db, db, db).trace();
  return DensityMatrix(std::move(r), false);
}

}  // namespace otto
