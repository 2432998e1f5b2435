#pragma once

#include <complex>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>

#include "otto/error.hpp"

namespace otto {

using cplx = std::complex<double>;

/// Truncation of the two-mode Fock space. Composite index is hf * lf_dim + lf.
struct ModeDim {
  int hf = 6;
  int lf = 50;

  int composite() const { return hf * lf; }
  void validate() const {
    if (hf < 2 || lf < 2) throw InvalidDimension("mode truncation must be >= 2 per mode");
  }
};

enum class Mode { HF, LF };

template <typename Scalar = cplx>
using SparseOperator = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;

using Operator = SparseOperator<cplx>;

template <typename Scalar = cplx>
SparseOperator<Scalar> destroy(int dim) {
  if (dim < 2) throw InvalidDimension("destroy: dim must be >= 2");
  SparseOperator<Scalar> a(dim, dim);
  a.reserve(Eigen::VectorXi::Constant(dim, 1));
  for (int n = 1; n < dim; ++n) a.insert(n - 1, n) = Scalar(std::sqrt(static_cast<double>(n)));
  a.makeCompressed();
  return a;
}

template <typename Scalar = cplx>
SparseOperator<Scalar> create(int dim) {
  return SparseOperator<Scalar>(destroy<Scalar>(dim).adjoint());
}

template <typename Scalar = cplx>
SparseOperator<Scalar> number(int dim) {
  if (dim < 2) throw InvalidDimension("number: dim must be >= 2");
  SparseOperator<Scalar> n(dim, dim);
  n.reserve(Eigen::VectorXi::Constant(dim, 1));
  for (int k = 1; k < dim; ++k) n.insert(k, k) = Scalar(static_cast<double>(k));
  n.makeCompressed();
  return n;
}

template <typename Scalar = cplx>
SparseOperator<Scalar> identity(int dim) {
  SparseOperator<Scalar> id(dim, dim);
  id.setIdentity();
  return id;
}

/// Kronecker product, HF factor first.
template <typename Scalar>
SparseOperator<Scalar> tensor(const SparseOperator<Scalar>& hf, const SparseOperator<Scalar>& lf) {
  SparseOperator<Scalar> out = Eigen::kroneckerProduct(hf, lf).eval();
  out.makeCompressed();
  return out;
}

/// [a, a^dagger] - 1 on the truncated space; equals -dim |top><top|.
template <typename Scalar = cplx>
SparseOperator<Scalar> commutator_defect(int dim) {
  const auto a = destroy<Scalar>(dim);
  const auto ad = create<Scalar>(dim);
  SparseOperator<Scalar> c = a * ad - ad * a;
  c -= identity<Scalar>(dim);
  c.prune(Scalar(0));
  return c;
}

/// Canonical composite-space operators; p = i (b^dagger - b).
struct ModeOperators {
  ModeDim dims;
  Operator a, ad, b, bd, n_a, n_b, q, p, id;
};

ModeOperators mode_operators(ModeDim dims);

/// n_a on the composite space built directly from index arithmetic.
Operator hf_number_by_index(ModeDim dims);

struct InvariantReport {
  double hermiticity_defect = 0.0;  ///< max |rho - rho^dagger|
  double trace_defect = 0.0;        ///< |Tr rho - 1|
  double min_eigenvalue = 0.0;      ///< only filled when positivity was checked
  bool positivity_checked = false;
  bool finite = true;

  bool ok() const;
  std::string describe() const;
};

inline constexpr double kHermiticityTol = 1e-10;
inline constexpr double kTraceTol = 1e-8;
inline constexpr double kPositivityTol = 1e-8;

/// Dense density matrix on one mode or on the composite HF x LF space.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(Eigen::MatrixXcd m, bool validate = true);
  DensityMatrix(Eigen::MatrixXcd m, ModeDim dims, bool validate = true);

  const Eigen::MatrixXcd& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  const std::optional<ModeDim>& dims() const { return dims_; }

  InvariantReport check(bool positivity = false) const;
  /// Throws InvariantError when check() fails.
  void validate(bool positivity = false) const;

 private:
  Eigen::MatrixXcd m_;
  std::optional<ModeDim> dims_;
};

DensityMatrix thermal_density(int dim, double nbar);
DensityMatrix coherent_density(int dim, cplx beta);
DensityMatrix fock_density(int dim, int n);
/// rho_a (x) rho_b with HF first.
DensityMatrix product_state(const DensityMatrix& hf, const DensityMatrix& lf);

/// Tr(rho op).
cplx expectation(const Operator& op, const DensityMatrix& rho);
cplx expectation(const Operator& op, const Eigen::MatrixXcd& rho);

DensityMatrix partial_trace(const DensityMatrix& rho, ModeDim dims, Mode keep);

}  // namespace otto
