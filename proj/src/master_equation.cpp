#include "otto/master_equation.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "otto/error.hpp"

namespace otto {

namespace {

constexpr cplx kI(0.0, 1.0);

Operator dressed(const Operator& base, const Operator& n_a, double alpha) {
  Operator out = base - cplx(alpha) * n_a;
  out.prune(cplx(0.0));
  out.makeCompressed();
  return out;
}

Eigen::VectorXd sqrt_levels(int n) {
  Eigen::VectorXd s(n + 1);
  for (int k = 0; k <= n; ++k) s(k) = std::sqrt(static_cast<double>(k));
  return s;
}

}  // namespace

Operator build_hamiltonian(const EngineParams& p, ModeDim dims) {
  p.validate();
  const ModeOperators ops = mode_operators(dims);
  Operator h = cplx(p.omega_a) * ops.n_a + cplx(p.omega_b) * ops.n_b;
  h -= cplx(p.g) * Operator(ops.n_a * ops.q);
  h.prune(cplx(0.0));
  h.makeCompressed();
  return h;
}

std::vector<Dissipator> build_dissipators(const EngineParams& p, ModeDim dims, bool heating) {
  p.validate();
  const ModeOperators ops = mode_operators(dims);
  const BathRates r = bath_rates(p, heating);
  std::vector<Dissipator> out;
  out.push_back({r.hf_down, ops.a});
  out.push_back({r.hf_up, ops.ad});
  if (p.model == MasterModel::Local) {
    out.push_back({r.lf_down, ops.b});
    out.push_back({r.lf_up, ops.bd});
  } else {
    const double alpha = p.alpha();
    out.push_back({alpha * alpha * p.kappa_d(), ops.n_a});
    out.push_back({r.lf_dressed_down, dressed(ops.b, ops.n_a, alpha)});
    out.push_back({r.lf_dressed_up, dressed(ops.bd, ops.n_a, alpha)});
    const double bg_down = r.lf_down - r.lf_dressed_down;
    const double bg_up = r.lf_up - r.lf_dressed_up;
    if (bg_down > 0.0) out.push_back({bg_down, ops.b});
    if (bg_up > 0.0) out.push_back({bg_up, ops.bd});
  }
  std::erase_if(out, [](const Dissipator& d) { return d.rate == 0.0; });
  return out;
}

Liouvillian::Liouvillian(const EngineParams& p, ModeDim dims) : dims_(dims), h_(build_hamiltonian(p, dims)) {
  for (bool heating : {true, false}) {
    Channels& c = heating ? on_ : off_;
    c.jumps = build_dissipators(p, dims, heating);
    Operator k(dims.composite(), dims.composite());
    for (const auto& d : c.jumps) k += cplx(d.rate) * Operator(d.op.adjoint() * d.op);
    c.h_eff = h_ - cplx(0.0, 0.5) * k;
    c.h_eff.makeCompressed();
    c.h_eff_adj = c.h_eff.adjoint();
    for (const auto& d : c.jumps) c.jump_adj.emplace_back(d.op.adjoint());
  }
}

void Liouvillian::apply(const Eigen::MatrixXcd& rho, bool heating, Eigen::MatrixXcd& out) const {
  if (rho.rows() != dims_.composite() || rho.cols() != dims_.composite()) {
    throw ShapeError("Liouvillian::apply: state has the wrong size");
  }
  const Channels& c = heating ? on_ : off_;
  out.noalias() = -kI * (c.h_eff * rho);
  out.noalias() += kI * (rho * c.h_eff_adj);
  Eigen::MatrixXcd t(rho.rows(), rho.cols());
  for (std::size_t k = 0; k < c.jumps.size(); ++k) {
    t.noalias() = c.jumps[k].op * rho;
    out.noalias() += c.jumps[k].rate * (t * c.jump_adj[k]);
  }
}

Eigen::MatrixXcd Liouvillian::apply(const Eigen::MatrixXcd& rho, bool heating) const {
  Eigen::MatrixXcd out(rho.rows(), rho.cols());
  apply(rho, heating, out);
  return out;
}

Eigen::MatrixXcd apply_liouvillian(const DensityMatrix& rho, const EngineParams& p,
                                   const DriveSchedule& schedule, double t) {
  if (!rho.dims()) throw ShapeError("apply_liouvillian: density matrix carries no ModeDim");
  const Liouvillian l(p, *rho.dims());
  return l.apply(rho.matrix(), schedule.heating(t));
}

// ---------------------------------------------------------------------------
// HF-number sectors

SectorLiouvillian::SectorLiouvillian(const EngineParams& p, ModeDim dims) : dims_(dims), params_(p) {
  p.validate();
  dims.validate();
  const int n = dims.lf;
  const int P = n + 2;
  const BathRates r = bath_rates(p, false);
  const Eigen::VectorXd s = sqrt_levels(n);
  auto raise_diag = [n](int i) { return i + 1 < n ? static_cast<double>(i + 1) : 0.0; };

  // Row-separable parts of the per-element coefficients, in padded index.
  diag_half_ = Eigen::VectorXd::Zero(P);
  diag_freq_ = Eigen::VectorXd::Zero(P);
  s_ = Eigen::VectorXd::Zero(P + 1);
  for (int i = 0; i < n; ++i) {
    diag_half_(i + 1) = -0.5 * r.lf_down * i - 0.5 * r.lf_up * raise_diag(i);
    diag_freq_(i + 1) = -p.omega_b * i;
  }
  for (int I = 1; I <= n + 1; ++I) s_(I) = s(I - 1);
  lf_down_ = r.lf_down;
  lf_up_ = r.lf_up;

  hf_raise_diag_.resize(dims.hf);
  for (int m = 0; m < dims.hf; ++m) hf_raise_diag_(m) = m + 1 < dims.hf ? m + 1.0 : 0.0;
}

SectorLiouvillian::Planar SectorLiouvillian::pack(const Eigen::MatrixXcd& blocks) const {
  const int n = dims_.lf;
  const int P = n + 2;
  if (blocks.rows() != n || blocks.cols() != n * dims_.hf) {
    throw ShapeError("SectorLiouvillian: blocks have the wrong shape");
  }
  Planar x{Eigen::ArrayXXd::Zero(P, P * (dims_.hf + 2)), Eigen::ArrayXXd::Zero(P, P * (dims_.hf + 2))};
  for (int m = 0; m < dims_.hf; ++m) {
    x.re.block(1, (m + 1) * P + 1, n, n) = blocks.middleCols(m * n, n).real();
    x.im.block(1, (m + 1) * P + 1, n, n) = blocks.middleCols(m * n, n).imag();
  }
  return x;
}

Eigen::MatrixXcd SectorLiouvillian::unpack(const Planar& x) const {
  const int n = dims_.lf;
  const int P = n + 2;
  Eigen::MatrixXcd out(n, n * dims_.hf);
  for (int m = 0; m < dims_.hf; ++m) {
    out.middleCols(m * n, n).real() = x.re.block(1, (m + 1) * P + 1, n, n).matrix();
    out.middleCols(m * n, n).imag() = x.im.block(1, (m + 1) * P + 1, n, n).matrix();
  }
  return out;
}

void SectorLiouvillian::apply(const Planar& x, bool heating, Planar& out) const {
  const int n = dims_.lf;
  const int P = n + 2;
  const int da = dims_.hf;
  if (x.re.rows() != P || x.re.cols() != P * (da + 2)) throw ShapeError("SectorLiouvillian: bad planar state");
  if (out.re.rows() != P || out.re.cols() != x.re.cols()) {
    out.re = Eigen::ArrayXXd::Zero(P, x.re.cols());
    out.im = Eigen::ArrayXXd::Zero(P, x.re.cols());
  }
  const BathRates r = bath_rates(params_, heating);
  const double kappa_dressed = r.lf_dressed_down - r.lf_dressed_up;
  const double* xr = x.re.data();
  const double* xi = x.im.data();
  const double* s = s_.data();
  for (int m = 0; m < da; ++m) {
    const double sigma = -r.hf_down * m - r.hf_up * hf_raise_diag_(m);
    const double a_dn = m + 1 < da ? r.hf_down * (m + 1) : 0.0;
    const double a_up = r.hf_up * m;
    const double w = params_.g * m;                            // Im of the hopping prefactor
    const double v = 0.5 * params_.alpha() * m * kappa_dressed;  // Re of the hopping prefactor
    for (int J = 1; J <= n; ++J) {
      const std::ptrdiff_t c = static_cast<std::ptrdiff_t>((m + 1) * P + J) * P;
      const double* R0r = xr + c;
      const double* R0i = xi + c;
      const double* RLr = R0r - P;
      const double* RLi = R0i - P;
      const double* RRr = R0r + P;
      const double* RRi = R0i + P;
      const double* RNr = R0r + P * P;
      const double* RNi = R0i + P * P;
      const double* RPr = R0r - P * P;
      const double* RPi = R0i - P * P;
      double* Dr = out.re.data() + c;
      double* Di = out.im.data() + c;
      const double* dh = diag_half_.data();
      const double* df = diag_freq_.data();
      const double kr_col = diag_half_(J) + sigma;
      const double ki_col = -diag_freq_(J);
      const double ld = lf_down_ * s[J + 1];
      const double lu = lf_up_ * s[J];
      // Column hopping prefactors (v - i w) s_J on R(i, J-1) and (-v - i w) s_{J+1} on R(i, J+1).
      const double clr = v * s[J], cli = -w * s[J];
      const double crr = -v * s[J + 1], cri = -w * s[J + 1];
#pragma GCC ivdep
      for (int I = 1; I <= n; ++I) {
        const double kr = dh[I] + kr_col;
        const double ki = df[I] + ki_col;
        double re = kr * R0r[I] - ki * R0i[I];
        double im = kr * R0i[I] + ki * R0r[I];
        const double sd = s[I];
        const double su = s[I + 1];
        const double jd = ld * su;
        const double ju = lu * sd;
        re += a_dn * RNr[I] + a_up * RPr[I] + jd * RRr[I + 1] + ju * RLr[I - 1];
        im += a_dn * RNi[I] + a_up * RPi[I] + jd * RRi[I + 1] + ju * RLi[I - 1];
        // Row hopping: (v + i w) s_I on R(I-1, J) and (-v + i w) s_{I+1} on R(I+1, J).
        re += sd * (v * R0r[I - 1] - w * R0i[I - 1]) + su * (-v * R0r[I + 1] - w * R0i[I + 1]);
        im += sd * (v * R0i[I - 1] + w * R0r[I - 1]) + su * (-v * R0i[I + 1] + w * R0r[I + 1]);
        re += clr * RLr[I] - cli * RLi[I] + crr * RRr[I] - cri * RRi[I];
        im += clr * RLi[I] + cli * RLr[I] + crr * RRi[I] + cri * RRr[I];
        Dr[I] = re;
        Di[I] = im;
      }
    }
  }
}

void SectorLiouvillian::apply(const Eigen::MatrixXcd& blocks, bool heating, Eigen::MatrixXcd& out) const {
  Planar y;
  apply(pack(blocks), heating, y);
  out = unpack(y);
}

Eigen::MatrixXcd SectorLiouvillian::apply(const Eigen::MatrixXcd& blocks, bool heating) const {
  Eigen::MatrixXcd out;
  apply(blocks, heating, out);
  return out;
}

namespace {

std::vector<Eigen::Triplet<cplx>> sector_triplets(const EngineParams& p, ModeDim dims, bool heating,
                                                  bool replace_first_row) {
  const int n = dims.lf;
  const int da = dims.hf;
  const BathRates r = bath_rates(p, heating);
  const Eigen::VectorXd s = sqrt_levels(n);
  const double kappa_dressed = r.lf_dressed_down - r.lf_dressed_up;
  auto idx = [n](int m, int i, int j) { return i + n * (m * n + j); };
  auto raise_diag = [n](int i) { return i + 1 < n ? static_cast<double>(i + 1) : 0.0; };

  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<std::size_t>(da) * n * n * 11);
  for (int m = 0; m < da; ++m) {
    const cplx u = kI * (p.g * m);
    const cplx v = 0.5 * p.alpha() * m * kappa_dressed;
    const double hf_raise = m + 1 < da ? m + 1.0 : 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int row = idx(m, i, j);
        if (replace_first_row && row == 0) continue;
        const cplx diag(-0.5 * r.lf_down * (i + j) - 0.5 * r.lf_up * (raise_diag(i) + raise_diag(j)) -
                            r.hf_down * m - r.hf_up * hf_raise,
                        -p.omega_b * (i - j));
        t.emplace_back(row, row, diag);
        if (m + 1 < da) t.emplace_back(row, idx(m + 1, i, j), r.hf_down * (m + 1));
        if (m > 0) t.emplace_back(row, idx(m - 1, i, j), r.hf_up * m);
        if (i + 1 < n && j + 1 < n) t.emplace_back(row, idx(m, i + 1, j + 1), r.lf_down * s(i + 1) * s(j + 1));
        if (i > 0 && j > 0) t.emplace_back(row, idx(m, i - 1, j - 1), r.lf_up * s(i) * s(j));
        if (m == 0) continue;
        if (i > 0) t.emplace_back(row, idx(m, i - 1, j), (u + v) * s(i));
        if (i + 1 < n) t.emplace_back(row, idx(m, i + 1, j), (u - v) * s(i + 1));
        if (j > 0) t.emplace_back(row, idx(m, i, j - 1), (-u + v) * s(j));
        if (j + 1 < n) t.emplace_back(row, idx(m, i, j + 1), (-u - v) * s(j + 1));
      }
  }
  if (replace_first_row) {
    for (int m = 0; m < da; ++m)
      for (int i = 0; i < n; ++i) t.emplace_back(0, idx(m, i, i), 1.0);
  }
  return t;
}

}  // namespace

Eigen::SparseMatrix<cplx> SectorLiouvillian::matrix(bool heating) const {
  const int size = dims_.hf * dims_.lf * dims_.lf;
  Eigen::SparseMatrix<cplx> m(size, size);
  const auto t = sector_triplets(params_, dims_, heating, false);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

bool is_hf_block_diagonal(const DensityMatrix& rho, double tol) {
  if (!rho.dims()) return false;
  const int da = rho.dims()->hf;
  const int db = rho.dims()->lf;
  const auto& m = rho.matrix();
  for (int p = 0; p < da; ++p)
    for (int q = 0; q < da; ++q)
      if (p != q && m.block(p * db, q * db, db, db).cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

Eigen::MatrixXcd to_sector_blocks(const DensityMatrix& rho) {
  if (!rho.dims()) throw ShapeError("to_sector_blocks: density matrix carries no ModeDim");
  const int da = rho.dims()->hf;
  const int db = rho.dims()->lf;
  Eigen::MatrixXcd out(db, da * db);
  for (int m = 0; m < da; ++m) out.middleCols(m * db, db) = rho.matrix().block(m * db, m * db, db, db);
  return out;
}

DensityMatrix from_sector_blocks(const Eigen::MatrixXcd& blocks, ModeDim dims, bool validate) {
  dims.validate();
  if (blocks.rows() != dims.lf || blocks.cols() != dims.composite()) {
    throw ShapeError("from_sector_blocks: blocks have the wrong shape");
  }
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dims.composite(), dims.composite());
  for (int k = 0; k < dims.hf; ++k)
    m.block(k * dims.lf, k * dims.lf, dims.lf, dims.lf) = blocks.middleCols(k * dims.lf, dims.lf);
  return DensityMatrix(std::move(m), dims, validate);
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

struct RawMoments {
  double n_a = 0, n_a2 = 0, q = 0, p = 0, n_a_q = 0, n_a_p = 0, n_b = 0, bbbb = 0;

  MomentVector moments(double t) const {
    MomentVector v;
    v.t = t;
    v.n_a = n_a;
    v.q = q;
    v.p = p;
    v.var_na = n_a2 - n_a * n_a;
    v.c_nq = n_a_q - n_a * q;
    v.c_np = n_a_p - n_a * p;
    v.n_b = n_b;
    return v;
  }
};

/// Tr(q R) and Tr(p R) of one LF block.
std::pair<double, double> lf_quadratures(const Eigen::Ref<const Eigen::MatrixXcd>& R, const Eigen::VectorXd& s) {
  cplx up = 0.0;    // sum_i s_i R(i-1, i)
  cplx down = 0.0;  // sum_i s_i R(i, i-1)
  for (int i = 1; i < R.rows(); ++i) {
    up += s(i) * R(i - 1, i);
    down += s(i) * R(i, i - 1);
  }
  return {std::real(up + down), std::real(kI * (up - down))};
}

struct SectorEngine {
  SectorLiouvillian gen;
  ModeDim dims;
  Eigen::VectorXd s;

  using State = SectorLiouvillian::Planar;

  SectorEngine(const EngineParams& p, ModeDim d) : gen(p, d), dims(d), s(sqrt_levels(d.lf)) {}

  void derivative(const State& x, bool heating, State& out) const { gen.apply(x, heating, out); }
  Eigen::MatrixXcd view(const State& x) const { return gen.unpack(x); }

  RawMoments raw(const Eigen::MatrixXcd& x) const {
    RawMoments r;
    const int n = dims.lf;
    for (int m = 0; m < dims.hf; ++m) {
      const auto R = x.middleCols(m * n, n);
      const double tr = std::real(R.trace());
      const auto [q, p] = lf_quadratures(R, s);
      r.n_a += m * tr;
      r.n_a2 += double(m) * m * tr;
      r.q += q;
      r.p += p;
      r.n_a_q += m * q;
      r.n_a_p += m * p;
      for (int i = 1; i < n; ++i) {
        const double pop = std::real(R(i, i));
        r.n_b += i * pop;
        r.bbbb += double(i) * (i - 1) * pop;
      }
    }
    return r;
  }

  Eigen::VectorXd lf_populations(const Eigen::MatrixXcd& x) const {
    Eigen::VectorXd pop = Eigen::VectorXd::Zero(dims.lf);
    for (int m = 0; m < dims.hf; ++m) pop += x.middleCols(m * dims.lf, dims.lf).diagonal().real();
    return pop;
  }

  cplx observable(const Operator& op, const Eigen::MatrixXcd& x) const {
    if (op.rows() != dims.composite() || op.cols() != dims.composite()) {
      throw ShapeError("observable dimensions differ from the state");
    }
    // Tr(rho op) with rho nonzero only on diagonal HF blocks.
    cplx acc = 0.0;
    for (int col = 0; col < op.outerSize(); ++col) {
      const int mc = col / dims.lf;
      for (Operator::InnerIterator it(op, col); it; ++it) {
        const int row = static_cast<int>(it.row());
        if (row / dims.lf != mc) continue;
        acc += x(col % dims.lf, mc * dims.lf + row % dims.lf) * it.value();
      }
    }
    return acc;
  }

  InvariantReport check(const Eigen::MatrixXcd& x, bool positivity) const {
    InvariantReport r;
    const int n = dims.lf;
    r.finite = x.allFinite();
    cplx tr = 0.0;
    double min_eig = 0.0;
    for (int m = 0; m < dims.hf; ++m) {
      const auto R = x.middleCols(m * n, n);
      r.hermiticity_defect = std::max(r.hermiticity_defect, (R - R.adjoint()).cwiseAbs().maxCoeff());
      tr += R.trace();
      if (positivity && r.finite) {
        const Eigen::MatrixXcd h = 0.5 * (R + R.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
        min_eig = m == 0 ? es.eigenvalues().minCoeff() : std::min(min_eig, es.eigenvalues().minCoeff());
      }
    }
    r.trace_defect = std::abs(tr - cplx(1.0));
    if (positivity && r.finite) {
      r.min_eigenvalue = min_eig;
      r.positivity_checked = true;
    }
    return r;
  }

  DensityMatrix to_density(const Eigen::MatrixXcd& x) const { return from_sector_blocks(x, dims, false); }
};

struct FullEngine {
  Liouvillian gen;
  ModeDim dims;
  Operator n_a, n_a2, q, p, n_a_q, n_a_p, n_b, bbbb;
  Operator b_number_lf;

  using State = Eigen::MatrixXcd;

  FullEngine(const EngineParams& par, ModeDim d) : gen(par, d), dims(d) {
    const ModeOperators ops = mode_operators(d);
    n_a = ops.n_a;
    n_a2 = ops.n_a * ops.n_a;
    q = ops.q;
    p = ops.p;
    n_a_q = ops.n_a * ops.q;
    n_a_p = ops.n_a * ops.p;
    n_b = ops.n_b;
    bbbb = ops.bd * ops.bd * ops.b * ops.b;
  }

  void derivative(const State& x, bool heating, State& out) const { gen.apply(x, heating, out); }
  const Eigen::MatrixXcd& view(const State& x) const { return x; }

  RawMoments raw(const Eigen::MatrixXcd& x) const {
    RawMoments r;
    r.n_a = std::real(expectation(n_a, x));
    r.n_a2 = std::real(expectation(n_a2, x));
    r.q = std::real(expectation(q, x));
    r.p = std::real(expectation(p, x));
    r.n_a_q = std::real(expectation(n_a_q, x));
    r.n_a_p = std::real(expectation(n_a_p, x));
    r.n_b = std::real(expectation(n_b, x));
    r.bbbb = std::real(expectation(bbbb, x));
    return r;
  }

  Eigen::VectorXd lf_populations(const Eigen::MatrixXcd& x) const {
    Eigen::VectorXd pop = Eigen::VectorXd::Zero(dims.lf);
    for (int m = 0; m < dims.hf; ++m) pop += x.block(m * dims.lf, m * dims.lf, dims.lf, dims.lf).diagonal().real();
    return pop;
  }

  cplx observable(const Operator& op, const Eigen::MatrixXcd& x) const { return expectation(op, x); }

  InvariantReport check(const Eigen::MatrixXcd& x, bool positivity) const {
    return DensityMatrix(x, false).check(positivity);
  }

  DensityMatrix to_density(const Eigen::MatrixXcd& x) const { return DensityMatrix(x, dims, false); }
};

void axpy(Eigen::MatrixXcd& y, const Eigen::MatrixXcd& x, double a, const Eigen::MatrixXcd& k) {
  y = x + a * k;
}
void axpy(SectorLiouvillian::Planar& y, const SectorLiouvillian::Planar& x, double a,
          const SectorLiouvillian::Planar& k) {
  y.re = x.re + a * k.re;
  y.im = x.im + a * k.im;
}
template <typename S>
void rk4_update(S& x, double h, const S& k1, const S& k2, const S& k3, const S& k4);
template <>
void rk4_update(Eigen::MatrixXcd& x, double h, const Eigen::MatrixXcd& k1, const Eigen::MatrixXcd& k2,
                const Eigen::MatrixXcd& k3, const Eigen::MatrixXcd& k4) {
  x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}
template <>
void rk4_update(SectorLiouvillian::Planar& x, double h, const SectorLiouvillian::Planar& k1,
                const SectorLiouvillian::Planar& k2, const SectorLiouvillian::Planar& k3,
                const SectorLiouvillian::Planar& k4) {
  x.re += (h / 6.0) * (k1.re + 2.0 * k2.re + 2.0 * k3.re + k4.re);
  x.im += (h / 6.0) * (k1.im + 2.0 * k2.im + 2.0 * k3.im + k4.im);
}

template <typename Engine>
void rk4_step(const Engine& eng, typename Engine::State& x, double h, bool heating, typename Engine::State& k1,
              typename Engine::State& k2, typename Engine::State& k3, typename Engine::State& k4,
              typename Engine::State& y, bool have_k1 = false) {
  if (!have_k1) eng.derivative(x, heating, k1);
  axpy(y, x, 0.5 * h, k1);
  eng.derivative(y, heating, k2);
  axpy(y, x, 0.5 * h, k2);
  eng.derivative(y, heating, k3);
  axpy(y, x, h, k3);
  eng.derivative(y, heating, k4);
  rk4_update(x, h, k1, k2, k3, k4);
}

template <typename Engine>
TimeSeries run_rk4(const Engine& eng, typename Engine::State x, const EngineParams& par, const DriveSchedule& schedule,
                   const PropagationOptions& opts) {
  TimeSeries ts;
  ts.tier = Tier::QuantumLindblad;
  const std::size_t every = std::max<std::size_t>(opts.sample_every, 1);
  std::size_t sample_count = 0;

  auto sample = [&](double t, bool final_sample) {
    const bool positivity =
        final_sample || (opts.positivity_every > 0 && sample_count % opts.positivity_every == 0);
    const Eigen::MatrixXcd& X = eng.view(x);
    const InvariantReport rep = eng.check(X, positivity);
    if (!rep.ok()) {
      std::ostringstream os;
      os << "Lindblad propagation left the density-matrix set at t = " << t << ": " << rep.describe();
      throw PropagationDiverged(os.str(), t);
    }
    const RawMoments raw = eng.raw(X);
    const MomentVector mv = raw.moments(t);
    if (par.g * std::abs(mv.q) >= par.omega_a) {
      throw RegimeError("g |q| reached omega_a; the dispersive model is invalid");
    }
    ts.samples.push_back(mv);
    ts.bbbb.push_back(raw.bbbb);
    ts.g2.push_back(raw.n_b > 0.0 ? raw.bbbb / (raw.n_b * raw.n_b) : std::nan(""));
    if (opts.record_lf_populations) ts.lf_populations.push_back(eng.lf_populations(X));
    if (!opts.observables.empty()) {
      std::vector<cplx> row;
      row.reserve(opts.observables.size());
      for (const auto& op : opts.observables) row.push_back(eng.observable(op, X));
      ts.observables.push_back(std::move(row));
    }
    ++sample_count;
  };

  const auto segments = segment_grid(schedule, 0.0, opts.t_end, opts.dt, every);
  typename Engine::State k1, k2, k3, k4, y;
  sample(0.0, segments.empty());
  for (std::size_t si = 0; si < segments.size(); ++si) {
    const Segment& seg = segments[si];
    const double h = seg.h;
    for (std::size_t step = 1; step <= seg.steps; ++step) {
      rk4_step(eng, x, h, seg.heating, k1, k2, k3, k4, y);
      if (step % every == 0) {
        const double t = step == seg.steps ? seg.t_stop : seg.t_start + static_cast<double>(step) * h;
        sample(t, si + 1 == segments.size() && step == seg.steps);
      }
    }
  }
  ts.final_state = eng.to_density(eng.view(x));
  return ts;
}

}  // namespace

MomentVector moments_of(const DensityMatrix& rho, double t) {
  if (!rho.dims()) throw ShapeError("moments_of: density matrix carries no ModeDim");
  const FullEngine eng(EngineParams{}, *rho.dims());
  return eng.raw(rho.matrix()).moments(t);
}

double lf_factorial_moment2(const DensityMatrix& rho) {
  if (!rho.dims()) throw ShapeError("lf_factorial_moment2: density matrix carries no ModeDim");
  const ModeOperators ops = mode_operators(*rho.dims());
  return std::real(expectation(Operator(ops.bd * ops.bd * ops.b * ops.b), rho));
}

TimeSeries propagate(const DensityMatrix& rho0, const EngineParams& p, const DriveSchedule& schedule,
                     const PropagationOptions& opts) {
  p.validate();
  schedule.validate();
  if (!rho0.dims()) throw ShapeError("propagate: initial state carries no ModeDim");
  if (!(opts.dt > 0.0) || !(opts.t_end >= 0.0)) throw DomainError("propagate: dt must be > 0 and t_end >= 0");
  rho0.validate();
  const ModeDim dims = *rho0.dims();
  if (!opts.force_full_space && is_hf_block_diagonal(rho0)) {
    const SectorEngine eng(p, dims);
    return run_rk4(eng, eng.gen.pack(to_sector_blocks(rho0)), p, schedule, opts);
  }
  const FullEngine eng(p, dims);
  return run_rk4(eng, rho0.matrix(), p, schedule, opts);
}

DensityMatrix initial_thermal_state(const EngineParams& p, ModeDim dims) {
  dims.validate();
  return product_state(thermal_density(dims.hf, p.nbar_c()), thermal_density(dims.lf, p.nbar_c()));
}

// ---------------------------------------------------------------------------
// Steady state

DensityMatrix steady_state_nullspace(const EngineParams& p, ModeDim dims) {
  p.validate();
  dims.validate();
  const int size = dims.hf * dims.lf * dims.lf;
  const auto t = sector_triplets(p, dims, true, true);
  Eigen::SparseMatrix<cplx> m(size, size);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success) throw ConvergenceError("steady_state_nullspace: factorisation failed");
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(size);
  rhs(0) = 1.0;
  Eigen::VectorXcd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw ConvergenceError("steady_state_nullspace: solve failed");
  Eigen::MatrixXcd blocks = Eigen::Map<Eigen::MatrixXcd>(x.data(), dims.lf, dims.composite());
  for (int k = 0; k < dims.hf; ++k) {
    auto R = blocks.middleCols(k * dims.lf, dims.lf);
    const Eigen::MatrixXcd herm = 0.5 * (R + R.adjoint());
    R = herm;
  }
  return from_sector_blocks(blocks, dims, true);
}

DensityMatrix steady_state_by_propagation(const EngineParams& p, ModeDim dims, const SteadyStateOptions& opts,
                                          double* residual, double* t_converged) {
  p.validate();
  if (!(opts.dt > 0.0) || !(opts.horizon > 0.0)) throw DomainError("steady state: dt and horizon must be > 0");
  const SectorEngine eng(p, dims);
  SectorEngine::State x = eng.gen.pack(to_sector_blocks(initial_thermal_state(p, dims)));
  SectorEngine::State k1, k2, k3, k4, y;
  auto l1 = [](const SectorEngine::State& k) { return (k.re.square() + k.im.square()).sqrt().sum(); };
  const double h = opts.dt;
  const auto check_every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opts.check_interval / h)));
  const auto max_steps = static_cast<std::size_t>(std::ceil(opts.horizon / h));
  for (std::size_t step = 0; step <= max_steps; ++step) {
    eng.derivative(x, true, k1);
    if (step % check_every == 0) {
      const double res = l1(k1);
      if (!std::isfinite(res)) throw ConvergenceError("steady state propagation diverged");
      if (res < opts.residual_tol) {
        if (residual) *residual = res;
        if (t_converged) *t_converged = static_cast<double>(step) * h;
        return from_sector_blocks(eng.view(x), dims, true);
      }
    }
    rk4_step(eng, x, h, true, k1, k2, k3, k4, y, true);
  }
  std::ostringstream os;
  os << "steady state not reached within horizon " << opts.horizon << " (residual "
     << l1(k1) << ")";
  throw ConvergenceError(os.str());
}

SteadyState steady_state_constant_drive(const EngineParams& p, ModeDim dims, const SteadyStateOptions& opts) {
  SteadyState out;
  out.by_propagation = steady_state_by_propagation(p, dims, opts, &out.final_residual, &out.converged_at);
  out.by_nullspace = steady_state_nullspace(p, dims);
  out.max_elementwise_difference =
      (out.by_propagation.matrix() - out.by_nullspace.matrix()).cwiseAbs().maxCoeff();
  if (out.max_elementwise_difference > opts.agreement_tol) {
    std::ostringstream os;
    os << "steady-state routes disagree by " << out.max_elementwise_difference;
    throw ConvergenceError(os.str());
  }
  return out;
}

}  // namespace otto
