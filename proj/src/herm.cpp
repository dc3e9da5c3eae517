#include "qkrf/herm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

namespace qkrf {
namespace {

constexpr double kHermitianTol = 1e-12;
constexpr double kEigenFloor = 1e-14;

bool off_diagonal_zero(const CMatrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j && a(i, j) != cdouble(0.0)) return false;
  return true;
}

void require_square(const CMatrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << a.rows() << "x" << a.cols();
    throw DimensionError(os.str());
  }
}

void require_same_dim(const CMatrix& a, const CMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": dimension mismatch " << a.rows() << " vs " << b.rows();
    throw DimensionError(os.str());
  }
}

// Checks the positivity floor on an ascending spectrum.
void require_positive(const RVector& values, const char* what) {
  const double top = values.maxCoeff();
  const double bottom = values.minCoeff();
  if (!(top > 0.0) || !(bottom > kEigenFloor * top)) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": matrix is not positive definite (eigenvalue " << bottom
       << ", largest " << top << ")";
    throw DomainError(os.str());
  }
}

// Lower Cholesky factor of a PD matrix, with the eigenvalue floor enforced.
Eigen::LLT<CMatrix> checked_cholesky(const CMatrix& b, const char* what) {
  Eigen::LLT<CMatrix> llt(b);
  if (llt.info() != Eigen::Success) {
    require_positive(eigh(b).values, what);
    throw DomainError(std::string(what) + ": Cholesky factorization failed");
  }
  return llt;
}

// Internal products such as L^{-1} A L^{-†} are Hermitian only up to
// conditioning-amplified round-off; no residual check here.
CMatrix hermitian_part(const CMatrix& a) { return (a + a.adjoint()) * 0.5; }

SpectralPair eigh_unchecked(const CMatrix& s);

CMatrix apply_spectral(const SpectralPair& sp, const RVector& mapped) {
  return sp.frame * mapped.asDiagonal() * sp.frame.adjoint();
}

}  // namespace

HermForm::HermForm(int level, CMatrix entries) : level_(level) {
  if (level < 0) throw DomainError("HermForm: negative level");
  require_square(entries, "HermForm");
  entries_ = symmetrized(entries);
  require_positive(eigh(entries_).values, "HermForm");
}

bool HermForm::is_diagonal() const { return off_diagonal_zero(entries_); }

HermForm HermForm::scaled(double c) const {
  HermForm out = *this;
  out.entries_ *= c;
  if (!(c > 0.0)) throw DomainError("HermForm::scaled: factor must be positive");
  return out;
}

double hermitian_residual(const CMatrix& a) {
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() / scale;
}

CMatrix symmetrized(const CMatrix& a) {
  require_square(a, "symmetrized");
  if (!a.allFinite()) throw DomainError("matrix has non-finite entries");
  const double r = hermitian_residual(a);
  if (r > kHermitianTol) {
    std::ostringstream os;
    os << "matrix is not Hermitian (relative residual " << r << ")";
    throw DomainError(os.str());
  }
  return (a + a.adjoint()) * 0.5;
}

SpectralPair eigh(const CMatrix& a) { return eigh_unchecked(symmetrized(a)); }

namespace {
SpectralPair eigh_unchecked(const CMatrix& s) {
  const Eigen::Index n = s.rows();
  if (off_diagonal_zero(s)) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) {
      return s(i, i).real() < s(j, j).real();
    });
    SpectralPair out{RVector(n), CMatrix::Zero(n, n)};
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto i = order[static_cast<std::size_t>(c)];
      out.values(c) = s(i, i).real();
      out.frame(i, c) = 1.0;
    }
    return out;
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(s);
  if (solver.info() != Eigen::Success) throw DomainError("eigh: eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}
}  // namespace

TangentForm matrix_log(const CMatrix& a) {
  const SpectralPair sp = eigh(a);
  require_positive(sp.values, "matrix_log");
  return {apply_spectral(sp, sp.values.array().log().matrix())};
}

CMatrix matrix_exp(const TangentForm& q) {
  const SpectralPair sp = eigh(q.entries);
  return apply_spectral(sp, sp.values.array().exp().matrix());
}

CMatrix matrix_power(const CMatrix& a, double p) {
  const SpectralPair sp = eigh(a);
  require_positive(sp.values, "matrix_power");
  return apply_spectral(sp, sp.values.array().pow(p).matrix());
}

RVector gen_eig(const CMatrix& a, const CMatrix& b) {
  require_same_dim(a, b, "gen_eig");
  const CMatrix as = symmetrized(a);
  const CMatrix bs = symmetrized(b);
  if (off_diagonal_zero(as) && off_diagonal_zero(bs)) {
    RVector db = bs.diagonal().real();
    require_positive(db, "gen_eig");
    RVector out = as.diagonal().real().cwiseQuotient(db);
    std::sort(out.begin(), out.end());
    return out;
  }
  const auto llt = checked_cholesky(bs, "gen_eig");
  const CMatrix linv_a = llt.matrixL().solve(as);
  const CMatrix c = llt.matrixL().solve(linv_a.adjoint()).adjoint();
  return eigh_unchecked(hermitian_part(c)).values;
}

SimultaneousFrame orthonormal_orthogonal(const CMatrix& h, const CMatrix& b) {
  require_same_dim(h, b, "orthonormal_orthogonal");
  const CMatrix hs = symmetrized(h);
  const CMatrix bs = symmetrized(b);
  const Eigen::Index n = hs.rows();
  if (off_diagonal_zero(hs) && off_diagonal_zero(bs)) {
    const RVector dh = hs.diagonal().real();
    require_positive(dh, "orthonormal_orthogonal");
    require_positive(bs.diagonal().real(), "orthonormal_orthogonal");
    const RVector ratio = bs.diagonal().real().cwiseQuotient(dh);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto i, auto j) { return ratio(i) < ratio(j); });
    SimultaneousFrame out{CMatrix::Zero(n, n), RVector(n)};
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto i = order[static_cast<std::size_t>(c)];
      out.frame(i, c) = 1.0 / std::sqrt(dh(i));
      out.norms(c) = ratio(i);
    }
    return out;
  }
  require_positive(eigh(bs).values, "orthonormal_orthogonal");
  const auto llt = checked_cholesky(hs, "orthonormal_orthogonal");
  const CMatrix linv_b = llt.matrixL().solve(bs);
  const CMatrix c = llt.matrixL().solve(linv_b.adjoint()).adjoint();
  const SpectralPair sp = eigh_unchecked(hermitian_part(c));
  SimultaneousFrame out;
  out.frame = llt.matrixU().solve(sp.frame);
  out.norms = sp.values;
  return out;
}

double rel_entropy(const CMatrix& a, const CMatrix& b) {
  const RVector mu = gen_eig(a, b);
  require_positive(mu, "rel_entropy");
  double acc = 0.0;
  for (double m : mu) acc += m * std::log(m);
  return acc / static_cast<double>(mu.size());
}

double log_gap(const HermForm& h1, const HermForm& h2) {
  require_same_dim(h1.entries(), h2.entries(), "log_gap");
  return (matrix_log(h1).entries - matrix_log(h2).entries).norm();
}

double log_det_relative(const CMatrix& h, const CMatrix& h0) {
  const RVector mu = gen_eig(h, h0);
  require_positive(mu, "log_det_relative");
  return mu.array().log().sum();
}

HermForm geodesic(const HermForm& h0, const HermForm& h1, double t) {
  require_same_dim(h0.entries(), h1.entries(), "geodesic");
  const SimultaneousFrame sf = orthonormal_orthogonal(h0.entries(), h1.entries());
  const RVector scale = sf.norms.array().pow(t).matrix();
  const CMatrix hf = h0.entries() * sf.frame;
  return HermForm(h0.level(), hermitian_part(hf * scale.asDiagonal() * hf.adjoint()));
}

CMatrix orthonormalize_flag(const HermForm& base, const CMatrix& adapted) {
  require_same_dim(base.entries(), adapted, "orthonormalize_flag");
  const CMatrix gram = hermitian_part(adapted.adjoint() * base.entries() * adapted);
  Eigen::LLT<CMatrix> llt(gram);
  if (llt.info() != Eigen::Success)
    throw DomainError("orthonormalize_flag: adapted basis is not invertible");
  // adapted = Q R with R = L^†, so Q = adapted L^{-†}.
  return llt.matrixL().solve(adapted.adjoint()).adjoint();
}

HermForm geodesic_ray(const HermForm& h0, const CMatrix& adapted,
                      std::span<const double> weights, double t) {
  if (static_cast<Eigen::Index>(weights.size()) != h0.dim())
    throw DimensionError("geodesic_ray: weight count differs from form dimension");
  const CMatrix q = orthonormalize_flag(h0, adapted);
  RVector scale(h0.dim());
  for (Eigen::Index i = 0; i < scale.size(); ++i)
    scale(i) = std::exp(-weights[static_cast<std::size_t>(i)] * t);
  const CMatrix hq = h0.entries() * q;
  return HermForm(h0.level(), hermitian_part(hq * scale.asDiagonal() * hq.adjoint()));
}

}  // namespace qkrf
