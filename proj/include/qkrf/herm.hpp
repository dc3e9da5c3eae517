#pragma once

// Linear algebra on the cone of positive Hermitian forms.
//
// Convention: a form H on C^N evaluates a coefficient vector c (in the fixed
// reference basis) as |c|_H^2 = c^† H c, so H(i, j) = H(e_i, e_j) with the
// first slot antilinear.

#include <Eigen/Dense>

#include <complex>
#include <span>

#include "qkrf/error.hpp"

namespace qkrf {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Positive-definite Hermitian inner product on the level-k section space.
class HermForm {
 public:
  HermForm() = default;
  /// Symmetrizes `entries` and checks Hermitian residual and positivity.
  HermForm(int level, CMatrix entries);

  int level() const { return level_; }
  int dim() const { return static_cast<int>(entries_.rows()); }
  const CMatrix& entries() const { return entries_; }

  /// True when every off-diagonal entry is exactly zero.
  bool is_diagonal() const;

  HermForm scaled(double c) const;

 private:
  int level_ = 0;
  CMatrix entries_;
};

/// Hermitian, not necessarily positive: tangent vectors such as log H.
struct TangentForm {
  CMatrix entries;
};

struct SpectralPair {
  RVector values;  // ascending
  CMatrix frame;   // unitary, columns are eigenvectors
};

/// Max |A - A^†| relative to max |A|.
double hermitian_residual(const CMatrix& a);

/// (A + A^†) / 2 after checking the residual is within 1e-12 relative.
CMatrix symmetrized(const CMatrix& a);

SpectralPair eigh(const CMatrix& a);

TangentForm matrix_log(const CMatrix& a);
inline TangentForm matrix_log(const HermForm& h) { return matrix_log(h.entries()); }
CMatrix matrix_exp(const TangentForm& q);
/// Positive real power of a PD matrix.
CMatrix matrix_power(const CMatrix& a, double p);

/// Symmetric-space geodesic with geodesic(H0,H1,0) = H0, geodesic(H0,H1,1) = H1.
HermForm geodesic(const HermForm& h0, const HermForm& h1, double t);

/// Frame that is orthonormal for `base` and whose columns span the same flag
/// as `adapted` (Gram-Schmidt in column order).
CMatrix orthonormalize_flag(const HermForm& base, const CMatrix& adapted);

/// Geodesic ray from h0: e^{weights_i t / 2} s_i is orthonormal for the
/// result, where s_i is `adapted` made h0-orthonormal.
HermForm geodesic_ray(const HermForm& h0, const CMatrix& adapted,
                      std::span<const double> weights, double t);

/// Eigenvalues of B^{-1/2} A B^{-1/2}, ascending.
RVector gen_eig(const CMatrix& a, const CMatrix& b);
inline RVector gen_eig(const HermForm& a, const HermForm& b) {
  return gen_eig(a.entries(), b.entries());
}

/// Simultaneous diagonalization: columns s_i with s_i^† H s_j = δ_ij and
/// s_i^† B s_j = norms_i δ_ij. Norms ascending.
struct SimultaneousFrame {
  CMatrix frame;
  RVector norms;
};
SimultaneousFrame orthonormal_orthogonal(const CMatrix& h, const CMatrix& b);
inline SimultaneousFrame orthonormal_orthogonal(const HermForm& h, const HermForm& b) {
  return orthonormal_orthogonal(h.entries(), b.entries());
}

/// (1/N) Σ μ log μ over μ = gen_eig(A, B).
double rel_entropy(const CMatrix& a, const CMatrix& b);
inline double rel_entropy(const HermForm& a, const HermForm& b) {
  return rel_entropy(a.entries(), b.entries());
}

/// Hilbert-Schmidt norm of log H1 - log H2 in the reference basis.
double log_gap(const HermForm& h1, const HermForm& h2);

/// log det(H0^{-1} H) from generalized eigenvalues.
double log_det_relative(const CMatrix& h, const CMatrix& h0);

}  // namespace qkrf
