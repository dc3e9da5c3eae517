#include "qkrf/quantization.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace qkrf {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(const RVector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Column-wise log-sum-exp of an (terms × nodes) matrix.
RVector colwise_logsumexp(const RMatrix& terms) {
  RVector out(terms.cols());
  for (Eigen::Index x = 0; x < terms.cols(); ++x) out(x) = logsumexp(terms.col(x));
  return out;
}

void require_level_dim(const ModelPtr& model, const HermForm& h) {
  if (!model) throw ConfigError("null model");
  model->require_level(h.level());
  if (model->dim(h.level()) != h.dim()) {
    std::ostringstream os;
    os << "form of dimension " << h.dim() << " at level " << h.level() << ", model has N_k = "
       << model->dim(h.level());
    throw DimensionError(os.str());
  }
}

BergmanData finish_bergman(const RVector& log_sum, int k, int n) {
  BergmanData out;
  out.log_density = log_sum.array() - std::log(static_cast<double>(n));
  out.potential = out.log_density / static_cast<double>(k);
  if (!out.potential.allFinite())
    throw DomainError("Bergman sum vanishes at a node; section basis is not base-point free");
  return out;
}

bool radial_shortcut(const ModelPtr& model, const HermForm& h) {
  return model->radial() && h.is_diagonal();
}

BergmanData bergman_radial(const ModelPtr& model, const HermForm& h) {
  const int k = h.level();
  const RMatrix logsec = model->radial_log_sections(k);
  const RVector logh = h.entries().diagonal().real().array().log();
  const RMatrix terms = logsec.colwise() - logh;
  return finish_bergman(colwise_logsumexp(terms), k, h.dim());
}

// True when every column has exactly one nonzero entry.
bool monomial_frame(const CMatrix& frame) {
  for (Eigen::Index a = 0; a < frame.cols(); ++a) {
    int nonzero = 0;
    for (Eigen::Index j = 0; j < frame.rows(); ++j) nonzero += frame(j, a) != cdouble(0.0);
    if (nonzero != 1) return false;
  }
  return true;
}

HermForm checked_gram(int k, const CMatrix& gram) {
  try {
    return HermForm(k, gram);
  } catch (const DomainError& e) {
    const RVector ev = eigh((gram + gram.adjoint()) * 0.5).values;
    std::ostringstream os;
    os << "L2 Gram matrix at level " << k
       << " is numerically singular (condition estimate "
       << ev.cwiseAbs().maxCoeff() / std::max(ev.minCoeff(), 1e-300)
       << "); increase quadrature resolution. " << e.what();
    throw DomainError(os.str());
  }
}

// log of the per-node weight e^{-(k+1)φ} dμ_0 (/ ∫ e^{-φ} dμ_0 when canonical).
RVector log_projection_weight(const RVector& log_mu0, const RVector& phi, int k,
                              ProjectionMeasure measure) {
  RVector out = log_mu0 - (k + 1.0) * phi;
  if (measure == ProjectionMeasure::Canonical) out.array() -= logsumexp(log_mu0 - phi);
  return out;
}

}  // namespace

namespace detail {

BergmanData bergman_generic(const ModelPtr& model, const HermForm& h) {
  require_level_dim(model, h);
  const SpectralPair sp = eigh(h.entries());
  if (!(sp.values.minCoeff() > 0.0)) throw DomainError("bergman: form is not positive definite");
  const CMatrix y = sp.frame.adjoint() * model->section_columns(h.level());
  RMatrix terms(y.rows(), y.cols());
  const RVector logh = sp.values.array().log();
  for (Eigen::Index x = 0; x < y.cols(); ++x)
    for (Eigen::Index a = 0; a < y.rows(); ++a) {
      const double mag = std::norm(y(a, x));
      terms(a, x) = mag > 0.0 ? std::log(mag) - logh(a) : kNegInf;
    }
  return finish_bergman(colwise_logsumexp(terms), h.level(), h.dim());
}

HermForm project_generic(const PotentialField& phi, int k, ProjectionMeasure measure) {
  const ModelPtr& model = phi.model();
  model->require_level(k);
  const RVector weight =
      log_projection_weight(model->log_mu0_masses(), phi.values(), k, measure).array().exp();
  const CMatrix w = model->section_columns(k);
  const CMatrix gram = w * weight.asDiagonal() * w.adjoint();
  return checked_gram(k, gram);
}

}  // namespace detail

BergmanData bergman(const ModelPtr& model, const HermForm& h) {
  require_level_dim(model, h);
  if (!radial_shortcut(model, h)) return detail::bergman_generic(model, h);
  BergmanData radial = bergman_radial(model, h);
  radial.log_density = model->broadcast_radial(radial.log_density);
  radial.potential = model->broadcast_radial(radial.potential);
  return radial;
}

PotentialField fubini_study(const ModelPtr& model, const HermForm& h) {
  require_level_dim(model, h);
  if (radial_shortcut(model, h))
    return PotentialField::radial(model, bergman_radial(model, h).potential);
  return PotentialField::from_nodes(model, detail::bergman_generic(model, h).potential);
}

HermForm project(const PotentialField& phi, int k, ProjectionMeasure measure) {
  const ModelPtr& model = phi.model();
  model->require_level(k);
  if (!(model->radial() && phi.is_radial())) return detail::project_generic(phi, k, measure);
  // Rotational symmetry kills the cross terms: the Gram matrix is diagonal.
  const RVector logw =
      log_projection_weight(model->radial_log_mu0_masses(), phi.profile(), k, measure);
  const RMatrix logsec = model->radial_log_sections(k);
  const int n = model->dim(k);
  CMatrix gram = CMatrix::Zero(n, n);
  for (int j = 0; j < n; ++j)
    gram(j, j) = compensated_sum((logsec.row(j).transpose() + logw).array().exp().matrix());
  return checked_gram(k, gram);
}

HermForm balancing(const ModelPtr& model, const HermForm& h, ProjectionMeasure measure) {
  return project(fubini_study(model, h), h.level(), measure);
}

PotentialField beta_map(const PotentialField& phi, int k) {
  return fubini_study(phi.model(), project(phi, k));
}

PotentialField fubini_study_ray(const ModelPtr& model, int k, const CMatrix& frame,
                                std::span<const double> weights, double t) {
  model->require_level(k);
  const int n = model->dim(k);
  if (frame.rows() != n || frame.cols() != n || static_cast<int>(weights.size()) != n)
    throw DimensionError("fubini_study_ray: frame/weights do not match N_k");
  if (model->radial() && monomial_frame(frame)) {
    const RMatrix logsec = model->radial_log_sections(k);
    RMatrix terms(n, logsec.cols());
    for (int a = 0; a < n; ++a) {
      Eigen::Index j = 0;
      frame.col(a).cwiseAbs().maxCoeff(&j);
      terms.row(a) = (logsec.row(j).array() + std::log(std::norm(frame(j, a))) +
                      weights[static_cast<std::size_t>(a)] * t)
                         .matrix();
    }
    return PotentialField::radial(model, finish_bergman(colwise_logsumexp(terms), k, n).potential);
  }
  const CMatrix y = frame.transpose() * model->section_columns(k).conjugate();
  RMatrix terms(n, y.cols());
  for (Eigen::Index x = 0; x < y.cols(); ++x)
    for (int a = 0; a < n; ++a) {
      const double mag = std::norm(y(a, x));
      terms(a, x) =
          mag > 0.0 ? std::log(mag) + weights[static_cast<std::size_t>(a)] * t : kNegInf;
    }
  return PotentialField::from_nodes(model, finish_bergman(colwise_logsumexp(terms), k, n).potential);
}

}  // namespace qkrf
