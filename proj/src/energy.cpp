#include "qkrf/energy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qkrf/quantization.hpp"

namespace qkrf {
namespace {

double logsumexp(const RVector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

const RadialGrid& spectral_grid(const PotentialField& phi, const char* what) {
  const RadialGrid* g = phi.model()->radial();
  if (!g || !g->spectral() || !phi.is_radial())
    throw UnsupportedError(std::string(what) +
                           ": requires a radial potential on a spectral projective-line grid");
  return *g;
}

RVector admissible_ma(const RadialGrid& g, const RVector& phi) {
  RVector m = radial::ma_profile(g, phi);
  Eigen::Index worst = 0;
  if (m.minCoeff(&worst) <= 0.0) {
    std::ostringstream os;
    os << "not a Kähler potential: Monge-Ampère density " << m(worst) << " at u = " << g.u(worst);
    throw DomainError(os.str());
  }
  return m;
}

}  // namespace

namespace radial {

double ma_energy(const RadialGrid& g, const RVector& phi) {
  const RVector m = admissible_ma(g, phi);
  // (1/2V) ∫ φ (ω_0 + ω_φ) with V = 2 and ω_0 = 2 du.
  return 0.25 * compensated_sum(g.weights.cwiseProduct(phi.cwiseProduct((m.array() + 2.0).matrix())));
}

double l_functional(const RadialGrid& g, const RVector& phi) {
  return -logsumexp(g.weights.array().log().matrix() - phi);
}

RVector log_ricci_density(const RadialGrid& g, const RVector& phi) {
  const RVector m = admissible_ma(g, phi);
  const auto [density, lse] = canonical_profile(g, phi);
  return (-phi.array() - lse) - (0.5 * m.array()).log();
}

double entropy(const RadialGrid& g, const RVector& phi) {
  const RVector logr = log_ricci_density(g, phi);
  const RVector density = canonical_profile(g, phi).first;
  return compensated_sum(g.weights.cwiseProduct(density.cwiseProduct(logr)));
}

}  // namespace radial

double ma_energy(const PotentialField& phi) {
  return radial::ma_energy(spectral_grid(phi, "ma_energy"), phi.profile());
}

double l_functional(const PotentialField& phi) {
  const ModelPtr& model = phi.model();
  return -logsumexp(model->log_mu0_masses() - phi.values()) + std::log(model->volume());
}

double entropy_classical(const PotentialField& phi) {
  return radial::entropy(spectral_grid(phi, "entropy_classical"), phi.profile());
}

RVector ricci_density(const PotentialField& phi) {
  const RVector logr = radial::log_ricci_density(spectral_grid(phi, "ricci_density"), phi.profile());
  return phi.model()->broadcast_radial(logr.array().exp().matrix());
}

double e_k(const HermForm& h, const HermForm& h0) {
  return -log_det_relative(h.entries(), h0.entries()) /
         (static_cast<double>(h.level()) * h.dim());
}

double d_k(const ModelPtr& model, const HermForm& h, const HermForm& h0) {
  return l_functional(fubini_study(model, h)) - e_k(h, h0);
}

double entropy_from_norms(const RVector& norms) {
  double acc = 0.0;
  for (double b : norms) acc += b * std::log(b);
  return acc / static_cast<double>(norms.size());
}

double s_k(const ModelPtr& model, const HermForm& h) {
  return rel_entropy(balancing(model, h), h);
}

double f_k_na(std::span<const double> weights, int k) {
  if (weights.empty()) throw DimensionError("f_k_na: empty weight vector");
  RVector scaled(static_cast<Eigen::Index>(weights.size()));
  for (std::size_t i = 0; i < weights.size(); ++i)
    scaled(static_cast<Eigen::Index>(i)) = -weights[i] / k;
  return -(logsumexp(scaled) - std::log(static_cast<double>(weights.size())));
}

double conjugate_objective(const RVector& norms, std::span<const double> weights, int k) {
  if (static_cast<Eigen::Index>(weights.size()) != norms.size())
    throw DimensionError("conjugate_objective: weight count differs from N_k");
  const double n = static_cast<double>(norms.size());
  double linear = 0.0;
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    linear -= weights[static_cast<std::size_t>(i)] / k * norms(i) / n;
  return linear + f_k_na(weights, k);
}

double s_k_conjugate(const ModelPtr& model, const HermForm& h,
                     const std::vector<std::vector<double>>& trial_weights) {
  if (trial_weights.empty()) throw ConfigError("s_k_conjugate: no trial weights");
  const RVector norms = orthonormal_orthogonal(h, balancing(model, h)).norms;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& w : trial_weights) best = std::max(best, conjugate_objective(norms, w, h.level()));
  return best;
}

EnergyReport energy_report(const ModelPtr& model, const HermForm& h, const HermForm& h0) {
  EnergyReport r;
  const PotentialField phi = fubini_study(model, h);
  r.L = l_functional(phi);
  r.E_k = e_k(h, h0);
  r.D_k = r.L - r.E_k;
  r.S_k = s_k(model, h);
  const RadialGrid* g = model->radial();
  if (g && g->spectral() && phi.is_radial()) {
    r.E = radial::ma_energy(*g, phi.profile());
    r.S = radial::entropy(*g, phi.profile());
  }
  return r;
}

}  // namespace qkrf
