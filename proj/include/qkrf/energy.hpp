#pragma once

// Classical functionals of a potential (Monge-Ampère energy E, L-functional,
// entropy S, Ricci density e^ρ) and their quantized counterparts on forms
// (E_k, D_k, S_k, the convex-conjugate form of S_k, and F_k^NA).
//
// Classical E, S and e^ρ need a rotationally symmetric potential on the
// projective line with a spectral radial grid.

#include <limits>
#include <span>
#include <vector>

#include "qkrf/herm.hpp"
#include "qkrf/model.hpp"

namespace qkrf {

struct EnergyReport {
  static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  double E = kNaN;
  double L = kNaN;
  double S = kNaN;
  double E_k = kNaN;
  double D_k = kNaN;
  double S_k = kNaN;
};

double ma_energy(const PotentialField& phi);
double l_functional(const PotentialField& phi);
double entropy_classical(const PotentialField& phi);
/// e^ρ = dμ_φ / (V^{-1} ω_φ^n) at nodes.
RVector ricci_density(const PotentialField& phi);

namespace radial {
// Same functionals on a bare radial profile (projective line).
double ma_energy(const RadialGrid& g, const RVector& phi);
double l_functional(const RadialGrid& g, const RVector& phi);
double entropy(const RadialGrid& g, const RVector& phi);
/// log e^ρ = log[dμ_φ / (V^{-1} ω_φ)] on the radial nodes; throws if ω_φ ≤ 0.
RVector log_ricci_density(const RadialGrid& g, const RVector& phi);
}  // namespace radial

double e_k(const HermForm& h, const HermForm& h0);
double d_k(const ModelPtr& model, const HermForm& h, const HermForm& h0);
double s_k(const ModelPtr& model, const HermForm& h);

/// (1/N) Σ B log B for an already computed simultaneous spectrum.
double entropy_from_norms(const RVector& norms);

/// Σ -(λ_i/k)(B_i/N) - log[(1/N) Σ e^{-λ_i/k}].
double conjugate_objective(const RVector& norms, std::span<const double> weights, int k);

/// Maximum of the conjugate objective over trial weights, which pair with the
/// H-orthonormal, b_k(H)-orthogonal frame in ascending order of B_i.
double s_k_conjugate(const ModelPtr& model, const HermForm& h,
                     const std::vector<std::vector<double>>& trial_weights);

/// F_k^NA = -log[(1/N) Σ e^{-λ_i/k}].
double f_k_na(std::span<const double> weights, int k);

/// Full report for a form, with the classical block filled when f_k(H) is a
/// radial potential on a spectral grid.
EnergyReport energy_report(const ModelPtr& model, const HermForm& h, const HermForm& h0);

}  // namespace qkrf
