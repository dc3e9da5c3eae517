#pragma once

// Polarized-manifold backends.
//
// A model supplies, per level k, the section-space dimension N_k and the
// values of the reference basis at quadrature nodes, trivialized by the
// reference fiber metric h_0^k: the stored column at node x is the complex
// conjugate of (e_1(x), ..., e_{N_k}(x)), so |Σ c_i e_i|^2(x) = |w(x)^† c|^2.
//
// Two backends exist:
//  * the projective line with L = -K = O(2), on a (u, θ) grid where
//    u = |z|^2 / (1 + |z|^2); ω_0 = μ_0 = du dθ / π, V = 2;
//  * a discrete backend of m weighted atoms, for property testing.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "qkrf/herm.hpp"

namespace qkrf {

enum class RadialRule {
  GaussLegendre,  // one Gauss-Legendre rule on (0, 1); supports spectral differentiation
  Graded,         // composite Gauss-Legendre, geometrically graded toward u = 0 and u = 1
};

enum class P1Basis {
  Monomial,   // e_j = z^j
  Invariant,  // e_j = sqrt((2k+1) C(2k, j)) z^j, orthonormal for p_k(0)
};

struct P1Options {
  int k_max = 6;
  int radial_nodes = 64;  // GaussLegendre: number of nodes
  int angular_nodes = 25;
  RadialRule rule = RadialRule::GaussLegendre;
  P1Basis basis = P1Basis::Monomial;
  // Graded rule: panels shrink by `graded_ratio` down to `graded_depth`,
  // each panel carrying `graded_panel_nodes` Gauss-Legendre nodes.
  double graded_depth = 1e-300;
  double graded_ratio = 0.25;
  int graded_panel_nodes = 8;
};

/// One-dimensional radial structure of the projective-line backend.
struct RadialGrid {
  RVector u;        // ascending nodes in (0, 1)
  RVector c;        // 1 - u, computed without cancellation
  RVector weights;  // quadrature for ∫_0^1 du
  int angular = 0;  // angular nodes per radial node
  RadialRule rule = RadialRule::GaussLegendre;
  RVector bary;     // barycentric weights (GaussLegendre only)
  RMatrix diff;     // spectral differentiation matrix d/du (GaussLegendre only)

  Eigen::Index size() const { return u.size(); }
  bool spectral() const { return rule == RadialRule::GaussLegendre; }
};

struct QuadratureGrid {
  RMatrix coords;  // one row per node
  RVector weights;
  double domain_volume = 0.0;
};

class PolarizedModel;
using ModelPtr = std::shared_ptr<const PolarizedModel>;

class PolarizedModel {
 public:
  int complex_dim() const { return complex_dim_; }
  double volume() const { return volume_; }
  int k_max() const { return k_max_; }
  int dim(int k) const;
  Eigen::Index node_count() const { return grid_.weights.size(); }
  const QuadratureGrid& grid() const { return grid_; }
  /// Density of dμ_0 relative to the grid's coordinate measure.
  const RVector& mu0_density() const { return mu0_density_; }
  /// log(weight · μ_0 density) per node.
  const RVector& log_mu0_masses() const { return log_mu0_masses_; }

  /// N_k × m matrix of conjugated, h_0^k-trivialized section values.
  CMatrix section_columns(int k) const;

  const RadialGrid* radial() const { return radial_ ? &*radial_ : nullptr; }
  P1Basis basis() const { return basis_; }
  /// log |e_j|^2_{h_0^k} at radial nodes, N_k × M (projective line only).
  RMatrix radial_log_sections(int k) const;
  /// log of the radial quadrature mass of μ_0 (2 w_a on the projective line).
  RVector radial_log_mu0_masses() const;

  /// Per-node masses density · weight.
  RVector node_masses(const RVector& density) const;
  /// Broadcast a radial profile to all nodes.
  RVector broadcast_radial(const RVector& profile) const;

  void require_level(int k) const;

  friend ModelPtr build_p1_model(const P1Options& opts);
  friend ModelPtr build_discrete_model(int points, std::vector<CMatrix> section_values,
                                       RVector base_weights);

 private:
  PolarizedModel() = default;
  void finish();

  int complex_dim_ = 1;
  double volume_ = 1.0;
  int k_max_ = 0;
  QuadratureGrid grid_;
  RVector mu0_density_;
  RVector log_mu0_masses_;
  std::optional<RadialGrid> radial_;
  P1Basis basis_ = P1Basis::Monomial;
  std::vector<CMatrix> discrete_sections_;  // index k - 1
};

ModelPtr build_p1_model(const P1Options& opts);
inline ModelPtr build_p1_model(int k_max, int radial_nodes, int angular_nodes) {
  P1Options o;
  o.k_max = k_max;
  o.radial_nodes = radial_nodes;
  o.angular_nodes = angular_nodes;
  return build_p1_model(o);
}

/// `section_values[k-1]` is N_k × m holding e_i(x) (not conjugated);
/// `base_weights` are the μ_0 masses and must sum to 1.
ModelPtr build_discrete_model(int points, std::vector<CMatrix> section_values,
                              RVector base_weights);

/// Sampled Kähler potential φ on the nodes of a model.
class PotentialField {
 public:
  static PotentialField from_nodes(ModelPtr model, RVector values);
  /// Rotationally symmetric potential given on the radial nodes.
  static PotentialField radial(ModelPtr model, RVector profile);

  const ModelPtr& model() const { return model_; }
  const RVector& values() const { return values_; }
  const std::optional<RVector>& radial_profile() const { return radial_; }
  bool is_radial() const { return radial_.has_value(); }
  /// The radial profile; throws UnsupportedError if absent.
  const RVector& profile() const;

  PotentialField shifted(double c) const;

 private:
  ModelPtr model_;
  RVector values_;
  std::optional<RVector> radial_;
};

/// Named rotationally symmetric families on the projective line.
struct RadialFamily {
  enum class Kind { Bump, Sine };  // amplitude·u(1-u), amplitude·sin(πu)
  Kind kind = Kind::Bump;
  double amplitude = 0.0;

  double operator()(double u, double c) const;
  RVector sample(const RadialGrid& g) const;
  PotentialField on(const ModelPtr& model) const;
};

/// Compensated (Neumaier) sum; fixed order, deterministic.
double compensated_sum(const RVector& v);

/// Σ f · measure.
double integrate(const RVector& f, const RVector& measure);

/// Node masses of dμ_φ = e^{-φ} dμ_0 / ∫ e^{-φ} dμ_0.
RVector canonical_measure(const PotentialField& phi);

/// ω_φ^n density relative to the grid coordinate measure (radial, spectral grid).
RVector ma_density(const PotentialField& phi);

// Radial kernels on a spectral grid, shared by the energy functionals and the
// classical flow. Densities are relative to du on (0, 1).
namespace radial {

/// First and second derivatives of the interpolating polynomial.
std::pair<RVector, RVector> derivatives(const RadialGrid& g, const RVector& f);
/// ω_φ density m(u) = 2 + ((1-u) u φ')' relative to du dθ / 2π.
RVector ma_profile(const RadialGrid& g, const RVector& phi);
/// Probability density of dμ_φ relative to du, and the log normalizer log ∫ e^{-φ} du.
std::pair<RVector, double> canonical_profile(const RadialGrid& g, const RVector& phi);
/// Barycentric interpolation of nodal values to arbitrary points in [0, 1].
RVector interpolate(const RadialGrid& g, const RVector& f, const RVector& points);

}  // namespace radial

/// Gauss-Legendre rule on (0, 1): nodes ascending, with complements 1 - u.
struct GaussLegendre01 {
  RVector u, c, weights;
};
GaussLegendre01 gauss_legendre01(int n);

}  // namespace qkrf
