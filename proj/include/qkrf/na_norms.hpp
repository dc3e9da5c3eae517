#pragma once

// Non-Archimedean norms on the level-k section space, encoded by an adapted
// basis and descending weights, and the slope data L^NA∘f_k, F_k^NA, S_k^NA
// evaluated along Fubini-Study geodesic rays.

#include <cstdint>
#include <vector>

#include "qkrf/flow.hpp"
#include "qkrf/herm.hpp"
#include "qkrf/model.hpp"

namespace qkrf {

class NAForm {
 public:
  /// Throws unless weights are descending and the basis is invertible.
  NAForm(int level, CMatrix basis, std::vector<double> weights);
  /// Reorders columns so the weights descend.
  static NAForm sorted(int level, CMatrix basis, std::vector<double> weights);
  static NAForm trivial(int level, int dim);

  int level() const { return level_; }
  int dim() const { return static_cast<int>(weights_.size()); }
  const CMatrix& basis() const { return basis_; }
  const std::vector<double>& weights() const { return weights_; }
  double condition() const { return condition_; }

  NAForm translated(double c) const;

 private:
  int level_;
  CMatrix basis_;
  std::vector<double> weights_;
  double condition_ = 1.0;
};

/// ν(s) = max over adapted components with nonzero coefficient of e^{-λ_i}.
/// Coefficients below 1e-10 of the largest one count as zero.
double na_norm_value(const NAForm& nu, const CVector& s);

struct DHMeasure {
  std::vector<double> atoms;   // λ_i / k
  std::vector<double> masses;  // 1 / N_k each
  double mean = 0.0;
  double second_moment = 0.0;  // centered
  double norm2 = 0.0;          // sqrt of the centered second moment
};

DHMeasure dh_empirical(const NAForm& nu);

double f_k_na(const NAForm& nu);

struct SlopeOptions {
  double t_max = 80.0;
  double step = 0.5;        // finite-difference width Δ
  int levels = 3;           // evaluation times t_max, t_max/2, ...
  double tolerance = 1e-3;  // convergence threshold on the uncertainty
};

struct SlopeEstimate {
  double value = 0.0;
  double uncertainty = 0.0;
  bool converged = false;
  std::vector<double> times;        // t_max / 2^j
  std::vector<double> differences;  // (L(t) - L(t - Δ)) / Δ
};

/// lim L(f_k(H_t)) / t along the ray from h0 in direction ν, by finite
/// differences and Richardson extrapolation in 1/t.
SlopeEstimate l_na_slope(const ModelPtr& model, const NAForm& nu, const HermForm& h0,
                         const SlopeOptions& opts = {});

struct NAEntropy {
  double value = 0.0;  // L^NA∘f_k - F_k^NA
  double uncertainty = 0.0;
  bool converged = false;
  double l_na = 0.0;
  double f_na = 0.0;
};

NAEntropy s_k_na(const ModelPtr& model, const NAForm& nu, const HermForm& h0,
                 const SlopeOptions& opts = {});

/// Weights -k log B_i on the H-orthonormal, b_k(H)-orthogonal frame of the
/// trace sample at time t.
NAForm extract_na_from_flow(const ModelPtr& model, const FlowTrace& trace, double t);

/// S_k(H) + (Σ(λ_i/k)(B_i/N) + log[(1/N) Σ e^{-λ_i/k}]) for the extracted ν.
double extraction_residual(const ModelPtr& model, const FlowTrace& trace, double t);

struct DualityOptions {
  double T = 4.0;
  double dt = 0.0;  // 0 selects 1/(4k)
  int sample_every = 4;
  int panel_size = 12;
  double panel_scale = 2.0;  // weights drawn uniformly from [-scale, scale]
  std::uint64_t seed = 1;
  SlopeOptions slope;
  double tolerance = 0.05;
  double stationarity = 1e-3;  // S_k threshold for "near stationary"
};

struct PanelEntry {
  NAForm nu;
  NAEntropy entropy;
  bool one_sided_ok = false;
};

struct DualityReport {
  int k = 0;
  double min_s_k = 0.0;
  double min_s_k_time = 0.0;
  double final_s_k = 0.0;
  double extracted_neg_s_na = 0.0;  // -S_k^NA(ν_j) at the final time
  double extracted_uncertainty = 0.0;
  double extraction_identity = 0.0;  // max over samples of |extraction_residual|
  double gap = 0.0;                  // |min S_k - max(-S_k^NA)|
  double panel_max_neg_s_na = 0.0;
  double panel_max_uncertainty = 0.0;
  double base_point_spread = 0.0;    // slope difference between two ray base points
  bool near_stationary = false;
  bool one_sided_ok = false;
  std::vector<PanelEntry> panel;
  FlowTrace trace;
};

/// Quantized flow from p_k(φ0) toward stationarity, extracted norms at the
/// final time, and a seeded panel of diagonal norms on permuted monomial flags.
DualityReport duality_gap(const ModelPtr& model, int k, const PotentialField& phi0,
                          const DualityOptions& opts);

}  // namespace qkrf
