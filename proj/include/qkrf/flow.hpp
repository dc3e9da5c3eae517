#pragma once

// Time evolution of forms and potentials:
//   quantized flow   (1/k) d(log H)/dt = log b_k(H) - log H, RK4 on Q = log H
//   Bergman iteration H^{(j+1)} = b_k(H^{(j)})
//   classical flow   ∂φ/∂t = -log[dμ_φ / (V^{-1} ω_φ)] for radial φ on the projective line
// and the gap, slope and monotonicity reports built on them.

#include <optional>
#include <string>
#include <vector>

#include "qkrf/energy.hpp"
#include "qkrf/herm.hpp"
#include "qkrf/model.hpp"
#include "qkrf/quantization.hpp"

namespace qkrf {

enum class FlowKind { Quantized, Bergman, Classical };

std::string to_string(FlowKind kind);
FlowKind flow_kind_from_string(const std::string& s);

struct FlowTrace {
  FlowKind kind = FlowKind::Quantized;
  int level = 0;             // 0 for classical runs
  double dt = 0.0;           // integrator step (1/k for Bergman)
  int sample_every = 1;      // integrator steps between samples
  ProjectionMeasure measure = ProjectionMeasure::Canonical;
  std::vector<double> times;
  std::vector<HermForm> forms;      // quantized and Bergman runs
  std::vector<RVector> profiles;    // classical runs, radial node values
  std::vector<EnergyReport> series;
  // Simultaneous spectrum B_i = gen_eig(b_k(H_t), H_t), ascending, per sample.
  std::vector<RVector> norms;
  std::optional<HermForm> reference;  // H0 of E_k

  std::size_t size() const { return times.size(); }
  /// Index of the sample at time t (within 1e-9), or throws ConfigError.
  std::size_t index_of(double t) const;
};

struct QuantizedFlowOptions {
  double T = 1.0;
  double dt = 0.0;  // 0 selects 1/(4k)
  int sample_every = 1;
  ProjectionMeasure measure = ProjectionMeasure::Canonical;
  std::optional<HermForm> reference;  // defaults to p_k(0)
};

FlowTrace quantized_flow_run(const ModelPtr& model, const HermForm& h0,
                             const QuantizedFlowOptions& opts);
/// Continues a quantized trace (e.g. loaded from a checkpoint) up to time T
/// with the trace's step size and sampling.
FlowTrace quantized_flow_resume(const ModelPtr& model, FlowTrace trace, double T);

FlowTrace bergman_iterate(const ModelPtr& model, const HermForm& h0, int steps,
                          std::optional<HermForm> reference = std::nullopt);

struct ClassicalFlowOptions {
  double T = 1.0;
  double dt = 0.0;               // 0 selects the largest stable step dividing `sample_interval`
  double sample_interval = 0.0;  // 0 records every step
  int max_halvings = 8;
};

/// Radial classical flow on the model's spectral radial grid.
FlowTrace classical_krf_run(const PotentialField& phi0, const ClassicalFlowOptions& opts);
FlowTrace classical_krf_resume(const ModelPtr& model, FlowTrace trace, double T);

/// Largest RK4-stable step for the radial flow at φ.
double classical_stable_dt(const RadialGrid& g, const RVector& phi);

struct DecayFit {
  double slope = 0.0;
  double half_width = 0.0;
  double intercept = 0.0;
};

/// Least squares of log(error) against log(k); half-width is 2 standard errors.
DecayFit fit_decay(const std::vector<double>& k_values, const std::vector<double>& errors);

struct GapRow {
  int k = 0;
  double gap = 0.0;
  double at_time = 0.0;
};

struct GapReport {
  std::vector<GapRow> rows;
  DecayFit fit;
};

struct EulerGapOptions {
  double T = 1.0;
  int substeps = 8;  // RK4 steps per 1/k
};

/// max_{j/k ≤ T} log_gap(H_{j/k}, b_k^j(H0)) with H0 = p_k(φ0) for each k.
GapReport euler_gap_report(const ModelPtr& model, const PotentialField& phi0,
                           const std::vector<int>& k_list, const EulerGapOptions& opts);

struct KrfGapOptions {
  double T = 1.0;
  int substeps = 8;
  ClassicalFlowOptions classical;  // T and sample_interval are filled in
};

/// sup over radial nodes of |φ_{(j+1)/k} - f_k(H_{j/k})|, (j+1)/k ≤ T, quantized
/// flow started at p_k(φ0). The classical run uses the model's radial grid.
GapReport flow_vs_krf_gap(const ModelPtr& model, const PotentialField& phi0,
                          const std::vector<int>& k_list, const KrfGapOptions& opts);

struct SlopeResidual {
  std::vector<double> times;
  std::vector<double> residual;  // |S_k(H_t) + forward difference of L∘f_k|
  double max_residual = 0.0;
};

SlopeResidual slope_identity_check(const FlowTrace& trace);

/// |S_k - (-dL/dt)| along a classical trace, relative to max(S, floor).
SlopeResidual classical_slope_check(const FlowTrace& trace);

struct MonotonicityReport {
  std::vector<double> times;
  std::vector<double> ds_dt;      // forward difference of S_k
  std::vector<double> bound;      // (k+1)/N (Σ_i B_i^{-1} log B_i^{-1})^2
  std::vector<double> bound_alt;  // (k+1)/N (Σ_i log B_i)^2
  std::vector<double> margin;     // ds_dt - bound
  double worst_margin = 0.0;      // max of margin
};

MonotonicityReport monotonicity_probe(const FlowTrace& trace);

}  // namespace qkrf
