#pragma once

// The structure maps between Hermitian forms and potentials:
//   fubini_study  f_k : H  -> (1/k) log[(1/N_k) Σ |s_i|^2]   (s_i H-orthonormal)
//   project       p_k : φ  -> ∫ h_0^k(·,·) e^{-kφ} dμ_φ
//   balancing     b_k = p_k ∘ f_k,   beta_map  β_k = f_k ∘ p_k.

#include <span>

#include "qkrf/herm.hpp"
#include "qkrf/model.hpp"

namespace qkrf {

/// Measure used in the L^2 projection. `Canonical` is the anti-canonical
/// setting; `Unnormalized` uses e^{-φ} dμ_0 and quantizes the unnormalized flow.
enum class ProjectionMeasure { Canonical, Unnormalized };

/// Node values of the Bergman sum B_H = (1/N_k) w^† H^{-1} w, kept in log form.
struct BergmanData {
  RVector log_density;  // log B_H at nodes
  RVector potential;    // (1/k) log B_H
};

BergmanData bergman(const ModelPtr& model, const HermForm& h);

PotentialField fubini_study(const ModelPtr& model, const HermForm& h);

HermForm project(const PotentialField& phi, int k,
                 ProjectionMeasure measure = ProjectionMeasure::Canonical);

HermForm balancing(const ModelPtr& model, const HermForm& h,
                   ProjectionMeasure measure = ProjectionMeasure::Canonical);

PotentialField beta_map(const PotentialField& phi, int k);

/// f_k along the ray whose orthonormal frame at time t is
/// e^{weights_a t / 2} frame_a (frame orthonormal for the base form):
/// (1/k) log[(1/N_k) Σ_a e^{weights_a t} |s_a|^2], evaluated by log-sum-exp.
PotentialField fubini_study_ray(const ModelPtr& model, int k, const CMatrix& frame,
                                std::span<const double> weights, double t);

namespace detail {
// Node-by-node evaluations that never take the radial shortcut used for
// diagonal forms and rotationally symmetric potentials on the projective line.
BergmanData bergman_generic(const ModelPtr& model, const HermForm& h);
HermForm project_generic(const PotentialField& phi, int k, ProjectionMeasure measure);
}  // namespace detail

}  // namespace qkrf
