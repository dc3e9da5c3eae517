#pragma once

#include <random>

#include "qkrf/herm.hpp"
#include "qkrf/model.hpp"

namespace qkrf::test {

inline CMatrix random_pd(int n, std::mt19937_64& rng, double spread = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cdouble(g(rng), g(rng));
  return spread * a * a.adjoint() / n + CMatrix::Identity(n, n);
}

// PD form near `base`: base^{1/2} (I + noise) base^{1/2}.
inline HermForm perturbed(const HermForm& base, std::mt19937_64& rng, double size) {
  std::normal_distribution<double> g(0.0, size);
  const int n = base.dim();
  CMatrix x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = cdouble(g(rng), g(rng));
  const CMatrix q = 0.5 * (x + x.adjoint());
  const CMatrix root = matrix_power(base.entries(), 0.5);
  return HermForm(base.level(), root * matrix_exp(TangentForm{q}) * root);
}

// Discrete model with N_k = k + 2 sections on m atoms, random complex values.
inline ModelPtr random_discrete(int k_max, int m, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<CMatrix> levels;
  for (int k = 1; k <= k_max; ++k) {
    CMatrix v(k + 2, m);
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      for (int x = 0; x < m; ++x) v(i, x) = cdouble(g(rng), g(rng));
    levels.push_back(v);
  }
  RVector w(m);
  for (int x = 0; x < m; ++x) w(x) = u(rng);
  w /= w.sum();
  return build_discrete_model(m, std::move(levels), w);
}

}  // namespace qkrf::test
