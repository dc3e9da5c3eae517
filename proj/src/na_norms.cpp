#include "qkrf/na_norms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "qkrf/energy.hpp"
#include "qkrf/error.hpp"
#include "qkrf/quantization.hpp"

namespace qkrf {
namespace {

double ray_l(const ModelPtr& model, int k, const CMatrix& frame, const std::vector<double>& w,
             double t) {
  return l_functional(fubini_study_ray(model, k, frame, w, t));
}

// Neville extrapolation of values sampled at x_i to x = 0; returns the table's
// top row (orders 0..n-1).
std::vector<double> extrapolate_to_zero(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> p = y;
  std::vector<double> top{p[0]};
  for (std::size_t m = 1; m < n; ++m) {
    for (std::size_t i = 0; i + m < n; ++i)
      p[i] = (x[i] * p[i + 1] - x[i + m] * p[i]) / (x[i] - x[i + m]);
    top.push_back(p[0]);
  }
  return top;
}

}  // namespace

NAForm::NAForm(int level, CMatrix basis, std::vector<double> weights)
    : level_(level), basis_(std::move(basis)), weights_(std::move(weights)) {
  if (level_ < 1) throw ConfigError("NAForm: level must be >= 1");
  const auto n = static_cast<Eigen::Index>(weights_.size());
  if (n == 0 || basis_.rows() != n || basis_.cols() != n)
    throw DimensionError("NAForm: basis must be N x N with N weights");
  for (std::size_t i = 1; i < weights_.size(); ++i)
    if (weights_[i] > weights_[i - 1]) throw DomainError("NAForm: weights must be descending");
  const Eigen::JacobiSVD<CMatrix> svd(basis_);
  const RVector sv = svd.singularValues();
  if (!(sv(n - 1) > 1e-13 * sv(0))) throw DomainError("NAForm: adapted basis is not invertible");
  condition_ = sv(0) / sv(n - 1);
}

NAForm NAForm::sorted(int level, CMatrix basis, std::vector<double> weights) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  CMatrix b(basis.rows(), basis.cols());
  std::vector<double> w(weights.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    b.col(static_cast<Eigen::Index>(i)) = basis.col(static_cast<Eigen::Index>(order[i]));
    w[i] = weights[order[i]];
  }
  return NAForm(level, std::move(b), std::move(w));
}

NAForm NAForm::trivial(int level, int dim) {
  return NAForm(level, CMatrix::Identity(dim, dim), std::vector<double>(static_cast<std::size_t>(dim), 0.0));
}

NAForm NAForm::translated(double c) const {
  std::vector<double> w = weights_;
  for (double& x : w) x += c;
  return NAForm(level_, basis_, std::move(w));
}

double na_norm_value(const NAForm& nu, const CVector& s) {
  if (s.size() != nu.dim()) throw DimensionError("na_norm_value: section has wrong dimension");
  const CVector coeff = nu.basis().fullPivLu().solve(s);
  const double largest = coeff.cwiseAbs().maxCoeff();
  if (!(largest > 0.0)) throw DomainError("na_norm_value: zero section");
  // weights descend, so the last nonzero component has the largest e^{-λ}
  for (Eigen::Index i = coeff.size() - 1; i >= 0; --i)
    if (std::abs(coeff(i)) > 1e-10 * largest) return std::exp(-nu.weights()[static_cast<std::size_t>(i)]);
  return std::exp(-nu.weights().front());
}

DHMeasure dh_empirical(const NAForm& nu) {
  DHMeasure d;
  const double n = nu.dim();
  for (double w : nu.weights()) {
    d.atoms.push_back(w / nu.level());
    d.masses.push_back(1.0 / n);
  }
  d.mean = std::accumulate(d.atoms.begin(), d.atoms.end(), 0.0) / n;
  for (double a : d.atoms) d.second_moment += (a - d.mean) * (a - d.mean) / n;
  d.norm2 = std::sqrt(d.second_moment);
  return d;
}

double f_k_na(const NAForm& nu) { return f_k_na(nu.weights(), nu.level()); }

SlopeEstimate l_na_slope(const ModelPtr& model, const NAForm& nu, const HermForm& h0,
                         const SlopeOptions& opts) {
  if (!(opts.t_max >= 10.0)) throw ConfigError("l_na_slope: t_max must be >= 10");
  if (opts.levels < 2) throw ConfigError("l_na_slope: need at least 2 levels");
  if (!(opts.step > 0.0) || opts.step >= opts.t_max / (1 << (opts.levels - 1)))
    throw ConfigError("l_na_slope: finite-difference step too large for the smallest time");
  if (h0.level() != nu.level() || h0.dim() != nu.dim())
    throw DimensionError("l_na_slope: base form and norm differ in level or dimension");
  const CMatrix frame = orthonormalize_flag(h0, nu.basis());
  SlopeEstimate est;
  std::vector<double> x;
  for (int j = 0; j < opts.levels; ++j) {
    const double t = opts.t_max / static_cast<double>(1 << j);
    const double d = (ray_l(model, nu.level(), frame, nu.weights(), t) -
                      ray_l(model, nu.level(), frame, nu.weights(), t - opts.step)) /
                     opts.step;
    est.times.push_back(t);
    est.differences.push_back(d);
    x.push_back(1.0 / (t - 0.5 * opts.step));
  }
  const std::vector<double> top = extrapolate_to_zero(x, est.differences);
  est.value = top.back();
  est.uncertainty = std::abs(top.back() - top[top.size() - 2]);
  est.converged = est.uncertainty <= opts.tolerance;
  return est;
}

NAEntropy s_k_na(const ModelPtr& model, const NAForm& nu, const HermForm& h0,
                 const SlopeOptions& opts) {
  const SlopeEstimate slope = l_na_slope(model, nu, h0, opts);
  NAEntropy out;
  out.l_na = slope.value;
  out.f_na = f_k_na(nu);
  out.value = out.l_na - out.f_na;
  out.uncertainty = slope.uncertainty;
  out.converged = slope.converged;
  return out;
}

NAForm extract_na_from_flow(const ModelPtr& model, const FlowTrace& trace, double t) {
  if (trace.kind == FlowKind::Classical) throw ConfigError("extract_na_from_flow: classical trace");
  const HermForm& h = trace.forms.at(trace.index_of(t));
  const SimultaneousFrame f = orthonormal_orthogonal(h, balancing(model, h, trace.measure));
  std::vector<double> w(static_cast<std::size_t>(f.norms.size()));
  for (Eigen::Index i = 0; i < f.norms.size(); ++i)
    w[static_cast<std::size_t>(i)] = -h.level() * std::log(f.norms(i));
  return NAForm::sorted(h.level(), f.frame, std::move(w));
}

double extraction_residual(const ModelPtr& model, const FlowTrace& trace, double t) {
  const NAForm nu = extract_na_from_flow(model, trace, t);
  const HermForm& h = trace.forms.at(trace.index_of(t));
  const HermForm b = balancing(model, h, trace.measure);
  const double n = h.dim();
  double linear = 0.0;
  for (Eigen::Index i = 0; i < h.dim(); ++i) {
    const CVector s = nu.basis().col(i);
    const double bi = std::real((s.adjoint() * b.entries() * s)(0, 0));
    linear += nu.weights()[static_cast<std::size_t>(i)] / nu.level() * bi / n;
  }
  return s_k(model, h) + (linear - f_k_na(nu));
}

DualityReport duality_gap(const ModelPtr& model, int k, const PotentialField& phi0,
                          const DualityOptions& opts) {
  model->require_level(k);
  DualityReport rep;
  rep.k = k;
  const HermForm h_start = project(phi0, k);
  QuantizedFlowOptions qo;
  qo.T = opts.T;
  qo.dt = opts.dt > 0.0 ? opts.dt : 1.0 / (4.0 * k);
  qo.sample_every = opts.sample_every;
  rep.trace = quantized_flow_run(model, h_start, qo);
  const FlowTrace& tr = rep.trace;

  rep.min_s_k = tr.series.front().S_k;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.series[i].S_k < rep.min_s_k) {
      rep.min_s_k = tr.series[i].S_k;
      rep.min_s_k_time = tr.times[i];
    }
    rep.extraction_identity =
        std::max(rep.extraction_identity, std::abs(extraction_residual(model, tr, tr.times[i])));
  }
  rep.final_s_k = tr.series.back().S_k;
  rep.near_stationary = rep.final_s_k <= opts.stationarity;

  const double t_final = tr.times.back();
  const HermForm& h_final = tr.forms.back();
  const NAForm extracted = extract_na_from_flow(model, tr, t_final);
  const NAEntropy ext = s_k_na(model, extracted, h_final, opts.slope);
  rep.extracted_neg_s_na = -ext.value;
  rep.extracted_uncertainty = ext.uncertainty;

  // panel: trivial norm plus seeded diagonal norms on permuted monomial flags
  const int n = model->dim(k);
  const HermForm base = project(PotentialField::radial(model, RVector::Zero(model->radial()->size())), k);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-opts.panel_scale, opts.panel_scale);
  std::vector<NAForm> norms{NAForm::trivial(k, n), extracted};
  for (int p = 0; p < opts.panel_size; ++p) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    CMatrix basis = CMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i) basis(perm[static_cast<std::size_t>(i)], i) = 1.0;
    std::vector<double> w(static_cast<std::size_t>(n));
    for (double& x : w) x = unif(rng);
    std::sort(w.begin(), w.end(), std::greater<>());
    norms.emplace_back(k, basis, w);
  }
  rep.one_sided_ok = true;
  rep.panel_max_neg_s_na = -std::numeric_limits<double>::infinity();
  for (const NAForm& nu : norms) {
    PanelEntry e{nu, s_k_na(model, nu, base, opts.slope), false};
    e.one_sided_ok = -e.entropy.value <= rep.min_s_k + e.entropy.uncertainty + opts.tolerance;
    rep.one_sided_ok = rep.one_sided_ok && e.one_sided_ok;
    if (-e.entropy.value > rep.panel_max_neg_s_na) {
      rep.panel_max_neg_s_na = -e.entropy.value;
      rep.panel_max_uncertainty = e.entropy.uncertainty;
    }
    rep.panel.push_back(std::move(e));
  }
  // base-point cross-check on the last random member
  const NAForm& probe = norms.back();
  rep.base_point_spread = std::abs(l_na_slope(model, probe, base, opts.slope).value -
                                   l_na_slope(model, probe, h_start, opts.slope).value);
  rep.gap = std::abs(rep.min_s_k - std::max(rep.panel_max_neg_s_na, rep.extracted_neg_s_na));
  return rep;
}

}  // namespace qkrf
