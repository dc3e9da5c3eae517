#include "qkrf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qkrf/error.hpp"

namespace qkrf {
namespace {

constexpr double kTimeTol = 1e-9;

long steps_for(double T, double dt, const char* what) {
  if (!(dt > 0.0) || !(T >= dt * (1.0 - kTimeTol))) {
    std::ostringstream os;
    os << what << ": need dt > 0 and T >= dt (T = " << T << ", dt = " << dt << ")";
    throw ConfigError(os.str());
  }
  const double n = T / dt;
  const long steps = std::lround(n);
  if (std::abs(n - steps) > 1e-6) {
    std::ostringstream os;
    os << what << ": T = " << T << " is not a multiple of dt = " << dt;
    throw ConfigError(os.str());
  }
  return steps;
}

CMatrix symmetric(const CMatrix& q) { return 0.5 * (q + q.adjoint()); }

HermForm form_from_log(int k, const CMatrix& q, double t) {
  try {
    return HermForm(k, matrix_exp(TangentForm{symmetric(q)}));
  } catch (const DomainError& e) {
    std::ostringstream os;
    os << "quantized flow left the positive cone at t = " << t << ": " << e.what();
    throw DomainError(os.str());
  }
}

struct Integrator {
  ModelPtr model;
  ProjectionMeasure measure;
  int k;

  HermForm balance(const HermForm& h) const { return balancing(model, h, measure); }

  // k (log b(H) - log H)
  CMatrix velocity(const CMatrix& q, const HermForm& b) const {
    return static_cast<double>(k) * (matrix_log(b).entries - q);
  }

  // One RK4 step from (Q, H, b(H)); returns the new log and form.
  CMatrix step(const CMatrix& q, const HermForm& b, double dt, double t) const {
    const CMatrix k1 = velocity(q, b);
    const CMatrix q2 = q + 0.5 * dt * k1;
    const CMatrix k2 = velocity(q2, balance(form_from_log(k, q2, t + 0.5 * dt)));
    const CMatrix q3 = q + 0.5 * dt * k2;
    const CMatrix k3 = velocity(q3, balance(form_from_log(k, q3, t + 0.5 * dt)));
    const CMatrix q4 = q + dt * k3;
    const CMatrix k4 = velocity(q4, balance(form_from_log(k, q4, t + dt)));
    return symmetric(q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  }
};

EnergyReport quantized_report(const ModelPtr& model, const HermForm& h, const HermForm& ref,
                              const RVector& norms) {
  EnergyReport r;
  const PotentialField phi = fubini_study(model, h);
  r.L = l_functional(phi);
  r.E_k = e_k(h, ref);
  r.D_k = r.L - r.E_k;
  r.S_k = entropy_from_norms(norms);
  const RadialGrid* g = model->radial();
  if (g && g->spectral() && phi.is_radial()) {
    try {
      r.E = radial::ma_energy(*g, phi.profile());
      r.S = radial::entropy(*g, phi.profile());
    } catch (const DomainError&) {
      // f_k(H) under-resolved on this grid; leave the classical block empty
    }
  }
  return r;
}

void record_quantized(FlowTrace& trace, const ModelPtr& model, double t, const HermForm& h,
                      const HermForm& b) {
  const RVector norms = gen_eig(b, h);
  trace.times.push_back(t);
  trace.forms.push_back(h);
  trace.norms.push_back(norms);
  trace.series.push_back(quantized_report(model, h, *trace.reference, norms));
}

HermForm default_reference(const ModelPtr& model, int k) {
  return project(PotentialField::from_nodes(model, RVector::Zero(model->node_count())), k);
}

HermForm zero_reference(const ModelPtr& model, int k) {
  if (model->radial())
    return project(PotentialField::radial(model, RVector::Zero(model->radial()->size())), k);
  return default_reference(model, k);
}

void continue_quantized(const ModelPtr& model, FlowTrace& trace, ProjectionMeasure measure,
                        long first_step, long last_step) {
  const int k = trace.level;
  const Integrator in{model, measure, k};
  HermForm h = trace.forms.back();
  HermForm b = in.balance(h);
  CMatrix q = matrix_log(h).entries;
  for (long n = first_step; n < last_step; ++n) {
    const double t = n * trace.dt;
    q = in.step(q, b, trace.dt, t);
    h = form_from_log(k, q, t + trace.dt);
    b = in.balance(h);
    if ((n + 1) % trace.sample_every == 0 || n + 1 == last_step)
      record_quantized(trace, model, (n + 1) * trace.dt, h, b);
  }
}

double logsumexp(const RVector& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// ∂φ/∂t = log(m/2) + φ + log ∫ e^{-φ} du; empty optional when m ≤ 0 somewhere.
std::optional<RVector> classical_rhs(const RadialGrid& g, const RVector& phi) {
  const RVector m = radial::ma_profile(g, phi);
  if (!(m.minCoeff() > 0.0)) return std::nullopt;
  const double lse = logsumexp(g.weights.array().log().matrix() - phi);
  return RVector((0.5 * m.array()).log() + phi.array() + lse);
}

std::optional<RVector> classical_rk4(const RadialGrid& g, const RVector& phi, double dt) {
  const auto k1 = classical_rhs(g, phi);
  if (!k1) return std::nullopt;
  const auto k2 = classical_rhs(g, phi + 0.5 * dt * *k1);
  if (!k2) return std::nullopt;
  const auto k3 = classical_rhs(g, phi + 0.5 * dt * *k2);
  if (!k3) return std::nullopt;
  const auto k4 = classical_rhs(g, phi + dt * *k3);
  if (!k4) return std::nullopt;
  RVector next = phi + (dt / 6.0) * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);
  if (!(radial::ma_profile(g, next).minCoeff() > 0.0)) return std::nullopt;
  return next;
}

// Advances by dt, halving on density-positivity rejection.
RVector classical_advance(const RadialGrid& g, const RVector& phi, double dt, double t,
                          int halvings_left) {
  if (auto next = classical_rk4(g, phi, dt)) return *next;
  if (halvings_left == 0) {
    std::ostringstream os;
    os << "classical flow left the Kähler cone at t = " << t
       << " (Monge-Ampère density nonpositive after step halving)";
    throw DomainError(os.str());
  }
  const RVector mid = classical_advance(g, phi, 0.5 * dt, t, halvings_left - 1);
  return classical_advance(g, mid, 0.5 * dt, t + 0.5 * dt, halvings_left - 1);
}

void record_classical(FlowTrace& trace, const RadialGrid& g, double t, const RVector& phi) {
  EnergyReport r;
  r.E = radial::ma_energy(g, phi);
  r.L = radial::l_functional(g, phi);
  r.S = radial::entropy(g, phi);
  trace.times.push_back(t);
  trace.profiles.push_back(phi);
  trace.series.push_back(r);
}

const RadialGrid& classical_grid(const ModelPtr& model) {
  const RadialGrid* g = model->radial();
  if (!g || !g->spectral())
    throw UnsupportedError("classical flow needs a projective-line model with the Gauss-Legendre radial rule");
  return *g;
}

void continue_classical(const RadialGrid& g, FlowTrace& trace, long first_step, long last_step,
                        int max_halvings) {
  RVector phi = trace.profiles.back();
  for (long n = first_step; n < last_step; ++n) {
    phi = classical_advance(g, phi, trace.dt, n * trace.dt, max_halvings);
    if ((n + 1) % trace.sample_every == 0 || n + 1 == last_step)
      record_classical(trace, g, (n + 1) * trace.dt, phi);
  }
}

}  // namespace

std::string to_string(FlowKind kind) {
  switch (kind) {
    case FlowKind::Quantized: return "quantized";
    case FlowKind::Bergman: return "bergman";
    case FlowKind::Classical: return "classical";
  }
  return "quantized";
}

FlowKind flow_kind_from_string(const std::string& s) {
  if (s == "quantized") return FlowKind::Quantized;
  if (s == "bergman") return FlowKind::Bergman;
  if (s == "classical") return FlowKind::Classical;
  throw ConfigError("unknown flow kind '" + s + "'");
}

std::size_t FlowTrace::index_of(double t) const {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= kTimeTol * std::max(1.0, std::abs(t))) return i;
  std::ostringstream os;
  os << "time " << t << " not in trace";
  throw ConfigError(os.str());
}

FlowTrace quantized_flow_run(const ModelPtr& model, const HermForm& h0,
                             const QuantizedFlowOptions& opts) {
  const int k = h0.level();
  model->require_level(k);
  if (opts.sample_every < 1) throw ConfigError("quantized_flow_run: sample_every must be >= 1");
  FlowTrace trace;
  trace.kind = FlowKind::Quantized;
  trace.level = k;
  trace.dt = opts.dt > 0.0 ? opts.dt : 1.0 / (4.0 * k);
  trace.sample_every = opts.sample_every;
  trace.reference = opts.reference ? *opts.reference : zero_reference(model, k);
  const long steps = steps_for(opts.T, trace.dt, "quantized_flow_run");
  trace.measure = opts.measure;
  record_quantized(trace, model, 0.0, h0, balancing(model, h0, opts.measure));
  continue_quantized(model, trace, opts.measure, 0, steps);
  return trace;
}

FlowTrace quantized_flow_resume(const ModelPtr& model, FlowTrace trace, double T) {
  if (trace.kind != FlowKind::Quantized || trace.forms.empty())
    throw ConfigError("quantized_flow_resume: not a quantized trace with states");
  if (!trace.reference) trace.reference = zero_reference(model, trace.level);
  const long done = std::lround(trace.times.back() / trace.dt);
  const long total = steps_for(T, trace.dt, "quantized_flow_resume");
  if (total > done) continue_quantized(model, trace, trace.measure, done, total);
  return trace;
}

FlowTrace bergman_iterate(const ModelPtr& model, const HermForm& h0, int steps,
                          std::optional<HermForm> reference) {
  if (steps < 1) throw ConfigError("bergman_iterate: steps must be >= 1");
  const int k = h0.level();
  FlowTrace trace;
  trace.kind = FlowKind::Bergman;
  trace.level = k;
  trace.dt = 1.0 / k;
  trace.reference = reference ? *reference : zero_reference(model, k);
  HermForm h = h0;
  HermForm b = balancing(model, h);
  record_quantized(trace, model, 0.0, h, b);
  for (int j = 1; j <= steps; ++j) {
    h = b;
    b = balancing(model, h);
    record_quantized(trace, model, j * trace.dt, h, b);
  }
  return trace;
}

double classical_stable_dt(const RadialGrid& g, const RVector& phi) {
  const RVector m = radial::ma_profile(g, phi);
  if (!(m.minCoeff() > 0.0)) throw DomainError("classical_stable_dt: potential is not admissible");
  // The collocated operator (u(1-u)ψ')' has eigenvalues -n(n+1), n < M.
  const double mdim = static_cast<double>(g.size());
  const double spectral_radius = mdim * (mdim - 1.0) / m.minCoeff() + 2.0;
  return 2.0 / spectral_radius;
}

FlowTrace classical_krf_run(const PotentialField& phi0, const ClassicalFlowOptions& opts) {
  const RadialGrid& g = classical_grid(phi0.model());
  const RVector& start = phi0.profile();
  const double dt_max = opts.dt > 0.0 ? opts.dt : classical_stable_dt(g, start);
  FlowTrace trace;
  trace.kind = FlowKind::Classical;
  trace.level = 0;
  long steps = 0;
  if (opts.sample_interval > 0.0) {
    const long per = static_cast<long>(std::ceil(opts.sample_interval / dt_max - 1e-12));
    trace.sample_every = static_cast<int>(per);
    trace.dt = opts.sample_interval / per;
    steps = steps_for(opts.T, opts.sample_interval, "classical_krf_run") * per;
  } else {
    steps = static_cast<long>(std::ceil(opts.T / dt_max - 1e-12));
    trace.dt = opts.T / steps;
    trace.sample_every = 1;
  }
  record_classical(trace, g, 0.0, start);
  continue_classical(g, trace, 0, steps, opts.max_halvings);
  return trace;
}

FlowTrace classical_krf_resume(const ModelPtr& model, FlowTrace trace, double T) {
  if (trace.kind != FlowKind::Classical || trace.profiles.empty())
    throw ConfigError("classical_krf_resume: not a classical trace with states");
  const RadialGrid& g = classical_grid(model);
  if (trace.profiles.back().size() != g.size())
    throw DimensionError("classical_krf_resume: profile length differs from the model grid");
  const long done = std::lround(trace.times.back() / trace.dt);
  const long total = steps_for(T, trace.dt, "classical_krf_resume");
  if (total > done) continue_classical(g, trace, done, total, 8);
  return trace;
}

DecayFit fit_decay(const std::vector<double>& k_values, const std::vector<double>& errors) {
  if (k_values.size() != errors.size()) throw DimensionError("fit_decay: length mismatch");
  const std::size_t n = k_values.size();
  if (n < 3) throw ConfigError("fit_decay: need at least 3 points");
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(errors[i] > 0.0) || !(k_values[i] > 0.0))
      throw DomainError("fit_decay: errors and k values must be positive");
    x[i] = std::log(k_values[i]);
    y[i] = std::log(errors[i]);
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_decay: k values must not all coincide");
  DecayFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ssr += r * r;
  }
  fit.half_width = n > 2 ? 2.0 * std::sqrt(ssr / (n - 2) / sxx) : 0.0;
  return fit;
}

GapReport euler_gap_report(const ModelPtr& model, const PotentialField& phi0,
                           const std::vector<int>& k_list, const EulerGapOptions& opts) {
  if (opts.substeps < 1) throw ConfigError("euler_gap_report: substeps must be >= 1");
  GapReport report;
  std::vector<double> ks, gaps;
  for (int k : k_list) {
    const HermForm h0 = project(phi0, k);
    QuantizedFlowOptions qo;
    qo.T = opts.T;
    qo.dt = 1.0 / (static_cast<double>(k) * opts.substeps);
    qo.sample_every = opts.substeps;
    const FlowTrace flow = quantized_flow_run(model, h0, qo);
    const int steps = static_cast<int>(std::lround(opts.T * k));
    const FlowTrace iter = bergman_iterate(model, h0, steps);
    GapRow row;
    row.k = k;
    for (int j = 0; j <= steps; ++j) {
      const double gap = log_gap(flow.forms[static_cast<std::size_t>(j)],
                                 iter.forms[static_cast<std::size_t>(j)]);
      if (gap > row.gap) {
        row.gap = gap;
        row.at_time = static_cast<double>(j) / k;
      }
    }
    report.rows.push_back(row);
    ks.push_back(k);
    gaps.push_back(row.gap);
  }
  if (ks.size() >= 3) report.fit = fit_decay(ks, gaps);
  return report;
}

GapReport flow_vs_krf_gap(const ModelPtr& model, const PotentialField& phi0,
                          const std::vector<int>& k_list, const KrfGapOptions& opts) {
  if (k_list.empty()) throw ConfigError("flow_vs_krf_gap: empty k list");
  long lcm = 1;
  for (int k : k_list) {
    if (k < 1) throw ConfigError("flow_vs_krf_gap: k must be positive");
    lcm = std::lcm(lcm, static_cast<long>(k));
    if (lcm > 4096) throw ConfigError("flow_vs_krf_gap: k list has too large a common multiple");
  }
  ClassicalFlowOptions co = opts.classical;
  co.T = opts.T;
  co.sample_interval = 1.0 / static_cast<double>(lcm);
  const FlowTrace classical = classical_krf_run(phi0, co);

  GapReport report;
  std::vector<double> ks, gaps;
  for (int k : k_list) {
    const HermForm h0 = project(phi0, k);
    const int steps = static_cast<int>(std::lround(opts.T * k));
    GapRow row;
    row.k = k;
    if (steps >= 2) {
      QuantizedFlowOptions qo;
      qo.T = static_cast<double>(steps - 1) / k;
      qo.dt = 1.0 / (static_cast<double>(k) * opts.substeps);
      qo.sample_every = opts.substeps;
      const FlowTrace flow = quantized_flow_run(model, h0, qo);
      for (int j = 0; j + 1 <= steps; ++j) {
        const RVector fk = fubini_study(model, flow.forms[static_cast<std::size_t>(j)]).profile();
        const RVector& phi = classical.profiles[classical.index_of(static_cast<double>(j + 1) / k)];
        const double gap = (phi - fk).cwiseAbs().maxCoeff();
        if (gap > row.gap) {
          row.gap = gap;
          row.at_time = static_cast<double>(j + 1) / k;
        }
      }
    } else {
      const RVector fk = fubini_study(model, h0).profile();
      row.gap = (classical.profiles[classical.index_of(1.0 / k)] - fk).cwiseAbs().maxCoeff();
      row.at_time = 1.0 / k;
    }
    report.rows.push_back(row);
    ks.push_back(k);
    gaps.push_back(row.gap);
  }
  if (ks.size() >= 3) report.fit = fit_decay(ks, gaps);
  return report;
}

SlopeResidual slope_identity_check(const FlowTrace& trace) {
  if (trace.size() < 3) throw ConfigError("slope_identity_check: trace needs at least 3 samples");
  SlopeResidual out;
  for (std::size_t j = 0; j + 1 < trace.size(); ++j) {
    const double h = trace.times[j + 1] - trace.times[j];
    const double dl = (trace.series[j + 1].L - trace.series[j].L) / h;
    const double r = std::abs(trace.series[j].S_k + dl);
    out.times.push_back(trace.times[j]);
    out.residual.push_back(r);
    out.max_residual = std::max(out.max_residual, r);
  }
  return out;
}

SlopeResidual classical_slope_check(const FlowTrace& trace) {
  if (trace.size() < 5) throw ConfigError("classical_slope_check: trace needs at least 5 samples");
  SlopeResidual out;
  for (std::size_t j = 2; j + 2 < trace.size(); ++j) {
    const double h = trace.times[j + 1] - trace.times[j];
    const auto& s = trace.series;
    const double dl = (-s[j + 2].L + 8.0 * s[j + 1].L - 8.0 * s[j - 1].L + s[j - 2].L) / (12.0 * h);
    const double r = std::abs(s[j].S + dl) / std::max(std::abs(s[j].S), 1e-300);
    out.times.push_back(trace.times[j]);
    out.residual.push_back(r);
    out.max_residual = std::max(out.max_residual, r);
  }
  return out;
}

MonotonicityReport monotonicity_probe(const FlowTrace& trace) {
  MonotonicityReport out;
  if (trace.size() < 2 || trace.norms.size() != trace.size()) return out;
  const int k = trace.level;
  out.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < trace.size(); ++j) {
    const double h = trace.times[j + 1] - trace.times[j];
    const RVector& b = trace.norms[j];
    const double n = static_cast<double>(b.size());
    double rel = 0.0, logsum = 0.0;  // Σ B^{-1} log B^{-1}, Σ log B
    for (double bi : b) {
      rel -= std::log(bi) / bi;
      logsum += std::log(bi);
    }
    const double ds = (trace.series[j + 1].S_k - trace.series[j].S_k) / h;
    const double bound = (k + 1.0) / n * rel * rel;
    out.times.push_back(trace.times[j]);
    out.ds_dt.push_back(ds);
    out.bound.push_back(bound);
    out.bound_alt.push_back((k + 1.0) / n * logsum * logsum);
    out.margin.push_back(ds - bound);
    out.worst_margin = std::max(out.worst_margin, ds - bound);
  }
  return out;
}

}  // namespace qkrf
