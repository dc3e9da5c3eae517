#include "qkrf/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "qkrf/energy.hpp"
#include "qkrf/error.hpp"
#include "qkrf/flow.hpp"
#include "qkrf/na_norms.hpp"
#include "qkrf/quantization.hpp"

#ifndef QKRF_VERSION
#define QKRF_VERSION "0.0.0"
#endif

namespace qkrf {
namespace fs = std::filesystem;

std::string version() { return QKRF_VERSION; }

int thread_count() {
  if (const char* env = std::getenv("QKRF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min(v, 256L));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> catalog{
      {"balanced-fixed-point", "p_k(0) is balanced; normalization Σ B_i = N_k on both backends", {1, 2}},
      {"euler-gap", "quantized flow vs Bergman iteration at the times j/k", {3}},
      {"thmA-gap", "f_k of the quantized flow vs the classical flow on a radial grid", {4}},
      {"thmB-entropy", "S_k(p_k(φ)) → S(φ) and classical entropy identities", {5, 10}},
      {"slope-identity", "S_k = -d/dt L∘f_k along the flow; convex-conjugate form of S_k", {6, 7}},
      {"monotonicity", "differential inequality for S_k along seeded quantized runs", {8}},
      {"duality", "min S_k along the flow vs a panel of -S_k^NA", {9}},
      {"na-panel", "slope estimator on seeded norms vs the toric formula", {9}},
  };
  return catalog;
}

namespace {

// ---------------------------------------------------------------- config

const char* rule_name(RadialRule r) { return r == RadialRule::Graded ? "graded" : "gauss-legendre"; }
const char* basis_name(P1Basis b) { return b == P1Basis::Invariant ? "invariant" : "monomial"; }
const char* family_name(RadialFamily::Kind k) { return k == RadialFamily::Kind::Sine ? "sine" : "bump"; }

std::vector<int> range(int a, int b) {
  std::vector<int> v;
  for (int k = a; k <= b; ++k) v.push_back(k);
  return v;
}

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

double get_number(const Json& j, const std::string& path, double lo, double hi) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!(v >= lo && v <= hi)) {
    std::ostringstream os;
    os << "must be in [" << lo << ", " << hi << "], got " << v;
    bad(path, os.str());
  }
  return v;
}

int get_int(const Json& j, const std::string& path, int lo, int hi) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  const long long v = j.get<long long>();
  if (v < lo || v > hi)
    bad(path, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                  std::to_string(v));
  return static_cast<int>(v);
}

std::string get_string(const Json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

void reject_unknown(const Json& j, const std::string& path, const std::set<std::string>& known) {
  if (!j.is_object()) bad(path, "expected an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) bad(path + "." + key, "unknown field");
}

// ---------------------------------------------------------------- metrics

Metric gate(std::string name, int criterion, double value, Comparison c, double lo, double hi,
            std::string artifact) {
  Metric m{std::move(name), criterion, value, c, lo, hi, true, std::move(artifact)};
  m.pass = m.evaluate();
  return m;
}
Metric at_most(std::string name, int criterion, double value, double hi, std::string artifact) {
  return gate(std::move(name), criterion, value, Comparison::AtMost, 0.0, hi, std::move(artifact));
}
Metric below(std::string name, int criterion, double value, double hi, std::string artifact) {
  return gate(std::move(name), criterion, value, Comparison::Below, 0.0, hi, std::move(artifact));
}
Metric at_least(std::string name, int criterion, double value, double lo, std::string artifact) {
  return gate(std::move(name), criterion, value, Comparison::AtLeast, lo, 0.0, std::move(artifact));
}
Metric info(std::string name, double value, std::string artifact) {
  return gate(std::move(name), 0, value, Comparison::Info, 0.0, 0.0, std::move(artifact));
}

const char* comparison_name(Comparison c) {
  switch (c) {
    case Comparison::AtMost: return "<=";
    case Comparison::Below: return "<";
    case Comparison::AtLeast: return ">=";
    case Comparison::Within: return "in";
    case Comparison::Info: return "info";
  }
  return "info";
}

Comparison comparison_from_name(const std::string& s) {
  if (s == "<=") return Comparison::AtMost;
  if (s == "<") return Comparison::Below;
  if (s == ">=") return Comparison::AtLeast;
  if (s == "in") return Comparison::Within;
  if (s == "info") return Comparison::Info;
  throw ConfigError("manifest: unknown comparison '" + s + "'");
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }
double null_or_number(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string fmt(double x) { return format_double(x); }

// ---------------------------------------------------------------- run context

struct Run {
  const ExperimentConfig& cfg;
  RunManifest manifest;

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    write_text(cfg.output_dir / name, csv_table(header, rows));
    manifest.artifacts.push_back(name);
  }
  void json(const std::string& name, const Json& j) {
    write_json(cfg.output_dir / name, j);
    manifest.artifacts.push_back(name);
  }
  void checkpoint(const std::string& name, const FlowTrace& trace) {
    save_checkpoint(cfg.output_dir / name, trace);
    manifest.artifacts.push_back(name + "/states.json");
    manifest.artifacts.push_back(name + "/series.csv");
  }
  void add(Metric m) { manifest.metrics.push_back(std::move(m)); }
};

ModelPtr model_for(const ExperimentConfig& cfg, int radial_factor = 1) {
  P1Options o = cfg.model;
  o.radial_nodes *= radial_factor;
  if (o.angular_nodes == 0) o.angular_nodes = std::max(8, 2 * o.k_max + 1);
  return build_p1_model(o);
}

HermForm zero_projection(const ModelPtr& model, int k) {
  return project(PotentialField::radial(model, RVector::Zero(model->radial()->size())), k);
}

double gram_oracle(P1Basis basis, int k, int j) {
  if (basis == P1Basis::Invariant) return 1.0;
  // ∫ u^j (1-u)^{2k-j} du = j! (2k-j)! / (2k+1)!
  return std::exp(std::lgamma(j + 1.0) + std::lgamma(2.0 * k - j + 1.0) - std::lgamma(2.0 * k + 2.0));
}

double relative_frobenius(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

// ---------------------------------------------------------------- experiments

void balanced_fixed_point(Run& run) {
  const ExperimentConfig& cfg = run.cfg;
  const ModelPtr model = model_for(cfg);
  const int n_k = static_cast<int>(cfg.k_list.size());
  struct Row {
    double residual = 0, entropy = 0, gram = 0;
  };
  std::vector<Row> rows(static_cast<std::size_t>(n_k));
  parallel_for(n_k, [&](int i) {
    const int k = cfg.k_list[static_cast<std::size_t>(i)];
    const HermForm h = zero_projection(model, k);
    Row& r = rows[static_cast<std::size_t>(i)];
    r.residual = relative_frobenius(balancing(model, h).entries(), h.entries());
    r.entropy = s_k(model, h);
    for (int j = 0; j < h.dim(); ++j) {
      const CMatrix e = h.entries();
      for (int l = 0; l < h.dim(); ++l) {
        const double oracle = j == l ? gram_oracle(model->basis(), k, j) : 0.0;
        r.gram = std::max(r.gram, std::abs(e(j, l) - oracle));
      }
    }
  });
  std::vector<std::vector<std::string>> table;
  double worst_res = 0, worst_s = 0, gram_k1 = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < n_k; ++i) {
    const Row& r = rows[static_cast<std::size_t>(i)];
    const int k = cfg.k_list[static_cast<std::size_t>(i)];
    table.push_back({std::to_string(k), fmt(r.residual), fmt(r.entropy), fmt(r.gram)});
    worst_res = std::max(worst_res, r.residual);
    worst_s = std::max(worst_s, std::abs(r.entropy));
    if (k == 1) gram_k1 = r.gram;
  }
  run.csv("balanced.csv", {"k", "residual", "S_k", "gram_error"}, table);
  run.add(at_most("fixed_point_residual_max", 1, worst_res, 1e-9, "balanced.csv"));
  run.add(at_most("fixed_point_S_k_max", 1, worst_s, 1e-9, "balanced.csv"));
  if (std::isfinite(gram_k1)) run.add(at_most("gram_error_k1", 1, gram_k1, 1e-10, "balanced.csv"));

  // normalization identity on both backends
  std::mt19937_64 rng(cfg.seed);
  ModelPtr discrete;
  if (!cfg.discrete_model.empty()) {
    discrete = load_discrete_model(cfg.discrete_model);
  } else {
    const int kd = std::min(3, cfg.model.k_max);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> w(0.5, 1.5);
    const int points = 12;
    std::vector<CMatrix> levels;
    for (int k = 1; k <= kd; ++k) {
      CMatrix v(k + 2, points);
      for (Eigen::Index a = 0; a < v.rows(); ++a)
        for (int x = 0; x < points; ++x) v(a, x) = cdouble(g(rng), g(rng));
      levels.push_back(v);
    }
    RVector weights(points);
    for (int x = 0; x < points; ++x) weights(x) = w(rng);
    weights /= compensated_sum(weights);
    discrete = build_discrete_model(points, std::move(levels), weights);
  }
  std::vector<std::vector<std::string>> norm_rows;
  double worst_norm = 0.0;
  const std::pair<const char*, ModelPtr> backends[] = {{"projective-line", model}, {"discrete", discrete}};
  for (const auto& [name, m] : backends) {
    for (int k = 1; k <= std::min(3, m->k_max()); ++k) {
      for (int t = 0; t < cfg.trials; ++t) {
        const HermForm h = random_form(k, m->dim(k), rng);
        const double err = std::abs(gen_eig(balancing(m, h), h).sum() - m->dim(k));
        worst_norm = std::max(worst_norm, err);
        norm_rows.push_back({name, std::to_string(k), std::to_string(t), fmt(err)});
      }
    }
  }
  run.csv("normalization.csv", {"backend", "k", "trial", "abs_error"}, norm_rows);
  run.add(at_most("normalization_error_max", 2, worst_norm, 1e-10, "normalization.csv"));
}

std::vector<std::vector<std::string>> gap_table(const GapReport& rep) {
  std::vector<std::vector<std::string>> t;
  for (const GapRow& r : rep.rows) t.push_back({std::to_string(r.k), fmt(r.gap), fmt(r.at_time)});
  return t;
}

void add_fit(Run& run, const GapReport& rep, int criterion, const std::string& artifact) {
  run.add(at_most("fitted_slope", criterion, rep.fit.slope, -0.8, artifact));
  run.add(info("fitted_slope_half_width", rep.fit.half_width, artifact));
}

void euler_gap(Run& run) {
  const ExperimentConfig& cfg = run.cfg;
  if (cfg.k_list.size() < 3) bad("config.k_list", "need at least 3 levels for a rate fit");
  const ModelPtr model = model_for(cfg);
  const PotentialField phi0 = cfg.potential.on(model);
  const int n = static_cast<int>(cfg.k_list.size());
  std::vector<GapReport> parts(static_cast<std::size_t>(n));
  parallel_for(n, [&](int i) {
    parts[static_cast<std::size_t>(i)] = euler_gap_report(
        model, phi0, {cfg.k_list[static_cast<std::size_t>(i)]}, EulerGapOptions{cfg.T, cfg.substeps});
  });
  GapReport rep;
  std::vector<double> ks, gaps;
  for (const GapReport& p : parts) {
    rep.rows.push_back(p.rows.front());
    ks.push_back(p.rows.front().k);
    gaps.push_back(p.rows.front().gap);
  }
  rep.fit = fit_decay(ks, gaps);
  run.csv("euler_gap.csv", {"k", "gap", "at_time"}, gap_table(rep));
  add_fit(run, rep, 3, "euler_gap.csv");
}

void thm_a_gap(Run& run) {
  const ExperimentConfig& cfg = run.cfg;
  if (cfg.k_list.size() < 3) bad("config.k_list", "need at least 3 levels for a rate fit");
  const ModelPtr model = model_for(cfg);
  const PotentialField phi0 = cfg.potential.on(model);
  KrfGapOptions opts;
  opts.T = cfg.T;
  opts.substeps = cfg.substeps;
  const GapReport rep = flow_vs_krf_gap(model, phi0, cfg.k_list, opts);
  run.csv("thmA_gap.csv", {"k", "gap", "at_time"}, gap_table(rep));
  add_fit(run, rep, 4, "thmA_gap.csv");

  // classical self-consistency against a grid with twice the radial nodes
  long lcm = 1;
  for (int k : cfg.k_list) lcm = std::lcm(lcm, static_cast<long>(k));
  ClassicalFlowOptions co;
  co.T = cfg.T;
  co.sample_interval = 1.0 / static_cast<double>(lcm);
  std::vector<FlowTrace> traces(2);
  const ModelPtr fine = model_for(cfg, 2);
  parallel_for(2, [&](int i) {
    traces[static_cast<std::size_t>(i)] =
        classical_krf_run(i == 0 ? phi0 : cfg.potential.on(fine), co);
  });
  const RadialGrid& g = *model->radial();
  std::vector<std::vector<std::string>> rows;
  double worst = 0.0;
  for (std::size_t s = 0; s < traces[0].size(); ++s) {
    const RVector fine_at_coarse = radial::interpolate(*fine->radial(), traces[1].profiles[s], g.u);
    const double d = (fine_at_coarse - traces[0].profiles[s]).cwiseAbs().maxCoeff();
    worst = std::max(worst, d);
    rows.push_back({fmt(traces[0].times[s]), fmt(d)});
  }
  run.csv("self_consistency.csv", {"t", "sup_difference"}, rows);
  run.checkpoint("checkpoints/classical", traces[0]);
  run.add(at_most("classical_self_consistency", 4, worst, 1e-5, "self_consistency.csv"));
}

EntropyTable zero_entropies(const ModelPtr& model, const std::vector<int>& ks) {
  const PotentialField zero = PotentialField::radial(model, RVector::Zero(model->radial()->size()));
  return entropy_convergence_report(zero, ks, zero);
}

void thm_b_entropy(Run& run) {
  const ExperimentConfig& cfg = run.cfg;
  const ModelPtr model = model_for(cfg);
  const ModelPtr fine = model_for(cfg, 2);
  const PotentialField phi0 = cfg.potential.on(model);
  const PotentialField phi_fine = cfg.potential.on(fine);
  EntropyTable table, refined, zero;
  parallel_for(3, [&](int i) {
    if (i == 0) table = entropy_convergence_report(phi0, cfg.k_list, phi_fine);
    if (i == 1) refined = entropy_convergence_report(phi_fine, cfg.k_list, phi_fine);
    if (i == 2) zero = zero_entropies(model, cfg.k_list);
  });
  std::vector<std::vector<std::string>> rows;
  double refine = 0.0, zero_max = 0.0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const EntropyRow& r = table.rows[i];
    const double change = std::abs(r.s_k - refined.rows[i].s_k);
    refine = std::max(refine, change);
    zero_max = std::max(zero_max, std::abs(zero.rows[i].s_k));
    rows.push_back({std::to_string(r.k), fmt(r.s_k), fmt(r.s), fmt(r.diff), fmt(change),
                    fmt(zero.rows[i].s_k)});
  }
  run.csv("entropy.csv", {"k", "S_k", "S", "abs_difference", "refinement_change", "S_k_zero"}, rows);
  run.add(below("difference_max_increase_k_ge_4", 5, table.max_increase, 0.0, "entropy.csv"));
  run.add(at_most("relative_difference_last_k", 5, table.last_relative, 0.02, "entropy.csv"));
  run.add(at_most("zero_potential_S_k_max", 5, zero_max, 1e-8, "entropy.csv"));
  run.add(at_most("refinement_change_max", 5, refine, 1e-8, "entropy.csv"));

  // classical identities
  const RadialGrid& gf = *fine->radial();
  std::vector<std::vector<std::string>> srows;
  const double s_round = radial::entropy(gf, RVector::Zero(gf.size()));
  double s_min = std::numeric_limits<double>::infinity();
  srows.push_back({"round", fmt(0.0), fmt(s_round)});
  for (auto kind : {RadialFamily::Kind::Bump, RadialFamily::Kind::Sine}) {
    for (int a = -3; a <= 3; ++a) {
      if (a == 0) continue;
      const RadialFamily f{kind, 0.2 * a};
      const double s = radial::entropy(gf, f.sample(gf));
      s_min = std::min(s_min, s);
      srows.push_back({family_name(kind), fmt(f.amplitude), fmt(s)});
    }
  }
  run.csv("classical_entropy.csv", {"family", "amplitude", "S"}, srows);
  run.add(at_most("round_entropy_abs", 10, std::abs(s_round), 1e-10, "classical_entropy.csv"));
  run.add(at_least("entropy_min_non_round", 10, s_min, 0.0, "classical_entropy.csv"));

  ClassicalFlowOptions co;
  co.T = cfg.T;
  co.sample_interval = cfg.dt > 0.0 ? cfg.dt : 1.0 / 64.0;
  const FlowTrace flow = classical_krf_run(phi0, co);
  run.checkpoint("checkpoints/classical", flow);
  const SlopeResidual sl = classical_slope_check(flow);
  std::vector<std::vector<std::string>> frows;
  for (std::size_t i = 0; i < sl.times.size(); ++i) {
    const std::size_t j = flow.index_of(sl.times[i]);
    frows.push_back({fmt(sl.times[i]), fmt(flow.series[j].S), fmt(sl.residual[i])});
  }
  run.csv("classical_slope.csv", {"t", "S", "relative_residual"}, frows);
  run.add(at_most("classical_slope_relative_max", 10, sl.max_residual, 1e-3, "classical_slope.csv"));

  // E derivative: d/ds E(φ + sψ) = (1/V) ∫ ψ ω_φ, central differences
  const RadialGrid& g = *model->radial();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const RVector& phi = phi0.profile();
  const RVector mprof = radial::ma_profile(g, phi);
  std::vector<std::vector<std::string>> erows;
  double worst = 0.0;
  for (int t = 0; t < std::max(1, cfg.runs); ++t) {
    const double a = nd(rng), b = nd(rng), c = nd(rng);
    RVector psi(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) psi(i) = a + b * g.u(i) + c * std::sin(3.0 * g.u(i));
    const double h = 1e-4;
    const double fd = (radial::ma_energy(g, phi + h * psi) - radial::ma_energy(g, phi - h * psi)) / (2 * h);
    const double exact = 0.5 * compensated_sum(g.weights.cwiseProduct(psi.cwiseProduct(mprof)));
    const double rel = std::abs(fd - exact) / std::abs(exact);
    worst = std::max(worst, rel);
    erows.push_back({std::to_string(t), fmt(fd), fmt(exact), fmt(rel)});
  }
  run.csv("energy_derivative.csv", {"trial", "finite_difference", "exact", "relative_error"}, erows);
  run.add(at_most("energy_derivative_relative_max", 10, worst, 1e-5, "energy_derivative.csv"));
}

void slope_identity(Run& run) {
  const ExperimentConfig& cfg = run.cfg;
  const ModelPtr model = model_for(cfg);
  std::vector<std::vector<std::string>> rrows, crows;
  double ratio_min = std::numeric_limits<double>::infinity(), ratio_max = 0.0, identity = 0.0;
  double excess = -std::numeric_limits<double>::infinity(), canonical = 0.0;
  std::mt19937_64 rng(cfg.seed);
  for (int k : cfg.k_list) {
    const HermForm base = zero_projection(model, k);
    const double dt = cfg.dt > 0.0 ? cfg.dt : 1.0 / (4.0 * k);
    // commuting case: diagonal seeded starts
    struct Pair {
      HermForm start;
      SlopeResidual coarse, fine;
      double identity = 0.0;
      FlowTrace trace;
    };
    std::vector<Pair> pairs;
    for (int r = 0; r < cfg.runs; ++r) pairs.push_back({diagonal_perturbation(base, rng, cfg.perturbation), {}, {}, 0.0, {}});
    parallel_for(cfg.runs, [&](int r) {
      Pair& p = pairs[static_cast<std::size_t>(r)];
      QuantizedFlowOptions qo;
      qo.T = cfg.T;
      qo.dt = dt;
      p.trace = quantized_flow_run(model, p.start, qo);
      p.coarse = slope_identity_check(p.trace);
      qo.dt = dt / 2;
      p.fine = slope_identity_check(quantized_flow_run(model, p.start, qo));
      for (double t : p.trace.times)
        p.identity = std::max(p.identity, std::abs(extraction_residual(model, p.trace, t)));
    });
    for (int r = 0; r < cfg.runs; ++r) {
      const Pair& p = pairs[static_cast<std::size_t>(r)];
      const double ratio = p.coarse.max_residual / p.fine.max_residual;
      ratio_min = std::min(ratio_min, ratio);
      ratio_max = std::max(ratio_max, ratio);
      identity = std::max(identity, p.identity);
      rrows.push_back({std::to_string(k), std::to_string(r), fmt(dt), fmt(p.coarse.max_residual),
                       fmt(p.fine.max_residual), fmt(ratio), fmt(p.identity)});
      if (r == 0) run.checkpoint("checkpoints/k" + std::to_string(k) + "_run0", p.trace);
    }

    // convex-conjugate form on generic forms
    std::uniform_real_distribution<double> w(-3.0 * k, 3.0 * k);
    for (int f = 0; f < cfg.runs; ++f) {
      const HermForm h = perturbed_form(base, rng, cfg.perturbation);
      const double sk = s_k(model, h);
      const RVector norms = orthonormal_orthogonal(h, balancing(model, h)).norms;
      std::vector<double> lambda(static_cast<std::size_t>(norms.size()));
      for (Eigen::Index i = 0; i < norms.size(); ++i) lambda[static_cast<std::size_t>(i)] = -k * std::log(norms(i));
      const double canon = conjugate_objective(norms, lambda, k);
      double best = -std::numeric_limits<double>::infinity();
      for (int t = 0; t < cfg.trials; ++t) {
        std::vector<double> trial(lambda.size());
        for (double& x : trial) x = w(rng);
        best = std::max(best, conjugate_objective(norms, trial, k));
      }
      excess = std::max(excess, best - sk);
      canonical = std::max(canonical, std::abs(canon - sk));
      crows.push_back({std::to_string(k), std::to_string(f), fmt(sk), fmt(best), fmt(canon)});
    }
  }
  run.csv("slope_identity.csv",
          {"k", "run", "dt", "max_residual_dt", "max_residual_half_dt", "ratio", "identity_value_max"}, rrows);
  run.csv("conjugate.csv", {"k", "form", "S_k", "best_trial", "canonical"}, crows);
  run.add(at_least("residual_ratio_min", 7, ratio_min, 1.5, "slope_identity.csv"));
  run.add(at_most("residual_ratio_max", 7, ratio_max, 2.5, "slope_identity.csv"));
  run.add(at_most("identity_value_max", 7, identity, 1e-9, "slope_identity.csv"));
  run.add(at_most("trial_excess_max", 6, excess, 1e-9, "conjugate.csv"));
  run.add(at_most("canonical_gap_max", 6, canonical, 1e-9, "conjugate.csv"));
}

void monotonicity(Run& run) {
  const ExperimentConfig& cfg = run.cfg;
  const ModelPtr model = model_for(cfg);
  std::vector<std::vector<std::string>> rows;
  double worst_excess = -std::numeric_limits<double>::infinity();
  double worst_margin = worst_excess, worst_alt = worst_excess;
  std::mt19937_64 rng(cfg.seed);
  for (int k : cfg.k_list) {
    const HermForm base = zero_projection(model, k);
    std::vector<HermForm> starts;
    for (int r = 0; r < cfg.runs; ++r) starts.push_back(perturbed_form(base, rng, cfg.perturbation));
    std::vector<FlowTrace> traces(starts.size());
    parallel_for(cfg.runs, [&](int r) {
      QuantizedFlowOptions qo;
      qo.T = cfg.T;
      qo.dt = cfg.dt > 0.0 ? cfg.dt : 1.0 / (4.0 * k);
      traces[static_cast<std::size_t>(r)] = quantized_flow_run(model, starts[static_cast<std::size_t>(r)], qo);
    });
    for (int r = 0; r < cfg.runs; ++r) {
      const FlowTrace& tr = traces[static_cast<std::size_t>(r)];
      const MonotonicityReport rep = monotonicity_probe(tr);
      for (std::size_t j = 0; j < rep.times.size(); ++j) {
        // forward-difference error (h/2)|S''| from the neighbouring second difference
        const std::size_t c = std::min(std::max<std::size_t>(j, 1), tr.size() - 2);
        const double h = tr.times[c + 1] - tr.times[c];
        const double second =
            (tr.series[c + 1].S_k - 2.0 * tr.series[c].S_k + tr.series[c - 1].S_k) / (h * h);
        const double slack = 1e-6 + 0.5 * h * std::abs(second);
        const double ex = rep.margin[j] - slack;
        worst_excess = std::max(worst_excess, ex);
        worst_margin = std::max(worst_margin, rep.margin[j]);
        worst_alt = std::max(worst_alt, rep.ds_dt[j] - rep.bound_alt[j]);
        rows.push_back({std::to_string(k), std::to_string(r), fmt(rep.times[j]), fmt(tr.series[j].S_k),
                        fmt(rep.ds_dt[j]), fmt(rep.bound[j]), fmt(rep.bound_alt[j]), fmt(slack), fmt(ex)});
      }
      run.checkpoint("checkpoints/k" + std::to_string(k) + "_run" + std::to_string(r), tr);
    }
  }
  run.csv("monotonicity.csv", {"k", "run", "t", "S_k", "dS_dt", "bound", "bound_alt", "slack", "excess"}, rows);
  run.add(at_most("worst_excess", 8, worst_excess, 0.0, "monotonicity.csv"));
  run.add(info("worst_margin", worst_margin, "monotonicity.csv"));
  run.add(info("worst_margin_alt", worst_alt, "monotonicity.csv"));
}

void duality(Run& run) {
  const ExperimentConfig& cfg = run.cfg;
  const ModelPtr model = model_for(cfg);
  const PotentialField phi0 = cfg.potential.on(model);
  const int n = static_cast<int>(cfg.k_list.size());
  std::vector<DualityReport> reps(static_cast<std::size_t>(n));
  parallel_for(n, [&](int i) {
    DualityOptions d;
    d.T = cfg.T;
    d.dt = cfg.dt;
    d.panel_size = cfg.trials;
    d.seed = cfg.seed + static_cast<std::uint64_t>(i);
    reps[static_cast<std::size_t>(i)] = duality_gap(model, cfg.k_list[static_cast<std::size_t>(i)], phi0, d);
  });
  std::vector<std::vector<std::string>> rows, prow;
  for (const DualityReport& r : reps) {
    const std::string k = std::to_string(r.k);
    rows.push_back({k, fmt(r.min_s_k), fmt(r.min_s_k_time), fmt(r.final_s_k), fmt(r.extracted_neg_s_na),
                    fmt(r.extracted_uncertainty), fmt(r.extraction_identity), fmt(r.panel_max_neg_s_na),
                    fmt(r.panel_max_uncertainty), fmt(r.base_point_spread)});
    double one_sided = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < r.panel.size(); ++p) {
      const PanelEntry& e = r.panel[p];
      const double v = -e.entropy.value - e.entropy.uncertainty - r.min_s_k;
      one_sided = std::max(one_sided, v);
      prow.push_back({k, std::to_string(p), fmt(-e.entropy.value), fmt(e.entropy.uncertainty),
                      fmt(e.entropy.l_na), fmt(e.entropy.f_na), fmt(v)});
    }
    run.checkpoint("checkpoints/k" + k, r.trace);
    run.json("na_forms/k" + k + "_extracted.json", to_json(r.panel.at(1).nu));
    const std::string pre = "k" + k + "_";
    run.add(at_most(pre + "min_S_k", 9, r.min_s_k, 0.01, "duality.csv"));
    run.add(gate(pre + "panel_max_neg_S_na", 9, r.panel_max_neg_s_na, Comparison::Within,
                 -0.05 - r.panel_max_uncertainty, 0.05 + r.panel_max_uncertainty, "duality.csv"));
    run.add(at_most(pre + "one_sided_excess", 9, one_sided, 0.0, "panel.csv"));
    run.add(at_most(pre + "extraction_identity", 9, r.extraction_identity, 1e-9, "duality.csv"));
    run.add(info(pre + "base_point_spread", r.base_point_spread, "duality.csv"));
  }
  run.csv("duality.csv",
          {"k", "min_S_k", "min_time", "final_S_k", "extracted_neg_S_na", "extracted_uncertainty",
           "extraction_identity", "panel_max_neg_S_na", "panel_max_uncertainty", "base_point_spread"},
          rows);
  run.csv("panel.csv", {"k", "member", "neg_S_na", "uncertainty", "L_na", "F_na", "one_sided_excess"}, prow);
}

void na_panel(Run& run) {
  const ExperimentConfig& cfg = run.cfg;
  const ModelPtr model = model_for(cfg);
  struct Member {
    int k = 0;
    bool toric = true;
    std::vector<double> by_degree;
    std::optional<NAForm> nu;
    NAEntropy s, shifted;
    double oracle = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Member> members;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k : cfg.k_list) {
    const int n = model->dim(k);
    for (int t = 0; t < cfg.trials; ++t) {
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<double> w(static_cast<std::size_t>(n));
      for (double& x : w) x = unif(rng);
      std::sort(w.begin(), w.end(), std::greater<>());
      CMatrix basis = CMatrix::Zero(n, n);
      Member m;
      m.k = k;
      m.by_degree.assign(static_cast<std::size_t>(n), 0.0);
      for (int i = 0; i < n; ++i) {
        basis(perm[static_cast<std::size_t>(i)], i) = 1.0;
        m.by_degree[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = w[static_cast<std::size_t>(i)];
      }
      m.nu.emplace(k, basis, w);
      m.oracle = toric_l_na(m.by_degree, k);
      members.push_back(std::move(m));
    }
    for (int t = 0; t < cfg.runs; ++t) {
      CMatrix basis(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) basis(i, j) = cdouble(g(rng), g(rng));
      std::vector<double> w(static_cast<std::size_t>(n));
      for (double& x : w) x = unif(rng);
      std::sort(w.begin(), w.end(), std::greater<>());
      Member m;
      m.k = k;
      m.toric = false;
      m.nu.emplace(k, basis, w);
      members.push_back(std::move(m));
    }
  }
  parallel_for(static_cast<int>(members.size()), [&](int i) {
    Member& m = members[static_cast<std::size_t>(i)];
    const HermForm base = zero_projection(model, m.k);
    m.s = s_k_na(model, *m.nu, base);
    m.shifted = s_k_na(model, m.nu->translated(0.75), base);
  });
  std::vector<std::vector<std::string>> rows;
  double min_s = std::numeric_limits<double>::infinity(), toric_err = 0.0, shift = 0.0, unc = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const Member& m = members[i];
    min_s = std::min(min_s, m.s.value + m.s.uncertainty);
    const double err = m.toric ? std::abs(m.s.l_na - m.oracle) : std::numeric_limits<double>::quiet_NaN();
    if (m.toric) toric_err = std::max(toric_err, err);
    const double ds = std::abs(m.shifted.value - m.s.value);
    shift = std::max(shift, ds);
    unc = std::max(unc, m.s.uncertainty);
    rows.push_back({std::to_string(m.k), std::to_string(i), m.toric ? "toric" : "generic", fmt(m.s.l_na),
                    fmt(m.oracle), fmt(err), fmt(m.s.f_na), fmt(m.s.value), fmt(m.s.uncertainty), fmt(ds)});
  }
  run.csv("na_panel.csv",
          {"k", "member", "kind", "L_na", "toric_L_na", "abs_error", "F_na", "S_na", "uncertainty",
           "translation_change"},
          rows);
  run.add(at_least("S_na_plus_uncertainty_min", 9, min_s, 0.0, "na_panel.csv"));
  run.add(at_most("toric_error_max", 9, toric_err, 1e-2, "na_panel.csv"));
  run.add(at_most("translation_change_max", 9, shift, 1e-9, "na_panel.csv"));
  run.add(info("uncertainty_max", unc, "na_panel.csv"));
}

}  // namespace

bool Metric::evaluate() const {
  if (std::isnan(value)) return comparison == Comparison::Info;
  switch (comparison) {
    case Comparison::AtMost: return value <= hi;
    case Comparison::Below: return value < hi;
    case Comparison::AtLeast: return value >= lo;
    case Comparison::Within: return value >= lo && value <= hi;
    case Comparison::Info: return true;
  }
  return false;
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.output_dir = fs::path("runs") / experiment;
  c.model.angular_nodes = 9;
  c.model.radial_nodes = 64;
  if (experiment == "balanced-fixed-point") {
    c.model.k_max = 6;
    c.model.angular_nodes = 0;
    c.k_list = range(1, 6);
    c.trials = 50;
  } else if (experiment == "euler-gap") {
    c.model.k_max = 16;
    c.model.basis = P1Basis::Invariant;
    c.potential = {RadialFamily::Kind::Bump, 0.3};
    c.k_list = {2, 4, 8, 16};
  } else if (experiment == "thmA-gap") {
    c.model.k_max = 32;
    c.model.radial_nodes = 128;
    c.model.angular_nodes = 8;
    c.model.basis = P1Basis::Invariant;
    c.potential = {RadialFamily::Kind::Bump, 0.3};
    c.k_list = {4, 8, 16, 32};
  } else if (experiment == "thmB-entropy") {
    c.model.k_max = 12;
    c.model.basis = P1Basis::Invariant;
    c.potential = {RadialFamily::Kind::Bump, 0.5};
    c.k_list = range(2, 12);
    c.runs = 5;
  } else if (experiment == "slope-identity") {
    c.model.k_max = 2;
    c.k_list = {2};
    c.T = 2.0;
    c.runs = 10;
    c.trials = 100;
  } else if (experiment == "monotonicity") {
    c.model.k_max = 2;
    c.k_list = {2};
    c.T = 3.0;
    c.runs = 5;
  } else if (experiment == "duality") {
    c.model.k_max = 2;
    c.model.rule = RadialRule::Graded;
    c.potential = {RadialFamily::Kind::Bump, 0.5};
    c.k_list = {1, 2};
    c.T = 4.0;
    c.trials = 12;
  } else if (experiment == "na-panel") {
    c.model.k_max = 2;
    c.model.rule = RadialRule::Graded;
    c.k_list = {1, 2};
    c.trials = 12;
    c.runs = 4;
  } else {
    throw ConfigError("config.experiment: unknown experiment '" + experiment + "'");
  }
  return c;
}

ExperimentConfig parse_config(const Json& j, const fs::path& base_dir) {
  reject_unknown(j, "config",
                 {"experiment", "output_dir", "seed", "model", "potential", "T", "dt", "substeps", "k_list",
                  "runs", "trials", "perturbation", "discrete_model"});
  if (!j.contains("experiment")) bad("config.experiment", "missing field");
  ExperimentConfig c = default_config(get_string(j.at("experiment"), "config.experiment"));
  auto resolve = [&](const fs::path& p) { return p.is_absolute() || base_dir.empty() ? p : base_dir / p; };
  if (j.contains("output_dir")) c.output_dir = get_string(j.at("output_dir"), "config.output_dir");
  c.output_dir = resolve(c.output_dir);
  if (j.contains("seed")) {
    const Json& s = j.at("seed");
    if (!s.is_number_unsigned()) bad("config.seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (j.contains("model")) {
    const Json& m = j.at("model");
    reject_unknown(m, "config.model", {"k_max", "radial_nodes", "angular_nodes", "rule", "basis"});
    if (m.contains("k_max")) c.model.k_max = get_int(m.at("k_max"), "config.model.k_max", 1, 64);
    if (m.contains("radial_nodes"))
      c.model.radial_nodes = get_int(m.at("radial_nodes"), "config.model.radial_nodes", 8, 1024);
    if (m.contains("angular_nodes")) {
      c.model.angular_nodes = get_int(m.at("angular_nodes"), "config.model.angular_nodes", 0, 512);
      if (c.model.angular_nodes > 0 && c.model.angular_nodes < 8)
        bad("config.model.angular_nodes", "expected 0 (automatic) or at least 8");
    }
    if (m.contains("rule")) {
      const std::string r = get_string(m.at("rule"), "config.model.rule");
      if (r == "gauss-legendre") c.model.rule = RadialRule::GaussLegendre;
      else if (r == "graded") c.model.rule = RadialRule::Graded;
      else bad("config.model.rule", "expected 'gauss-legendre' or 'graded', got '" + r + "'");
    }
    if (m.contains("basis")) {
      const std::string b = get_string(m.at("basis"), "config.model.basis");
      if (b == "monomial") c.model.basis = P1Basis::Monomial;
      else if (b == "invariant") c.model.basis = P1Basis::Invariant;
      else bad("config.model.basis", "expected 'monomial' or 'invariant', got '" + b + "'");
    }
  }
  if (j.contains("potential")) {
    const Json& p = j.at("potential");
    reject_unknown(p, "config.potential", {"family", "amplitude"});
    if (p.contains("family")) {
      const std::string f = get_string(p.at("family"), "config.potential.family");
      if (f == "bump") c.potential.kind = RadialFamily::Kind::Bump;
      else if (f == "sine") c.potential.kind = RadialFamily::Kind::Sine;
      else bad("config.potential.family", "expected 'bump' or 'sine', got '" + f + "'");
    }
    if (p.contains("amplitude"))
      c.potential.amplitude = get_number(p.at("amplitude"), "config.potential.amplitude", -0.8, 0.8);
  }
  if (j.contains("T")) c.T = get_number(j.at("T"), "config.T", 1e-6, 100.0);
  if (j.contains("dt")) c.dt = get_number(j.at("dt"), "config.dt", 0.0, 1.0);
  if (j.contains("substeps")) c.substeps = get_int(j.at("substeps"), "config.substeps", 1, 1024);
  if (j.contains("runs")) c.runs = get_int(j.at("runs"), "config.runs", 1, 1000);
  if (j.contains("trials")) c.trials = get_int(j.at("trials"), "config.trials", 1, 100000);
  if (j.contains("perturbation"))
    c.perturbation = get_number(j.at("perturbation"), "config.perturbation", 1e-6, 2.0);
  if (j.contains("discrete_model"))
    c.discrete_model = resolve(get_string(j.at("discrete_model"), "config.discrete_model"));
  if (j.contains("k_list")) {
    const Json& ks = j.at("k_list");
    if (!ks.is_array() || ks.empty()) bad("config.k_list", "expected a non-empty array of levels");
    c.k_list.clear();
    for (std::size_t i = 0; i < ks.size(); ++i)
      c.k_list.push_back(get_int(ks[i], "config.k_list[" + std::to_string(i) + "]", 1, 64));
  }
  for (std::size_t i = 0; i < c.k_list.size(); ++i)
    if (c.k_list[i] > c.model.k_max)
      bad("config.k_list[" + std::to_string(i) + "]",
          "level " + std::to_string(c.k_list[i]) + " exceeds model.k_max = " + std::to_string(c.model.k_max));
  // admissibility of the initial potential: m = 2 + (1-2u)φ' + u(1-u)φ'' > 0
  const GaussLegendre01 probe = gauss_legendre01(257);
  const double a = c.potential.amplitude, pi = std::acos(-1.0);
  for (Eigen::Index i = 0; i < probe.u.size(); ++i) {
    const double u = probe.u(i), v = probe.c(i);
    const bool sine = c.potential.kind == RadialFamily::Kind::Sine;
    const double d1 = sine ? a * pi * std::cos(pi * u) : a * (v - u);
    const double d2 = sine ? -a * pi * pi * std::sin(pi * u) : -2.0 * a;
    if (!(2.0 + (v - u) * d1 + u * v * d2 > 0.0))
      bad("config.potential", "amplitude " + std::to_string(a) + " is not admissible");
  }
  return c;
}

Json to_json(const ExperimentConfig& c) {
  return Json{{"experiment", c.experiment},
              {"output_dir", c.output_dir.string()},
              {"seed", c.seed},
              {"model",
               {{"k_max", c.model.k_max},
                {"radial_nodes", c.model.radial_nodes},
                {"angular_nodes", c.model.angular_nodes},
                {"rule", rule_name(c.model.rule)},
                {"basis", basis_name(c.model.basis)}}},
              {"potential", {{"family", family_name(c.potential.kind)}, {"amplitude", c.potential.amplitude}}},
              {"T", c.T},
              {"dt", c.dt},
              {"substeps", c.substeps},
              {"k_list", c.k_list},
              {"runs", c.runs},
              {"trials", c.trials},
              {"perturbation", c.perturbation},
              {"discrete_model", c.discrete_model.string()}};
}

Json to_json(const RunManifest& m) {
  Json metrics = Json::array();
  for (const Metric& x : m.metrics) {
    Json e{{"name", x.name},
           {"criterion", x.criterion},
           {"value", number_or_null(x.value)},
           {"comparison", comparison_name(x.comparison)},
           {"pass", x.pass},
           {"artifact", x.artifact}};
    switch (x.comparison) {
      case Comparison::AtMost:
      case Comparison::Below: e["threshold"] = x.hi; break;
      case Comparison::AtLeast: e["threshold"] = x.lo; break;
      case Comparison::Within: e["range"] = {x.lo, x.hi}; break;
      case Comparison::Info: break;
    }
    metrics.push_back(std::move(e));
  }
  return Json{{"experiment", m.experiment},
              {"version", m.version},
              {"wall_clock_seconds", m.wall_clock},
              {"config", m.config},
              {"reference_form", "H0 = p_k(0) for E_k and D_k"},
              {"integrator", "RK4 on log H in the reference basis"},
              {"metrics", metrics},
              {"artifacts", m.artifacts},
              {"pass", m.pass}};
}

RunManifest manifest_from_json(const Json& j) {
  try {
    RunManifest m;
    m.experiment = j.at("experiment").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.wall_clock = j.at("wall_clock_seconds").get<double>();
    m.config = j.at("config");
    m.pass = j.at("pass").get<bool>();
    m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    for (const Json& e : j.at("metrics")) {
      Metric x;
      x.name = e.at("name").get<std::string>();
      x.criterion = e.at("criterion").get<int>();
      x.value = null_or_number(e.at("value"));
      x.comparison = comparison_from_name(e.at("comparison").get<std::string>());
      x.pass = e.at("pass").get<bool>();
      x.artifact = e.at("artifact").get<std::string>();
      if (x.comparison == Comparison::AtMost || x.comparison == Comparison::Below)
        x.hi = e.at("threshold").get<double>();
      if (x.comparison == Comparison::AtLeast) x.lo = e.at("threshold").get<double>();
      if (x.comparison == Comparison::Within) {
        x.lo = e.at("range").at(0).get<double>();
        x.hi = e.at("range").at(1).get<double>();
      }
      m.metrics.push_back(std::move(x));
    }
    return m;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
}

EntropyTable entropy_convergence_report(const PotentialField& phi0, const std::vector<int>& k_list,
                                        const PotentialField& classical, int decreasing_from) {
  if (k_list.empty()) throw ConfigError("entropy_convergence_report: empty k list");
  EntropyTable t;
  const double s = entropy_classical(classical);
  for (int k : k_list) {
    const double sk = s_k(phi0.model(), project(phi0, k));
    t.rows.push_back({k, sk, s, std::abs(sk - s)});
  }
  t.max_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < t.rows.size(); ++i)
    if (t.rows[i].k >= decreasing_from)
      t.max_increase = std::max(t.max_increase, t.rows[i + 1].diff - t.rows[i].diff);
  t.last_relative = s != 0.0 ? t.rows.back().diff / std::abs(s) : t.rows.back().diff;
  return t;
}

HermForm random_form(int level, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = cdouble(g(rng), g(rng));
  return HermForm(level, a * a.adjoint() / dim + CMatrix::Identity(dim, dim));
}

HermForm perturbed_form(const HermForm& base, std::mt19937_64& rng, double size) {
  std::normal_distribution<double> g(0.0, size);
  const int n = base.dim();
  CMatrix x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = cdouble(g(rng), g(rng));
  const CMatrix root = matrix_power(base.entries(), 0.5);
  return HermForm(base.level(), root * matrix_exp(TangentForm{0.5 * (x + x.adjoint())}) * root);
}

HermForm diagonal_perturbation(const HermForm& base, std::mt19937_64& rng, double size) {
  if (!base.is_diagonal()) throw DomainError("diagonal_perturbation: base form is not diagonal");
  std::normal_distribution<double> g(0.0, size);
  CMatrix e = base.entries();
  for (Eigen::Index i = 0; i < e.rows(); ++i) e(i, i) *= std::exp(g(rng));
  return HermForm(base.level(), e);
}

double toric_l_na(const std::vector<double>& lambda, int k) {
  const auto n = lambda.size();
  if (n == 0) throw DimensionError("toric_l_na: empty weights");
  auto g = [&](double s) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) best = std::max(best, (lambda[j] + j * s) / k - s);
    return best;
  };
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      best = std::min(best, g((lambda[i] - lambda[j]) / static_cast<double>(j - i)));
  return n == 1 ? g(0.0) : best;
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Run run{cfg, {}};
  run.manifest.experiment = cfg.experiment;
  run.manifest.config = to_json(cfg);
  run.manifest.version = version();
  fs::create_directories(cfg.output_dir);
  run.json("config.json", run.manifest.config);
  const std::string& e = cfg.experiment;
  try {
    if (e == "balanced-fixed-point") balanced_fixed_point(run);
    else if (e == "euler-gap") euler_gap(run);
    else if (e == "thmA-gap") thm_a_gap(run);
    else if (e == "thmB-entropy") thm_b_entropy(run);
    else if (e == "slope-identity") slope_identity(run);
    else if (e == "monotonicity") monotonicity(run);
    else if (e == "duality") duality(run);
    else if (e == "na-panel") na_panel(run);
    else throw ConfigError("config.experiment: unknown experiment '" + e + "'");
  } catch (const DomainError& x) {
    throw DomainError(e + ": " + x.what());
  } catch (const DimensionError& x) {
    throw DimensionError(e + ": " + x.what());
  } catch (const UnsupportedError& x) {
    throw UnsupportedError(e + ": " + x.what());
  } catch (const ConfigError& x) {
    throw ConfigError(e + ": " + x.what());
  }
  std::vector<std::vector<std::string>> rows;
  run.manifest.pass = true;
  for (const Metric& m : run.manifest.metrics) {
    rows.push_back({m.name, std::to_string(m.criterion), fmt(m.value), comparison_name(m.comparison),
                    fmt(m.lo), fmt(m.hi), m.pass ? "pass" : "fail"});
    run.manifest.pass = run.manifest.pass && m.pass;
  }
  run.csv("metrics.csv", {"name", "criterion", "value", "comparison", "lo", "hi", "verdict"}, rows);
  run.manifest.wall_clock =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(cfg.output_dir / "manifest.json", to_json(run.manifest));
  return run.manifest;
}

ManifestCheck check_manifest(const RunManifest& m, const fs::path& dir) {
  ManifestCheck c;
  c.pass = true;
  for (const Metric& x : m.metrics) {
    const bool ok = x.evaluate();
    if (ok != x.pass) {
      c.consistent = false;
      c.problems.push_back("metric " + x.name + ": stored verdict disagrees with its value");
    }
    if (!ok) c.pass = false;
    if (!x.artifact.empty() &&
        std::find(m.artifacts.begin(), m.artifacts.end(), x.artifact) == m.artifacts.end()) {
      c.consistent = false;
      c.problems.push_back("metric " + x.name + ": artifact " + x.artifact + " is not listed");
    }
  }
  if (m.pass != c.pass) {
    c.consistent = false;
    c.problems.push_back("overall verdict disagrees with the metrics");
  }
  for (const std::string& a : m.artifacts)
    if (!fs::exists(dir / a)) {
      c.consistent = false;
      c.problems.push_back("missing artifact " + a);
    }
  std::ifstream in(dir / "metrics.csv");
  if (!in) {
    c.consistent = false;
    c.problems.push_back("missing metrics.csv");
  } else {
    std::string line;
    std::getline(in, line);
    std::size_t i = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::istringstream ls(line);
      for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
      if (i >= m.metrics.size() || cells.size() != 7 || cells[0] != m.metrics[i].name ||
          cells[2] != fmt(m.metrics[i].value)) {
        c.consistent = false;
        c.problems.push_back("metrics.csv row " + std::to_string(i + 1) + " differs from the manifest");
      }
      ++i;
    }
    if (i != m.metrics.size()) {
      c.consistent = false;
      c.problems.push_back("metrics.csv has " + std::to_string(i) + " rows, manifest has " +
                           std::to_string(m.metrics.size()));
    }
  }
  return c;
}

}  // namespace qkrf
