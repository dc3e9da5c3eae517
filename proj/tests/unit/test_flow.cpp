#include <doctest.h>

#include <cmath>
#include <random>

#include "qkrf/energy.hpp"
#include "qkrf/flow.hpp"
#include "qkrf/quantization.hpp"
#include "support.hpp"

using namespace qkrf;

namespace {

HermForm zero_form(const ModelPtr& m, int k) {
  return project(PotentialField::radial(m, RVector::Zero(m->radial()->size())), k);
}

HermForm diagonal_start(const HermForm& base, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 0.3);
  CMatrix e = base.entries();
  for (Eigen::Index i = 0; i < e.rows(); ++i) e(i, i) *= std::exp(g(rng));
  return HermForm(base.level(), e);
}

double rel(const HermForm& a, const HermForm& b) {
  return (a.entries() - b.entries()).norm() / b.entries().norm();
}

}  // namespace

TEST_CASE("balanced forms are stationary for the flow and the iteration") {
  const ModelPtr m = build_p1_model(3, 48, 9);
  for (int k = 1; k <= 3; ++k) {
    const HermForm h = zero_form(m, k);
    QuantizedFlowOptions o;
    o.T = 1.0;
    const FlowTrace tr = quantized_flow_run(m, h, o);
    for (const HermForm& f : tr.forms) CHECK(rel(f, h) < 1e-12);
    for (const EnergyReport& r : tr.series) CHECK(std::abs(r.S_k) < 1e-12);
    const FlowTrace it = bergman_iterate(m, h, 3);
    CHECK(rel(it.forms.back(), h) < 1e-12);
    CHECK(slope_identity_check(tr).max_residual < 1e-10);
  }
}

TEST_CASE("one Euler step of size 1/k is one balancing step") {
  const ModelPtr m = build_p1_model(3, 48, 13);
  std::mt19937_64 rng(4);
  for (int k = 1; k <= 3; ++k) {
    const HermForm h = test::perturbed(zero_form(m, k), rng, 0.3);
    const HermForm b = balancing(m, h);
    const CMatrix q = matrix_log(h).entries;
    const double step = 1.0 / k;
    const CMatrix euler = matrix_exp(TangentForm{q + step * k * (matrix_log(b).entries - q)});
    CHECK((euler - b.entries()).norm() / b.entries().norm() < 1e-12);
    const FlowTrace it = bergman_iterate(m, h, 1);
    CHECK(rel(it.forms[1], b) < 1e-14);
    CHECK(it.dt == doctest::Approx(step));
  }
}

TEST_CASE("the RK4 integrator converges at fourth order") {
  const ModelPtr m = build_p1_model(2, 48, 9);
  std::mt19937_64 rng(8);
  const HermForm h0 = test::perturbed(zero_form(m, 2), rng, 0.4);
  std::vector<HermForm> ends;
  for (double dt : {0.25, 0.125, 0.0625}) {
    QuantizedFlowOptions o;
    o.T = 1.0;
    o.dt = dt;
    ends.push_back(quantized_flow_run(m, h0, o).forms.back());
  }
  const double e1 = (ends[0].entries() - ends[1].entries()).norm();
  const double e2 = (ends[1].entries() - ends[2].entries()).norm();
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("the flow drives a perturbed start toward the balanced form") {
  const ModelPtr m = build_p1_model(2, 48, 9);
  std::mt19937_64 rng(3);
  const HermForm base = zero_form(m, 2);
  const HermForm h0 = test::perturbed(base, rng, 0.3);
  QuantizedFlowOptions o;
  o.T = 6.0;
  o.sample_every = 4;
  const FlowTrace tr = quantized_flow_run(m, h0, o);
  CHECK(tr.series.back().S_k < 1e-3 * tr.series.front().S_k);
  // balanced forms are unique up to scale and automorphisms; the limit is balanced
  CHECK(rel(balancing(m, tr.forms.back()), tr.forms.back()) < 1e-3);
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) CHECK(tr.series[i + 1].S_k <= tr.series[i].S_k);
}

TEST_CASE("the Bergman iteration stays close to the flow at the times j/k") {
  const ModelPtr m = build_p1_model(8, 64, 9);
  const PotentialField phi = RadialFamily{RadialFamily::Kind::Bump, 0.3}.on(m);
  const GapReport rep = euler_gap_report(m, phi, {2, 4, 8}, EulerGapOptions{1.0, 8});
  REQUIRE(rep.rows.size() == 3);
  for (const GapRow& r : rep.rows) {
    CHECK(r.gap > 0.0);
    CHECK(r.gap < 0.1);
    CHECK(r.at_time <= 1.0);
  }
  // substep refinement does not move the gap: the integration is converged
  const GapReport fine = euler_gap_report(m, phi, {4}, EulerGapOptions{1.0, 32});
  CHECK(fine.rows[0].gap == doctest::Approx(rep.rows[1].gap).epsilon(1e-6));
}

TEST_CASE("time horizons must be whole multiples of the step") {
  const ModelPtr m = build_p1_model(2, 32, 9);
  QuantizedFlowOptions o;
  o.T = 1.1;
  o.dt = 0.25;
  CHECK_THROWS_AS(quantized_flow_run(m, zero_form(m, 2), o), ConfigError);
  o.T = 1.0;
  o.sample_every = 0;
  CHECK_THROWS_AS(quantized_flow_run(m, zero_form(m, 2), o), ConfigError);
  CHECK_THROWS_AS(bergman_iterate(m, zero_form(m, 2), 0), ConfigError);
  const PotentialField phi = RadialFamily{RadialFamily::Kind::Bump, 0.3}.on(m);
  CHECK_THROWS_AS(flow_vs_krf_gap(m, phi, {63, 64, 65}, KrfGapOptions{}), ConfigError);
}

TEST_CASE("resuming a quantized run reproduces the uninterrupted run") {
  const ModelPtr m = build_p1_model(2, 48, 9);
  std::mt19937_64 rng(5);
  const HermForm h0 = test::perturbed(zero_form(m, 2), rng, 0.3);
  QuantizedFlowOptions o;
  o.T = 2.0;
  o.sample_every = 2;
  const FlowTrace full = quantized_flow_run(m, h0, o);
  o.T = 1.0;
  const FlowTrace resumed = quantized_flow_resume(m, quantized_flow_run(m, h0, o), 2.0);
  REQUIRE(resumed.size() == full.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    CHECK(resumed.times[i] == doctest::Approx(full.times[i]));
    // the checkpointed state is H, so log H is recomputed on resume
    CHECK(rel(resumed.forms[i], full.forms[i]) < 1e-13);
    CHECK(resumed.series[i].S_k == doctest::Approx(full.series[i].S_k).epsilon(1e-10));
  }
}

TEST_CASE("classical flow: the round metric is stationary and -dL/dt = S") {
  const ModelPtr m = build_p1_model(1, 48, 8);
  const RadialGrid& g = *m->radial();
  ClassicalFlowOptions o;
  o.T = 0.5;
  o.sample_interval = 1.0 / 32;
  const FlowTrace zero = classical_krf_run(PotentialField::radial(m, RVector::Zero(g.size())), o);
  for (const RVector& p : zero.profiles) CHECK(p.cwiseAbs().maxCoeff() < 1e-12);

  const FlowTrace tr = classical_krf_run(RadialFamily{RadialFamily::Kind::Bump, 0.5}.on(m), o);
  CHECK(classical_slope_check(tr).max_residual < 1e-3);
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    CHECK(tr.series[i].S >= 0.0);
    CHECK(tr.series[i + 1].L <= tr.series[i].L);
  }
  // the step keeps RK4 inside its stability region: dt · spectral radius = 2
  const double dt = classical_stable_dt(g, RVector::Zero(g.size()));
  const double m_dim = static_cast<double>(g.size());
  CHECK(dt == doctest::Approx(2.0 / (m_dim * (m_dim - 1.0) / 2.0 + 2.0)));
  CHECK(tr.dt <= classical_stable_dt(g, RadialFamily{RadialFamily::Kind::Bump, 0.5}.sample(g)));
}

TEST_CASE("classical flow rejects non-admissible and non-radial input") {
  const ModelPtr m = build_p1_model(1, 32, 8);
  CHECK_THROWS_AS(classical_krf_run(RadialFamily{RadialFamily::Kind::Bump, 5.0}.on(m), {}), DomainError);
  P1Options go;
  go.k_max = 1;
  go.rule = RadialRule::Graded;
  const ModelPtr graded = build_p1_model(go);
  CHECK_THROWS_AS(classical_krf_run(RadialFamily{RadialFamily::Kind::Bump, 0.2}.on(graded), {}),
                  UnsupportedError);
}

TEST_CASE("resuming a classical run reproduces the uninterrupted run") {
  const ModelPtr m = build_p1_model(1, 32, 8);
  const PotentialField phi = RadialFamily{RadialFamily::Kind::Sine, 0.4}.on(m);
  ClassicalFlowOptions o;
  o.T = 0.5;
  o.sample_interval = 0.125;
  const FlowTrace full = classical_krf_run(phi, o);
  o.T = 0.25;
  const FlowTrace resumed = classical_krf_resume(m, classical_krf_run(phi, o), 0.5);
  REQUIRE(resumed.size() == full.size());
  CHECK((resumed.profiles.back() - full.profiles.back()).norm() == 0.0);
}

TEST_CASE("fit_decay recovers exact and noisy power laws") {
  const std::vector<double> ks{2, 4, 8, 16, 32};
  std::vector<double> e1, e2, noisy;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.1);
  for (double k : ks) {
    e1.push_back(3.0 / k);
    e2.push_back(0.5 / (k * k));
    noisy.push_back(std::exp(g(rng)) / k);
  }
  const DecayFit f1 = fit_decay(ks, e1);
  CHECK(std::abs(f1.slope + 1.0) < 1e-12);
  CHECK(f1.half_width < 1e-12);
  CHECK(std::exp(f1.intercept) == doctest::Approx(3.0));
  CHECK(std::abs(fit_decay(ks, e2).slope + 2.0) < 1e-12);
  const DecayFit fn = fit_decay(ks, noisy);
  CHECK(std::abs(fn.slope + 1.0) < 0.15);
  CHECK(fn.half_width > 0.0);
  CHECK_THROWS_AS(fit_decay({2, 4}, {0.5, 0.25}), ConfigError);
  CHECK_THROWS_AS(fit_decay({2, 4, 8}, {0.5, 0.0, 0.1}), DomainError);
}

TEST_CASE("slope identity residual halves with the step in the commuting case") {
  const ModelPtr m = build_p1_model(2, 48, 9);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    const HermForm h0 = diagonal_start(zero_form(m, 2), rng);
    QuantizedFlowOptions o;
    o.T = 2.0;
    o.dt = 0.125;
    const double r1 = slope_identity_check(quantized_flow_run(m, h0, o)).max_residual;
    o.dt = 0.0625;
    const double r2 = slope_identity_check(quantized_flow_run(m, h0, o)).max_residual;
    CHECK(r1 / r2 >= 1.5);
    CHECK(r1 / r2 <= 2.5);
  }
  FlowTrace tiny;
  tiny.times = {0.0, 1.0};
  CHECK_THROWS_AS(slope_identity_check(tiny), ConfigError);
}

TEST_CASE("monotonicity probe: zero at balance, no violation on perturbed starts") {
  const ModelPtr m = build_p1_model(2, 48, 9);
  QuantizedFlowOptions o;
  o.T = 1.0;
  const MonotonicityReport flat = monotonicity_probe(quantized_flow_run(m, zero_form(m, 2), o));
  for (std::size_t i = 0; i < flat.times.size(); ++i) {
    CHECK(std::abs(flat.ds_dt[i]) < 1e-10);
    CHECK(std::abs(flat.bound[i]) < 1e-10);
  }
  std::mt19937_64 rng(6);
  o.T = 3.0;
  const MonotonicityReport rep = monotonicity_probe(quantized_flow_run(m, test::perturbed(zero_form(m, 2), rng, 0.3), o));
  CHECK(rep.worst_margin <= 1e-6);
  // the margin shrinks as the trace approaches the balanced point
  CHECK(std::abs(rep.margin.back()) < 0.1 * std::abs(rep.margin.front()));
  for (std::size_t i = 0; i < rep.times.size(); ++i) CHECK(rep.bound[i] >= 0.0);
}
