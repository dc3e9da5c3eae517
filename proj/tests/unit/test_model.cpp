#include <doctest.h>

#include <cmath>

#include "qkrf/error.hpp"
#include "qkrf/model.hpp"
#include "support.hpp"

using namespace qkrf;

namespace {

// ∫_0^1 u^a (1-u)^b du
double beta_int(int a, int b) { return std::exp(std::lgamma(a + 1.0) + std::lgamma(b + 1.0) - std::lgamma(a + b + 2.0)); }

}  // namespace

TEST_CASE("projective-line model basics") {
  const ModelPtr m = build_p1_model(4, 24, 17);
  CHECK(m->dim(1) == 3);
  CHECK(m->dim(4) == 9);
  CHECK(m->volume() == 2.0);
  const RVector mu0 = m->node_masses(m->mu0_density());
  CHECK(compensated_sum(mu0) / m->volume() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(compensated_sum(m->grid().weights) == doctest::Approx(2.0 * M_PI).epsilon(1e-12));
  CHECK_THROWS_AS(build_p1_model(0, 24, 17), ConfigError);
  CHECK_THROWS_AS(build_p1_model(2, 8, 17), ConfigError);
  CHECK_THROWS_AS(build_p1_model(2, 24, 4), ConfigError);
  CHECK_THROWS_AS(m->dim(5), DomainError);
}

TEST_CASE("monomial moments agree with Beta integrals") {
  const int kmax = 6;
  const ModelPtr m = build_p1_model(kmax, 2 * kmax + 8, 13);
  const RVector mu0 = m->node_masses(m->mu0_density());
  for (int k = 1; k <= kmax; ++k) {
    const CMatrix w = m->section_columns(k);
    for (int j = 0; j <= 2 * k; ++j) {
      const RVector f = w.row(j).cwiseAbs2().transpose();
      // |z^j|^2 (1+|z|^2)^{-2k} = u^j (1-u)^{2k-j}; μ_0 = 2 du dθ/2π
      CHECK(integrate(f, mu0) == doctest::Approx(2.0 * beta_int(j, 2 * k - j)).epsilon(1e-10));
    }
  }
}

TEST_CASE("graded rule integrates polynomials and resolves the endpoints") {
  P1Options o;
  o.k_max = 3;
  o.rule = RadialRule::Graded;
  o.angular_nodes = 8;
  const ModelPtr m = build_p1_model(o);
  const RadialGrid& g = *m->radial();
  CHECK(!g.spectral());
  CHECK(compensated_sum(g.weights) == doctest::Approx(1.0).epsilon(1e-13));
  for (int a = 0; a < 6; ++a)
    CHECK(compensated_sum(g.weights.cwiseProduct(g.u.array().pow(a).matrix())) ==
          doctest::Approx(1.0 / (a + 1)).epsilon(1e-12));
  CHECK(g.u.minCoeff() < 1e-55);
  CHECK(g.c.minCoeff() < 1e-55);
  for (Eigen::Index a = 1; a < g.size(); ++a) CHECK((g.u(a) > g.u(a - 1) || g.c(a) < g.c(a - 1)));
}

TEST_CASE("canonical measure is a probability measure and ignores shifts") {
  const ModelPtr m = build_p1_model(2, 32, 9);
  const PotentialField phi = RadialFamily{RadialFamily::Kind::Bump, 1.0}.on(m);
  const RVector mu = canonical_measure(phi);
  CHECK(compensated_sum(mu) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((canonical_measure(phi.shifted(-800.0)) - mu).norm() < 1e-14);
  const RVector mu0 = canonical_measure(PotentialField::radial(m, RVector::Zero(32)));
  const RVector ref = m->node_masses(m->mu0_density()) / 2.0;
  CHECK((mu0 - ref).norm() < 1e-15);
}

TEST_CASE("Monge-Ampère density has total mass V and matches the closed form") {
  const ModelPtr m = build_p1_model(2, 48, 9);
  const RadialGrid& g = *m->radial();
  for (double eps : {0.0, 0.1, 0.8}) {
    const PotentialField phi = RadialFamily{RadialFamily::Kind::Bump, eps}.on(m);
    const RVector dens = ma_density(phi);
    CHECK(integrate(dens, m->grid().weights) == doctest::Approx(2.0).epsilon(1e-8));
    const RVector prof = radial::ma_profile(g, phi.profile());
    for (Eigen::Index a = 0; a < g.size(); ++a) {
      const double u = g.u(a), c = g.c(a);
      const double expect = 2.0 + eps * ((c - u) * (c - u) - 2.0 * u * c);
      CHECK(prof(a) == doctest::Approx(expect).epsilon(1e-11));
    }
  }
  const PotentialField sine = RadialFamily{RadialFamily::Kind::Sine, 0.3}.on(m);
  CHECK(integrate(ma_density(sine), m->grid().weights) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK((ma_density(sine.shifted(3.0)) - ma_density(sine)).norm() < 1e-10);
}

TEST_CASE("radial profile reproduces node values and interpolates spectrally") {
  const ModelPtr m = build_p1_model(2, 40, 9);
  const RadialGrid& g = *m->radial();
  const PotentialField phi = RadialFamily{RadialFamily::Kind::Sine, 0.4}.on(m);
  CHECK((m->broadcast_radial(phi.profile()) - phi.values()).norm() < 1e-15);
  RVector pts(3);
  pts << 0.0, 0.3, 1.0;
  const RVector v = radial::interpolate(g, phi.profile(), pts);
  for (int i = 0; i < 3; ++i)
    CHECK(v(i) == doctest::Approx(0.4 * std::sin(M_PI * pts(i))).epsilon(1e-12).scale(1.0));
}

TEST_CASE("discrete backend validates its input") {
  std::mt19937_64 rng(1);
  const ModelPtr m = test::random_discrete(2, 7, rng);
  CHECK(m->dim(1) == 3);
  CHECK(m->dim(2) == 4);
  CHECK(m->radial() == nullptr);
  std::vector<CMatrix> bad = {CMatrix::Ones(3, 5)};
  CHECK_THROWS_AS(build_discrete_model(5, bad, RVector::Constant(5, 0.2)), DomainError);
  std::vector<CMatrix> ok = {CMatrix::Identity(3, 3)};
  CHECK_THROWS_AS(build_discrete_model(3, ok, RVector::Constant(3, 0.5)), DomainError);
  const PotentialField zero = PotentialField::from_nodes(m, RVector::Zero(7));
  CHECK_THROWS_AS(ma_density(zero), UnsupportedError);
}
