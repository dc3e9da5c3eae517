#include <doctest.h>

#include <cmath>
#include <random>

#include "qkrf/error.hpp"
#include "qkrf/herm.hpp"
#include "support.hpp"

using namespace qkrf;

using test::random_pd;

TEST_CASE("HermForm rejects non-Hermitian and indefinite input") {
  CMatrix a(2, 2);
  a << 1.0, cdouble(0.0, 1.0), 0.0, 1.0;
  CHECK_THROWS_AS(HermForm(1, a), DomainError);
  CMatrix b(2, 2);
  b << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(HermForm(1, b), DomainError);
  CHECK_THROWS_AS(HermForm(1, CMatrix::Identity(2, 3)), DimensionError);
}

TEST_CASE("generalized eigenvalues of a 2x2 pair match the characteristic polynomial") {
  CMatrix a(2, 2), b(2, 2);
  a << 3.0, cdouble(1.0, 1.0), cdouble(1.0, -1.0), 2.0;
  b << 2.0, cdouble(0.0, 0.5), cdouble(0.0, -0.5), 1.0;
  // det(A - μB) = 0: detB μ^2 - (a11 b22 + a22 b11 - 2 Re(a12 conj b12)) μ + detA = 0
  const double detA = 6.0 - 2.0, detB = 2.0 - 0.25;
  const double mid = 3.0 * 1.0 + 2.0 * 2.0 - 2.0 * std::real(a(0, 1) * std::conj(b(0, 1)));
  const double disc = std::sqrt(mid * mid - 4.0 * detA * detB);
  const RVector mu = gen_eig(a, b);
  CHECK(mu(0) == doctest::Approx((mid - disc) / (2.0 * detB)).epsilon(1e-13));
  CHECK(mu(1) == doctest::Approx((mid + disc) / (2.0 * detB)).epsilon(1e-13));
}

TEST_CASE("orthonormal_orthogonal frame diagonalizes both forms") {
  std::mt19937_64 rng(7);
  for (int n : {1, 3, 6}) {
    const CMatrix h = random_pd(n, rng), b = random_pd(n, rng, 3.0);
    const SimultaneousFrame f = orthonormal_orthogonal(h, b);
    const CMatrix hh = f.frame.adjoint() * h * f.frame;
    const CMatrix bb = f.frame.adjoint() * b * f.frame;
    CHECK((hh - CMatrix::Identity(n, n)).norm() < 1e-11);
    CHECK((bb - CMatrix(f.norms.cast<cdouble>().asDiagonal())).norm() < 1e-10 * b.norm());
    const RVector mu = gen_eig(b, h);
    CHECK((mu - f.norms).norm() < 1e-11 * mu.norm());
  }
}

TEST_CASE("diagonal fast paths agree with dense solves") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  const int n = 5;
  CMatrix h = CMatrix::Zero(n, n), b = CMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    h(i, i) = u(rng);
    b(i, i) = u(rng);
  }
  CMatrix hp = h, bp = b;
  hp(0, 1) = 1e-300;  // defeats the exact-diagonal test
  hp(1, 0) = 1e-300;
  CHECK((gen_eig(b, h) - gen_eig(bp, hp)).norm() < 1e-13);
  CHECK((eigh(h).values - eigh(hp).values).norm() < 1e-13);
  const SimultaneousFrame f = orthonormal_orthogonal(h, b);
  CHECK((f.frame.adjoint() * h * f.frame - CMatrix::Identity(n, n)).norm() < 1e-13);
}

TEST_CASE("matrix log/exp round trip and geodesic endpoints") {
  std::mt19937_64 rng(11);
  const HermForm h0(1, random_pd(4, rng)), h1(1, random_pd(4, rng, 2.0));
  const CMatrix back = matrix_exp(matrix_log(h1));
  CHECK((back - h1.entries()).norm() < 1e-11 * h1.entries().norm());
  CHECK(log_gap(geodesic(h0, h1, 0.0), h0) < 1e-11);
  CHECK(log_gap(geodesic(h0, h1, 1.0), h1) < 1e-10);
  // midpoint is the geometric mean: H_{1/2} H0^{-1} H_{1/2} = H1
  const CMatrix mid = geodesic(h0, h1, 0.5).entries();
  CHECK((mid * h0.entries().inverse() * mid - h1.entries()).norm() < 1e-10 * h1.entries().norm());
}

TEST_CASE("relative entropy and log-det of explicit pairs") {
  CMatrix a = CMatrix::Zero(2, 2), b = CMatrix::Identity(2, 2);
  a(0, 0) = 0.5;
  a(1, 1) = 1.5;
  // (1/2)(0.5 log 0.5 + 1.5 log 1.5)
  CHECK(rel_entropy(a, b) == doctest::Approx(0.5 * (0.5 * std::log(0.5) + 1.5 * std::log(1.5))));
  CHECK(log_det_relative(a, b) == doctest::Approx(std::log(0.75)));
  CHECK(log_gap(HermForm(1, a), HermForm(1, b)) ==
        doctest::Approx(std::hypot(std::log(0.5), std::log(1.5))));
}

TEST_CASE("geodesic ray is generated by the weights in the adapted flag") {
  std::mt19937_64 rng(5);
  const int n = 3;
  const HermForm h0(1, random_pd(n, rng));
  CMatrix adapted = CMatrix::Identity(n, n);
  adapted(0, 1) = 0.3;
  adapted(2, 1) = cdouble(0.1, 0.2);
  const std::vector<double> w = {2.0, 1.0, -0.5};
  CHECK(log_gap(geodesic_ray(h0, adapted, w, 0.0), h0) < 1e-12);
  const CMatrix q = orthonormalize_flag(h0, adapted);
  CHECK((q.adjoint() * h0.entries() * q - CMatrix::Identity(n, n)).norm() < 1e-12);
  // flag: column a of q lies in the span of the first a+1 adapted columns
  const CMatrix r = adapted.inverse() * q;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) CHECK(std::abs(r(i, j)) < 1e-12);
  const double t = 1.7;
  const CMatrix ht = geodesic_ray(h0, adapted, w, t).entries();
  const CMatrix gram = q.adjoint() * ht * q;
  for (int a = 0; a < n; ++a) {
    CHECK(std::real(gram(a, a)) == doctest::Approx(std::exp(-w[a] * t)).epsilon(1e-10));
    for (int b = 0; b < a; ++b) CHECK(std::abs(gram(a, b)) < 1e-10);
  }
}

TEST_CASE("relative entropy of diag(2, 2/3, 1/3) against the identity") {
  CMatrix a = CMatrix::Zero(3, 3);
  a.diagonal() << 2.0, 2.0 / 3.0, 1.0 / 3.0;
  const double expect =
      (2.0 * std::log(2.0) + (2.0 / 3.0) * std::log(2.0 / 3.0) + (1.0 / 3.0) * std::log(1.0 / 3.0)) / 3.0;
  CHECK(rel_entropy(a, CMatrix::Identity(3, 3)) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(expect == doctest::Approx(0.24993).epsilon(1e-4));
}

TEST_CASE("congruence invariance of gen_eig and rel_entropy") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const CMatrix a = random_pd(4, rng), b = random_pd(4, rng, 2.0);
    CMatrix p = random_pd(4, rng);
    p(0, 3) += cdouble(0.3, -0.7);
    const CMatrix pa = p.adjoint() * a * p, pb = p.adjoint() * b * p;
    CHECK((gen_eig(a, b) - gen_eig(pa, pb)).norm() < 1e-9);
    CHECK(rel_entropy(a, b) == doctest::Approx(rel_entropy(pa, pb)).epsilon(1e-9));
  }
}

TEST_CASE("geodesic matches the explicit symmetric-space formula") {
  std::mt19937_64 rng(13);
  const HermForm h0(2, random_pd(5, rng)), h1(2, random_pd(5, rng, 4.0));
  const CMatrix r = matrix_power(h0.entries(), 0.5), ri = matrix_power(h0.entries(), -0.5);
  const CMatrix expect = r * matrix_power(ri * h1.entries() * ri, 0.3) * r;
  CHECK((geodesic(h0, h1, 0.3).entries() - expect).norm() < 1e-9 * expect.norm());
  CHECK(log_gap(geodesic(h0, h1, 0.5), geodesic(h1, h0, 0.5)) < 1e-9);
  CHECK(log_gap(geodesic(h0, h0, 0.7), h0) < 1e-12);
  CMatrix d = CMatrix::Identity(2, 2);
  d(0, 0) = std::exp(2.0);
  const CMatrix half = geodesic(HermForm(1, CMatrix::Identity(2, 2)), HermForm(1, d), 0.5).entries();
  CHECK(std::real(half(0, 0)) == doctest::Approx(std::exp(1.0)));
  CHECK(std::real(half(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("scalar cases of log_gap and geodesic_ray") {
  const int n = 4;
  const HermForm id(1, CMatrix::Identity(n, n));
  CHECK(log_gap(id.scaled(std::exp(0.7)), id) == doctest::Approx(0.7 * 2.0));
  const std::vector<double> c(n, 1.5);
  CHECK(log_gap(geodesic_ray(id, CMatrix::Identity(n, n), c, 2.0), id.scaled(std::exp(-3.0))) < 1e-12);
  const HermForm i2(1, CMatrix::Identity(2, 2));
  const std::vector<double> w = {1.0, 0.0};
  const CMatrix ray = geodesic_ray(i2, CMatrix::Identity(2, 2), w, 2.0).entries();
  CHECK(std::real(ray(0, 0)) == doctest::Approx(std::exp(-2.0)));
  CHECK(std::real(ray(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("matrix_log of non-positive input reports the eigenvalue") {
  CMatrix a = CMatrix::Identity(2, 2);
  a(1, 1) = -0.5;
  CHECK_THROWS_AS(matrix_log(a), DomainError);
}
