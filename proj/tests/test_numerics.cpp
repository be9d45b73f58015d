#include <doctest.h>

#include "covspde/polynomial.hpp"
#include "covspde/quadrature.hpp"
#include "covspde/rng.hpp"
#include "covspde/special.hpp"

#include <cmath>
#include <vector>

using namespace covspde;

TEST_CASE("philox known-answer vectors") {
  // Random123 reference outputs for philox4x32_10.
  auto z = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(z[0] == 0x6627e8d5u);
  CHECK(z[1] == 0xe169c58du);
  CHECK(z[2] == 0xbc57ac4cu);
  CHECK(z[3] == 0x9b00dbd8u);
  auto f = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      {0xffffffffu, 0xffffffffu});
  CHECK(f[0] == 0x408f276du);
  CHECK(f[1] == 0x41c83b0eu);
  CHECK(f[2] == 0xa20bc7c6u);
  CHECK(f[3] == 0x6d5451fdu);
}

TEST_CASE("counter streams are pure functions of (seed, stream, index)") {
  CounterRng a(42, Stream::Atom, 7), b(42, Stream::Atom, 7), c(42, Stream::Atom, 8);
  for (int i = 0; i < 10; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x != c.uniform());
  }
}

TEST_CASE("uniform and normal moments") {
  CounterRng r(1, Stream::Test, 0);
  const int n = 200000;
  double s = 0, s2 = 0, z = 0, z2 = 0, z4 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u > 0.0);
    CHECK_UNARY(u < 1.0);
    s += u;
    s2 += u * u;
    const double g = r.normal();
    z += g;
    z2 += g * g;
    z4 += g * g * g * g;
  }
  CHECK(s / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(s2 / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));
  CHECK(std::fabs(z / n) < 4.0 / std::sqrt(n));
  CHECK(z2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(z4 / n == doctest::Approx(3.0).epsilon(0.03));
}

TEST_CASE("poisson sampler mean and variance") {
  for (double mu : {0.3, 4.0, 11.9, 12.5, 128.0, 4096.0}) {
    const int n = 40000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      CounterRng r(99, Stream::PoissonCount, static_cast<std::uint64_t>(i));
      const double k = static_cast<double>(r.poisson(mu));
      s += k;
      s2 += k * k;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CAPTURE(mu);
    CHECK(std::fabs(mean - mu) < 4.0 * std::sqrt(mu / n));
    CHECK(var == doctest::Approx(mu).epsilon(0.05));
  }
}

TEST_CASE("gauss-legendre exactness") {
  for (int n : {1, 2, 5, 16, 40}) {
    const auto& q = gauss_legendre(n);
    for (int deg = 0; deg <= 2 * n - 1; ++deg) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += q.w[i] * std::pow(q.x[i], deg);
      const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
      CAPTURE(n);
      CAPTURE(deg);
      CHECK(std::fabs(s - exact) < 1e-13);
    }
  }
}

TEST_CASE("pairwise sum is order-fixed and accurate") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v.data(), v.size()) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(pairwise_sum(v.data(), 0) == 0.0);
}

TEST_CASE("bessel K sequences") {
  for (double nu : {-2.5, -0.5, 0.5, 1.5, 0.25, 1.25, 0.0, 1.0}) {
    for (double x : {0.05, 0.7, 2.0, 9.0, 30.0}) {
      double out[6];
      bessel_k_seq(nu, x, 6, out);
      for (int k = 0; k < 6; ++k) {
        const double ref = std::cyl_bessel_k(std::fabs(nu + k), x);
        CAPTURE(nu);
        CAPTURE(x);
        CAPTURE(k);
        CHECK(out[k] == doctest::Approx(ref).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(bessel_k(0.5, 0.0), Error);
}

TEST_CASE("matern constant gives the yukawa kernel in d=3") {
  const double r = 1.7;
  const double v = matern_constant(3, 1.0) * std::pow(r, -0.5) * bessel_k(0.5, r);
  CHECK(v == doctest::Approx(std::exp(-r) / (4 * kPi * r)).epsilon(1e-14));
}

TEST_CASE("polynomial algebra") {
  const Poly x = Poly::variable(0), y = Poly::variable(1);
  const Poly p = (x + y) * (x - y);
  const double pt[2] = {3.0, 2.0};
  CHECK(p.eval(pt, 2).real() == doctest::Approx(5.0));
  CHECK(p.degree() == 2);
  CHECK(p.derivative(0).eval(pt, 2).real() == doctest::Approx(6.0));
  CHECK(p.times_variable(1).eval(pt, 2).real() == doctest::Approx(10.0));
  CHECK((p - p).is_zero());
}

TEST_CASE("faddeev-leverrier adjugate on a numeric matrix") {
  Eigen::MatrixXd a(3, 3);
  a << 2, -1, 0.5, 1, 3, -2, 0.25, 4, 1;
  PolyMatrix pm(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) pm(i, j) = Poly::constant(a(i, j));
  const auto ad = adjugate_and_det(pm);
  const double det = a.determinant();
  CHECK(ad.det.eval(nullptr, 0).real() == doctest::Approx(det).epsilon(1e-13));
  const MatC adj = ad.adj.eval(nullptr, 0);
  const MatR ref = det * a.inverse();
  CHECK(max_abs(adj.real() - ref) < 1e-12);
}
