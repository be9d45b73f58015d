#include <doctest.h>

#include "covspde/green.hpp"
#include "covspde/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace covspde;

namespace {

VecR random_vec(CounterRng& r, int d, double s = 1.0) {
  VecR v(d);
  for (int i = 0; i < d; ++i) v(i) = s * r.normal();
  return v;
}

// Direct O(S^2)-free DFT of the lattice Green function at one site.
MatC direct_dft_site(const GreenFunction& g, const Lattice& lat, std::size_t site) {
  const VecR x = lat.position(site);
  MatC acc = MatC::Zero(g.dim(), g.dim());
  for (std::size_t m = 0; m < lat.sites(); ++m) {
    const VecR p = lat.momentum(m);
    const MatC inv = g.lattice_symbol(lat, m).inverse();
    acc += std::exp(cplx(0.0, p.dot(x))) * inv;
  }
  return acc / std::pow(lat.L(), lat.d());
}

// Zero-mass operator diag(0, I) with d on trivial+vector: det = |p|^2.
CovariantOperator massless_fixture() {
  const auto rep = builtin_representation("trivial+vector", 3);
  std::vector<MatR> B;
  for (int j = 0; j < 3; ++j) {
    MatR b = MatR::Zero(4, 4);
    b(0, j + 1) = b(j + 1, 0) = 1.0;
    B.push_back(b);
  }
  MatR M = MatR::Identity(4, 4);
  M(0, 0) = 0.0;
  return CovariantOperator(rep, rep, B, M);
}

}  // namespace

TEST_CASE("momentum green function inverts the full symbol") {
  CHECK(momentum_green(scalar_operator(3, 2.0), VecR::Ones(3))(0, 0) == cplx(0.5));
  const auto proca = proca_operator(1.0, 1.0, -1.0);
  CHECK(max_abs(momentum_green(proca, VecR::Zero(3)) - MatC::Identity(6, 6)) < 1e-15);
  CounterRng r(1, Stream::Test, 0);
  for (int t = 0; t < 64; ++t) {
    const VecR p = random_vec(r, 3, 3.0);
    CHECK(max_abs(full_symbol(proca, p) * momentum_green(proca, p) - MatC::Identity(6, 6)) < 1e-10);
  }
  VecR px(3);
  px << 1, 0, 0;
  CHECK(max_abs(full_symbol(proca, px) * momentum_green(proca, px) - MatC::Identity(6, 6)) < 1e-12);
}

TEST_CASE("green function refuses inadmissible spectra") {
  CHECK_THROWS_WITH(momentum_green(proca_operator(0.0, 1.0, -1.0), VecR::Zero(3)),
                    "Green function undefined: non-admissible mass spectrum");
  CHECK_THROWS_WITH(momentum_green(massless_fixture(), VecR::Ones(3)), "zero mode at p=0");
}

TEST_CASE("partial fractions: constant, confluent and distinct poles") {
  CounterRng r(2, Stream::Test, 0);
  const auto s = partial_fractions(scalar_operator(3, 2.0));
  REQUIRE(s.terms.size() == 1);
  CHECK(s.terms[0].power == 0.0);
  CHECK(s.eval(VecR::Ones(3))(0, 0).real() == doctest::Approx(0.5));

  const auto proca = proca_operator(1.0, 1.0, -1.0);
  const auto pf = partial_fractions(proca);
  REQUIRE(pf.terms.size() == 2);
  CHECK(pf.terms[0].mass == doctest::Approx(1.0));
  CHECK(pf.terms[0].power == 1.0);
  CHECK(pf.terms[1].power == 2.0);
  for (int t = 0; t < 64; ++t) {
    const VecR p = random_vec(r, 3, 2.0);
    const MatC ref = momentum_green(proca, p);
    CHECK(max_abs(pf.eval(p) - ref) < 1e-8 * max_abs(ref));
  }

  const auto two = direct_sum(klein_gordon_operator(3, 1.0), klein_gordon_operator(3, 2.0));
  const auto pf2 = partial_fractions(two);
  REQUIRE(pf2.terms.size() == 2);
  CHECK(pf2.terms[0].mass == doctest::Approx(1.0));
  CHECK(pf2.terms[1].mass == doctest::Approx(2.0));
  CHECK(pf2.terms[0].power == 1.0);
  CHECK(pf2.terms[1].power == 1.0);
  for (int t = 0; t < 64; ++t) {
    const VecR p = random_vec(r, 3, 2.0);
    const MatC ref = momentum_green(two, p);
    CHECK(max_abs(pf2.eval(p) - ref) < 1e-8 * max_abs(ref));
    MatC sum = MatC::Zero(8, 8);
    for (std::size_t k = 0; k < pf2.terms.size(); ++k)
      sum += pf2.residue(k, p) / (p.squaredNorm() + std::pow(pf2.terms[k].mass, 2));
    CHECK(max_abs(sum - ref) < 1e-8 * max_abs(ref));
  }
}

TEST_CASE("scalar point kernels against the subordination oracle") {
  VecR x(3);
  x << 0.6, -1.1, 0.9;
  const double r = x.norm();
  auto yuk = GreenFunction::scalar_power(3, 1.0, 1.0);
  CHECK(yuk->point(x)(0, 0) == doctest::Approx(std::exp(-r) / (4 * kPi * r)).epsilon(1e-13));
  for (double s : {0.25, 0.5, 1.0, 1.5, 2.0}) {
    for (double m : {0.7, 1.0}) {
      auto g = GreenFunction::scalar_power(3, m, s);
      for (double rr : {0.3, 1.0, 2.5, 4.0}) {
        const double ref = oracle::matern_subordination(3, m, s, rr);
        VecR y = VecR::Zero(3);
        y(1) = rr;
        CAPTURE(s);
        CAPTURE(rr);
        CHECK(g->point(y)(0, 0) == doctest::Approx(ref).epsilon(1e-9));
      }
    }
  }
  auto g2 = GreenFunction::scalar_power(2, 1.0, 1.0);
  VecR z(2);
  z << 1.2, 0.0;
  CHECK(g2->point(z)(0, 0) == doctest::Approx(oracle::matern_subordination(2, 1.0, 1.0, 1.2)).epsilon(1e-9));
}

TEST_CASE("klein-gordon point kernel against hand-derived derivatives") {
  const double m = 1.3;
  const auto op = klein_gordon_operator(3, m);
  const oracle::Yukawa3 Y{m};
  CounterRng r(4, Stream::Test, 0);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Vector3d x = random_vec(r, 3, 1.5);
    const MatR G = point_kernel(op, x);
    // G^_00 = m/(t+m^2), G^_0j = -ip_j/(t+m^2), G^_ij = d_ij/m - p_i p_j/(m(t+m^2)).
    MatR ref = MatR::Zero(4, 4);
    ref(0, 0) = m * Y.y(x.norm());
    const Eigen::Vector3d gr = Y.gradient(x);
    for (int j = 0; j < 3; ++j) ref(0, j + 1) = ref(j + 1, 0) = -gr(j);
    ref.bottomRightCorner(3, 3) = Y.hessian(x) / m;
    CHECK(max_abs(G - ref) < 1e-12 * max_abs(ref));
  }
}

TEST_CASE("proca point kernel against hand-derived derivatives") {
  const double m = 1.0, b = 1.0, c = -1.0;
  const auto op = proca_operator(m, b, c);
  const oracle::Yukawa3 Y{m};
  CounterRng r(6, Stream::Test, 0);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Vector3d x = random_vec(r, 3, 1.5);
    const MatR G = point_kernel(op, x);
    // Diagonal blocks m Y - H/m, off-diagonal blocks (b or c) * eps_{ijk} d_j Y.
    const Eigen::Matrix3d diag = m * Y.y(x.norm()) * Eigen::Matrix3d::Identity() - Y.hessian(x) / m;
    const Eigen::Vector3d gr = Y.gradient(x);
    Eigen::Matrix3d curl;
    curl << 0, -gr(2), gr(1), gr(2), 0, -gr(0), -gr(1), gr(0), 0;
    MatR ref(6, 6);
    ref << diag, b * curl, c * curl, diag;
    CHECK(max_abs(G - ref) < 1e-12 * max_abs(ref));
  }
}

TEST_CASE("point kernel covariance G(Rx) = tau(R) G(x) tau'(R)^T") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto vec = builtin_representation("vector", 3);
  CounterRng r(7, Stream::Test, 0);
  for (int t = 0; t < 8; ++t) {
    const std::vector<double> ang = {r.normal(), r.normal(), r.normal()};
    const MatR R = compose_rotations(vec, ang);
    const MatR T = compose_rotations(op.rep_in(), ang);
    const MatR Tp = compose_rotations(op.rep_out(), ang);
    const VecR x = random_vec(r, 3, 1.5);
    const MatR lhs = point_kernel(op, R * x);
    CHECK(max_abs(lhs - T * point_kernel(op, x) * Tp.transpose()) < 1e-12 * max_abs(lhs));
  }
}

TEST_CASE("point kernel errors and far-field bound") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  CHECK_THROWS_WITH(point_kernel(op, VecR::Zero(3)), "kernel singular at origin");
  VecR x0(3), x1(3);
  x0 << 1, 0, 0;
  x1 << 0, 8, 0;
  CHECK(max_abs(point_kernel(op, x1)) < std::exp(-8.0) * max_abs(point_kernel(op, x0)));
  CHECK(max_abs(point_kernel(scalar_operator(3, 1.0), x0)) == 0.0);
}

TEST_CASE("lattice kernel of a pure mass term is the lattice delta") {
  const Lattice lat(3, 4.0, 8);
  auto k = lattice_kernel(scalar_operator(3, 1.0), lat);
  CHECK(k->values[0] == doctest::Approx(1.0 / lat.cell_volume()).epsilon(1e-13));
  double rest = 0.0;
  for (std::size_t s = 1; s < lat.sites(); ++s) rest = std::max(rest, std::fabs(k->values[s]));
  CHECK(rest < 1e-12);
}

TEST_CASE("lattice kernel matches a direct DFT and inverts the lattice symbol") {
  const Lattice lat(3, 6.0, 8);
  const auto op = proca_operator(1.0, 1.0, -1.0);
  auto g = green_of(op);
  auto k = lattice_kernel(*g, lat);
  for (std::size_t site : {std::size_t{0}, std::size_t{9}, std::size_t{77}, lat.sites() - 1}) {
    const MatC ref = direct_dft_site(*g, lat, site);
    CHECK(max_abs(ref.imag()) < 1e-12);
    CHECK(max_abs(k->at(site) - ref.real()) < 1e-12);
  }
  CHECK(lattice_kernel_residual(*g, *k) < 1e-12);
  CHECK(lattice_kernel_residual(*g, *k, Exec::Serial) == lattice_kernel_residual(*g, *k, Exec::Parallel));
}

TEST_CASE("lattice kernel is cached and its construction is execution independent") {
  const Lattice lat(3, 6.0, 16);
  const auto g = GreenFunction::scalar_power(3, 1.0, 0.75);
  auto a = lattice_kernel(*g, lat, false, Exec::Serial);
  auto b = lattice_kernel(*g, lat, false, Exec::Parallel);
  CHECK(a.get() == b.get());
  clear_kernel_cache();
  auto c = lattice_kernel(*g, lat, false, Exec::Parallel);
  CHECK(a->values == c->values);
}

TEST_CASE("wrap-around precondition") {
  const Lattice lat(3, 4.0, 8);
  CHECK_THROWS_WITH(lattice_kernel(proca_operator(1.0, 1.0, -1.0), lat),
                    "box too small for mass gap: wrap-around exceeds tolerance");
  CHECK_NOTHROW(lattice_kernel(proca_operator(1.0, 1.0, -1.0), lat, true));
}

TEST_CASE("fractional kernel") {
  CHECK_THROWS_AS(fractional_kernel(0.0, Lattice(3, 8.0, 8)), Error);
  CHECK_THROWS_AS(fractional_kernel(0.75, Lattice(3, 8.0, 8)), Error);
  const Lattice lat(3, 8.0, 16);
  for (double lam : {0.25, 0.5}) {
    auto k = fractional_kernel(lam, lat);
    // Zero mode: a^d sum_x K(x) = (1 + 0)^(-lambda) = 1.
    double s = 0.0, s2 = 0.0;
    for (double v : k->values) {
      s += v;
      s2 += v * v;
    }
    CHECK(s * lat.cell_volume() == doctest::Approx(1.0).epsilon(1e-12));
    // Parseval: two-point at zero separation.
    double ref = 0.0;
    for (std::size_t m = 0; m < lat.sites(); ++m) ref += std::pow(1.0 + lat.momentum(m).squaredNorm(), -2 * lam);
    ref /= std::pow(lat.L(), 3);
    CHECK(s2 * lat.cell_volume() == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("decay profile rates") {
  std::vector<double> radii = {2, 3, 4, 5, 6};
  const auto s = decay_profile(*GreenFunction::scalar_power(3, 1.0, 1.0), radii);
  REQUIRE(s.rate.has_value());
  CHECK(*s.rate >= 0.8);
  CHECK(*s.rate <= 1.1);
  CHECK(s.pass);
  const auto p = decay_profile(proca_operator(1.0, 1.0, -1.0), radii);
  REQUIRE(p.rate.has_value());
  CHECK(*p.rate >= 0.8);
  CHECK(*p.rate <= 1.1);
  CHECK(p.pass);
  const auto e = decay_profile(proca_operator(1.0, 1.0, -1.0), {});
  CHECK(e.radii.empty());
  CHECK(e.shell_max.empty());
  CHECK_FALSE(e.rate.has_value());
}
