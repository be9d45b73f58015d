#include <doctest.h>

#include "covspde/quadrature.hpp"
#include "covspde/solve.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace covspde;

namespace {

LevyMeasure::Params params(double rho, double scale) {
  LevyMeasure::Params p;
  p.rho = rho;
  p.scale = scale;
  return p;
}

NoiseSpec mixed_spec(const Representation& rep, double gauss, double rho, double scale) {
  std::optional<LevyMeasure> l;
  if (rho > 0.0) l = LevyMeasure(LevyMeasure::Family::RadialGauss, rep, params(rho, scale));
  return NoiseSpec(rep, gauss * MatR::Identity(rep.dim(), rep.dim()), l);
}

double rel(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

}  // namespace

TEST_CASE("zero noise gives the zero field") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const Lattice lat(3, 8.0, 8);
  const auto nr = sample_noise(NoiseSpec(op.rep_in(), MatR::Zero(6, 6)), lat, 1);
  const auto phi = solve_lattice(op, nr);
  CHECK(max_abs(Eigen::Map<const VecR>(phi.lattice_values().v.data(), phi.lattice_values().v.size())) == 0.0);
  CounterRng rng(2, Stream::Test, 0);
  CHECK(eval_pairing(phi, random_trig_field(rng, 3, 8.0, 6, 3, 2)) == 0.0);
  const auto pts = solve_points(op, nr);
  CHECK(pts.atoms() == 0);
  const double x[3] = {1.0, 2.0, 3.0};
  CHECK(max_abs(pts.value(x)) == 0.0);
}

TEST_CASE("algebraic operator divides the noise by m") {
  const auto op = scalar_operator(2, 2.5);
  const Lattice lat(2, 4.0, 16);
  const auto nr = sample_noise(mixed_spec(op.rep_in(), 1.0, 1.0, 1.0), lat, 9);
  const auto eta = nr.lattice_values();
  const auto phi = solve_lattice(op, nr).lattice_values();
  double err = 0.0;
  for (std::size_t i = 0; i < eta.v.size(); ++i) err = std::max(err, std::fabs(phi.v[i] - eta.v[i] / 2.5));
  CHECK(err < 1e-12 * max_abs(Eigen::Map<const VecR>(eta.v.data(), eta.v.size())));
}

TEST_CASE("lattice solve inverts the adjoint operator") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const Lattice lat(3, 6.0, 16);
  const auto nr = sample_noise(mixed_spec(op.rep_in(), 0.7, 0.5, 1.0), lat, 3);
  for (Deposit dep : {Deposit::NearestSite, Deposit::Spectral}) {
    const auto phi = solve_lattice(op, nr, dep);
    CHECK(solve_residual(phi, nr, dep) < 1e-6);
  }
}

TEST_CASE("sparse pathwise pairing equals the full lattice solve") {
  const auto op = proca_operator(1.2, 1.0, -1.0);
  const auto g = green_of(op);
  const Lattice lat(3, 6.0, 16);
  const auto nr = sample_noise(mixed_spec(op.rep_in(), 0.5, 0.4, 1.0), lat, 21);
  REQUIRE(nr.atoms() > 10);
  CounterRng rng(4, Stream::Test, 0);
  for (Deposit dep : {Deposit::NearestSite, Deposit::Spectral}) {
    const auto phi = solve_lattice(g, nr, dep);
    for (int t = 0; t < 3; ++t) {
      const TrigField f = random_trig_field(rng, 3, 6.0, 6, 4, 3);
      const double full = eval_pairing(phi, f);
      const double sparse = pathwise_pairing(*g, nr, f, dep);
      CHECK(std::fabs(full - sparse) < 1e-10 * std::max(1.0, std::fabs(full)));
    }
  }
  // Fractional kernels share the same path.
  const auto frac = GreenFunction::scalar_power(3, 1.0, 0.25);
  const auto nf = sample_noise(mixed_spec(builtin_representation("trivial", 3), 1.0, 0.0, 0.0), lat, 5);
  const auto phf = solve_lattice(frac, nf);
  const TrigField f = random_trig_field(rng, 3, 6.0, 1, 5, 4);
  CHECK(rel(eval_pairing(phf, f), pathwise_pairing(*frac, nf, f)) < 1e-10);
}

TEST_CASE("single-mode pairing is a Fourier coefficient") {
  const auto op = klein_gordon_operator(2, 1.0);
  const Lattice lat(2, 5.0, 16);
  const auto nr = sample_noise(mixed_spec(op.rep_in(), 1.0, 0.0, 0.0), lat, 8);
  const auto phi = solve_lattice(op, nr);
  const auto& v = phi.lattice_values();
  TrigField f(2, 5.0, 3);
  VecC c = VecC::Zero(3);
  c(1) = cplx(0.3, -0.8);
  f.add({2, -1}, c);
  // a^d sum_s phi_1(x_s) Re(c e^{ikx_s}) = a^d Re(c conj(phi^_1(k))).
  std::vector<cplx> buf(lat.sites());
  for (std::size_t s = 0; s < lat.sites(); ++s) buf[s] = v.at(s, 1);
  fft_forward(lat, buf.data());
  const cplx ph = buf[lat.index({2, -1})];
  CHECK(eval_pairing(phi, f) == doctest::Approx(lat.cell_volume() * (c(1) * std::conj(ph)).real()).epsilon(1e-11));
}

TEST_CASE("pairing is linear") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const Lattice lat(3, 6.0, 8);
  const auto nr = sample_noise(mixed_spec(op.rep_in(), 1.0, 0.5, 1.0), lat, 12);
  const auto phi = solve_lattice(op, nr);
  CounterRng rng(6, Stream::Test, 0);
  const TrigField f = random_trig_field(rng, 3, 6.0, 6, 3, 3), g = random_trig_field(rng, 3, 6.0, 6, 3, 3);
  const double a = 0.37, b = -2.1;
  const double lhs = eval_pairing(phi, f * a + g * b);
  const double rhs = a * eval_pairing(phi, f) + b * eval_pairing(phi, g);
  CHECK(std::fabs(lhs - rhs) < 1e-10 * std::max(1.0, std::fabs(lhs)));
  const double z = eval_pairing(phi, TrigField(3, 6.0, 6));
  CHECK(z == 0.0);
}

TEST_CASE("point backend evaluates the kernel sum") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const auto spec = mixed_spec(op.rep_in(), 0.0, 0.05, 1.0);
  // Box far larger than the cutoff: only the direct term survives.
  const Lattice lat(3, 40.0, 8);
  const auto nr = sample_noise(spec, lat, 31, 1.0);
  const auto phi = solve_points(g, nr);
  CHECK(!phi.periodic());
  CHECK(phi.cutoff() == doctest::Approx(12.0));
  REQUIRE(phi.atoms() > 2);
  const double y[3] = {20.0, 20.5, 19.0};
  VecR direct = VecR::Zero(6);
  for (std::size_t j = 0; j < phi.atoms(); ++j) {
    VecR dx(3);
    for (int k = 0; k < 3; ++k) dx(k) = phi.position(j)[k] - y[k];
    if (dx.norm() > 12.0) continue;
    direct += g->point(dx).transpose() * Eigen::Map<const VecR>(phi.mark(j), 6);
  }
  CHECK(max_abs(phi.value(y) - direct) < 1e-13 * std::max(1.0, max_abs(direct)));
  CHECK_THROWS_WITH(phi.value(phi.position(0)), "evaluation at atom location");
  CounterRng rng(1, Stream::Test, 0);
  CHECK_THROWS_WITH(eval_pairing(phi, random_trig_field(rng, 3, 40.0, 6, 1, 1)),
                    "test function support exceeds sampling box");
  CHECK_THROWS_WITH(solve_points(g, sample_noise(mixed_spec(op.rep_in(), 1.0, 0.1, 1.0), lat, 1)),
                    "point backend requires pure Poisson noise");
}

TEST_CASE("periodic point field wraps images") {
  const auto g = GreenFunction::scalar_power(3, 1.0, 1.0);
  const auto rep = builtin_representation("trivial", 3);
  const Lattice lat(3, 5.0, 8);
  const auto nr = sample_noise(mixed_spec(rep, 0.0, 0.03, 1.0), lat, 44);
  REQUIRE(nr.atoms() > 0);
  const auto phi = solve_points(g, nr);
  const double y[3] = {0.3, 4.1, 2.2};
  double direct = 0.0;
  for (std::size_t j = 0; j < phi.atoms(); ++j)
    for (int i = -4; i <= 4; ++i)
      for (int k = -4; k <= 4; ++k)
        for (int l = -4; l <= 4; ++l) {
          const double dx = phi.position(j)[0] + 5.0 * i - y[0], dy = phi.position(j)[1] + 5.0 * k - y[1],
                       dz = phi.position(j)[2] + 5.0 * l - y[2];
          const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
          if (r <= 12.0) direct += phi.mark(j)[0] * std::exp(-r) / (4.0 * kPi * r);
        }
  CHECK(phi.value(y)(0) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("point and spectral-lattice pairings agree pathwise") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const Lattice lat(3, 6.0, 16);
  const auto nr = sample_noise(mixed_spec(op.rep_in(), 0.0, 0.3, 1.0), lat, 77);
  const auto pts = solve_points(g, nr);
  const auto grid = solve_lattice(g, nr, Deposit::Spectral);
  CounterRng rng(8, Stream::Test, 0);
  for (int t = 0; t < 3; ++t) {
    const TrigField f = random_trig_field(rng, 3, 6.0, 6, 3, 2);
    const double a = eval_pairing(pts, f), b = eval_pairing(grid, f);
    CHECK(std::fabs(a - b) < 1e-10 * std::max(1.0, std::fabs(a)));
  }
}

TEST_CASE("point pairing against radial quadrature of the kernel") {
  // For f = Re(c e^{ikx}): (phi, f) = sum_j alpha_j Re(c e^{ikx_j} int G(z) e^{-ikz} dz),
  // the z-integral done in spherical shells with the position-space kernel.
  const double m = 1.3, L = 5.0;
  const auto g = GreenFunction::scalar_power(3, m, 1.0);
  const auto rep = builtin_representation("trivial", 3);
  const Lattice lat(3, L, 8);
  const auto nr = sample_noise(mixed_spec(rep, 0.0, 0.2, 1.0), lat, 3);
  REQUIRE(nr.atoms() > 1);
  const auto phi = solve_points(g, nr);
  TrigField f(3, L, 1);
  const cplx c(0.4, 0.9);
  f.add({1, -2, 0}, VecC::Constant(1, c));
  const VecR k = f.wavevector(f.modes()[0]);
  const double kn = k.norm();
  const auto& q = gauss_legendre(40);
  double ft = 0.0;
  for (int p = 0; p < 60; ++p) {
    const double a = 0.5 * p, b = a + 0.5;
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const double r = 0.5 * (a + b) + 0.25 * q.x[i];
      VecR x = VecR::Zero(3);
      x(0) = r;
      ft += 0.25 * q.w[i] * 4.0 * kPi * r * r * g->point(x)(0, 0) * std::sin(kn * r) / (kn * r);
    }
  }
  double expected = 0.0;
  for (std::size_t j = 0; j < nr.atoms(); ++j) {
    const double ph = k.dot(Eigen::Map<const VecR>(nr.position(j), 3));
    expected += nr.mark(j)[0] * (c * std::polar(1.0, ph)).real() * ft;
  }
  CHECK(ft == doctest::Approx(1.0 / (m * m + kn * kn)).epsilon(1e-9));
  CHECK(eval_pairing(phi, f) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("Gaussian noise gives a Gaussian pairing") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const Lattice lat(3, 6.0, 16);
  const auto spec = mixed_spec(op.rep_in(), 1.0, 0.0, 0.0);
  CounterRng rng(10, Stream::Test, 0);
  const TrigField f = random_trig_field(rng, 3, 6.0, 6, 4, 2);
  const int batches = 20, per = 1000;
  std::vector<double> k4(batches);
  for (int b = 0; b < batches; ++b) {
    double m2 = 0.0, m4 = 0.0;
    for (int s = 0; s < per; ++s) {
      const double x = pathwise_pairing(*g, sample_noise(spec, lat, b * per + s), f);
      m2 += x * x;
      m4 += x * x * x * x;
    }
    m2 /= per;
    m4 /= per;
    k4[b] = (m4 - 3.0 * m2 * m2) / (m2 * m2);
  }
  double mean = 0.0, var = 0.0;
  for (double v : k4) mean += v / batches;
  for (double v : k4) var += (v - mean) * (v - mean) / (batches - 1);
  CHECK(std::fabs(mean) < 3.0 * std::sqrt(var / batches));
}

TEST_CASE("lattice and point backends agree in law") {
  // Independent seed ranges; empirical characteristic functions of (phi, f).
  const auto op = klein_gordon_operator(2, 1.0);
  const auto g = green_of(op);
  const Lattice lat(2, 6.0, 32);
  const auto spec = mixed_spec(op.rep_in(), 0.0, 0.5, 1.0);
  CounterRng rng(12, Stream::Test, 0);
  const int n = 10000;
  for (int t = 0; t < 5; ++t) {
    const TrigField f = random_trig_field(rng, 2, 6.0, 3, 2, 2) * 0.3;
    cplx a = 0.0, b = 0.0;
    for (int s = 0; s < n; ++s) {
      const auto n1 = sample_noise(spec, lat, s);
      const auto n2 = sample_noise(spec, lat, 100000 + s);
      a += std::exp(cplx(0.0, pathwise_pairing(*g, n1, f, Deposit::NearestSite)));
      b += std::exp(cplx(0.0, eval_pairing(solve_points(g, n2), f)));
    }
    a /= double(n);
    b /= double(n);
    // Each mean has per-component variance at most 1/n.
    const double se = std::sqrt(2.0 / n);
    CHECK(std::fabs(a.real() - b.real()) < 3.0 * se);
    CHECK(std::fabs(a.imag() - b.imag()) < 3.0 * se);
  }
}
