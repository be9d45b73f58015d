#include <doctest.h>

#include "covspde/cosurface.hpp"
#include "covspde/quadrature.hpp"
#include "covspde/special.hpp"

#include <cmath>

using namespace covspde;

namespace {

// (eta^eps * F)(x) in d = 3 for a radial F with an integrable singularity:
// spherical coordinates around x, the angular part reduced to one cosine.
template <class F>
double convolve3(const Mollifier& m, F&& f, double r) {
  const double eps = m.eps();
  const auto& q = gauss_legendre(48);
  double s = 0.0;
  const double hi = r + eps;
  // Panels over rho in [0, r + eps] and the cosine in [-1, 1].
  const int P = 16;
  for (int p = 0; p < P; ++p) {
    const double a = hi * p / P, b = hi * (p + 1) / P;
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const double rho = 0.5 * (a + b) + 0.5 * (b - a) * q.x[i];
      double ang = 0.0;
      for (int cp = 0; cp < 8; ++cp) {
        const double ca = -1.0 + 0.25 * cp, cb = ca + 0.25;
        for (std::size_t j = 0; j < q.x.size(); ++j) {
          const double c = 0.5 * (ca + cb) + 0.125 * q.x[j];
          const double y = std::sqrt(std::max(0.0, r * r + rho * rho + 2.0 * r * rho * c));
          ang += 0.125 * q.w[j] * m.radial(y);
        }
      }
      s += 0.5 * (b - a) * q.w[i] * 2.0 * kPi * rho * rho * f(rho) * ang;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("mollifier normalization and shifted bumps") {
  for (int d : {2, 3, 4}) {
    const Mollifier m(d, 0.3);
    CHECK(m.mass() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.multiplier(0.0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(m.fourier(0.0) == doctest::Approx(1.0).epsilon(1e-10));
    for (int k = 1; k <= 4; ++k) {
      // Same Fourier profile in dimension d + 2k: unit mass and same multiplier.
      const auto& q = gauss_legendre(32);
      double mass = 0.0, mult = 0.0;
      const int D = d + 2 * k;
      for (int p = 0; p < 32; ++p)
        for (std::size_t i = 0; i < q.x.size(); ++i) {
          const double r = 0.3 * (p + 0.5 * (q.x[i] + 1.0)) / 32.0;
          const double w = 0.3 / 64.0 * q.w[i] * sphere_area(D) * std::pow(r, D - 1) * m.radial(r, k);
          mass += w;
          mult += w * sphere_mean_exp(D, 1.7 * r);
        }
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(mult == doctest::Approx(m.multiplier(1.7)).epsilon(1e-9));
    }
  }
  const Mollifier m(3, 0.2);
  const double x[3] = {0.1, 0.1, 0.15};
  CHECK(m.value(x) == 0.0);
  CHECK_THROWS_WITH(Mollifier(3, 0.0), "mollifier scale must be positive");
}

TEST_CASE("bare level reproduces the point kernel") {
  const auto g = green_of(proca_operator(1.3, 1.0, -1.0));
  const MollifiedKernel k(g, {0.0, 0.2});
  const double x[3] = {0.7, -0.4, 0.9};
  std::vector<double> out(2 * 36), ref(36);
  k.eval(x, out.data());
  g->point_into(x, ref.data());
  double err = 0.0, scale = 0.0;
  for (int e = 0; e < 36; ++e) {
    err = std::max(err, std::fabs(out[e] - ref[e]));
    scale = std::max(scale, std::fabs(ref[e]));
  }
  CHECK(err < 1e-13 * scale);
  // Outside the ball the mollified level is the bare kernel times c(mu) for
  // simple poles; check against an explicit convolution for the scalar case.
}

TEST_CASE("mollified scalar kernels against direct convolution") {
  const double mu = 1.2, eps = 0.3;
  const Mollifier m(3, eps);
  for (double s : {1.0, 2.0}) {
    const auto g = GreenFunction::scalar_power(3, mu, s);
    const MollifiedKernel k(g, {eps});
    auto Y = [&](double r) {
      return s == 1.0 ? std::exp(-mu * r) / (4.0 * kPi * r) : std::exp(-mu * r) / (8.0 * kPi * mu);
    };
    for (double r : {0.02, 0.11, 0.25, 0.299, 0.31, 0.6}) {
      const double x[3] = {r, 0.0, 0.0};
      double v;
      k.eval(x, &v);
      CHECK(v == doctest::Approx(convolve3(m, Y, r)).epsilon(1e-8));
    }
  }
}

TEST_CASE("mollified kernel solves the operator equation with bump source") {
  // sum_j B_j d_j G_eps + M G_eps = eta^eps I, checked by central differences.
  for (const auto& op : {proca_operator(1.0, 1.0, -1.0), klein_gordon_operator(3, 0.8)}) {
    const auto g = green_of(op);
    const double eps = 0.4;
    const MollifiedKernel k(g, {eps});
    const Mollifier m(3, eps);
    const int N = g->dim();
    const double h = 1e-4;
    for (const auto& xv : {std::array<double, 3>{0.05, 0.1, -0.02}, {0.2, -0.15, 0.1}, {0.1, 0.3, 0.2},
                           {0.5, 0.2, -0.1}}) {
      MatR DG = op.M() * Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                             [&] {
                               static std::vector<double> buf;
                               buf.resize(N * N);
                               k.eval(xv.data(), buf.data());
                               return buf.data();
                             }(),
                             N, N);
      for (int j = 0; j < 3; ++j) {
        std::vector<double> p(N * N), q(N * N), p2(N * N), q2(N * N);
        auto x1 = xv, x2 = xv, x3 = xv, x4 = xv;
        x1[j] += h;
        x2[j] -= h;
        x3[j] += 2 * h;
        x4[j] -= 2 * h;
        k.eval(x1.data(), p.data());
        k.eval(x2.data(), q.data());
        k.eval(x3.data(), p2.data());
        k.eval(x4.data(), q2.data());
        MatR dj(N, N);
        for (int a = 0; a < N; ++a)
          for (int b = 0; b < N; ++b)
            dj(a, b) = (8.0 * (p[a * N + b] - q[a * N + b]) - (p2[a * N + b] - q2[a * N + b])) / (12.0 * h);
        DG += op.B()[j] * dj;
      }
      const MatR target = m.value(xv.data()) * MatR::Identity(N, N);
      CHECK(max_abs(DG - target) < 1e-6 * std::max(1.0, m.value(xv.data())));
    }
  }
}

namespace {

VecR vec(std::initializer_list<double> v) {
  VecR r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

LevyMeasure radial_gauss(const Representation& rep, double rho, double scale) {
  LevyMeasure::Params p;
  p.rho = rho;
  p.scale = scale;
  return builtin_levy("radial_gauss", rep, p);
}

// Composite Gauss-Legendre over the circle parameter t of sum_mu sign A(z(t)) z'(t).
double circle_oracle(const FieldRealization& f, const ComponentMap& map) {
  const auto& q = gauss_legendre(24);
  const int P = 64;
  double s = 0.0;
  for (int p = 0; p < P; ++p)
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const double t = 2.0 * kPi * (p + 0.5 * (q.x[i] + 1.0)) / P;
      const double z[3] = {std::cos(t), std::sin(t), 0.0};
      const double dz[3] = {-std::sin(t), std::cos(t), 0.0};
      const VecR v = f.value(z);
      double a = 0.0;
      for (int mu = 0; mu < 3; ++mu) a += map.sign[mu] * v(map.comp[mu]) * dz[mu];
      s += kPi / P * q.w[i] * a;
    }
  return s;
}

Loop regular_polygon(int n, double radius) {
  std::vector<VecR> v;
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * kPi * k / n;
    v.push_back(vec({radius * std::cos(t), radius * std::sin(t), 0.0}));
  }
  return Loop::polyline(v);
}

// Axis-aligned cube [-1, 1]^3 with outward oriented triangles.
Surface cube() {
  Surface s;
  s.d = 3;
  for (int m = 0; m < 8; ++m) s.vertices.push_back(vec({m & 1 ? 1.0 : -1.0, m & 2 ? 1.0 : -1.0, m & 4 ? 1.0 : -1.0}));
  const int faces[6][4] = {{0, 1, 3, 2}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 3, 7, 5}};
  for (const auto& f : faces)
    for (const auto& t : {std::array<int, 3>{f[0], f[1], f[2]}, std::array<int, 3>{f[0], f[2], f[3]}}) {
      const VecR a = s.vertices[t[0]], b = s.vertices[t[1]], c = s.vertices[t[2]];
      const Eigen::Vector3d e1 = (b - a).head<3>(), e2 = (c - a).head<3>();
      const Eigen::Vector3d mid = ((a + b + c) / 3.0).head<3>();
      if (e1.cross(e2).dot(mid) > 0.0)
        s.triangles.push_back(t);
      else
        s.triangles.push_back({t[0], t[2], t[1]});
    }
  return s;
}

}  // namespace

TEST_CASE("loop geometry") {
  const Loop c = Loop::circle(vec({0.0, 0.0, 0.0}), 1.0, 0, 1);
  CHECK(c.length() == doctest::Approx(2.0 * kPi).epsilon(1e-14));
  CHECK(c.refined().length() == doctest::Approx(2.0 * kPi).epsilon(1e-14));
  const double x[3] = {3.0, 0.0, 0.0};
  CHECK(c.distance(x) == doctest::Approx(2.0).epsilon(1e-12));
  const Loop sq = Loop::polyline({vec({0, 0, 0}), vec({1, 0, 0}), vec({1, 1, 0}), vec({0, 1, 0}), vec({0, 0, 0})});
  CHECK(sq.vertices().size() == 4);
  CHECK(sq.length() == doctest::Approx(4.0));
  CHECK(sq.refined().vertices().size() == 8);
  CHECK(sq.min_feature() == doctest::Approx(1.0));
  CHECK_THROWS_WITH(Loop::polyline({vec({0, 0, 0}), vec({1, 0, 0})}), "loop needs at least three distinct vertices");
  CHECK_THROWS_WITH(Loop::polyline({vec({0, 0, 0}), vec({1, 0, 0}), vec({1, 0, 0}), vec({0, 1, 0})}),
                    "loop has a zero-length segment");
}

TEST_CASE("loop cocycle integrals") {
  const auto g = green_of(proca_operator(1.0, 1.0, -1.0));
  const auto map = ComponentMap::range(3, 0);
  const Loop c = Loop::circle(vec({0.0, 0.0, 0.0}), 1.0, 0, 1);

  CHECK(cocycle_integral(atom_field(g, {}, {}), c, map) == 0.0);

  for (const auto& x : {vec({3.0, 0.0, 0.0}), vec({1.0, 0.0, 2.0}), vec({-0.6, 2.4, 1.1})}) {
    const auto f = atom_field(g, {x}, {vec({0.3, -1.1, 0.7, 0.2, 0.5, -0.4})});
    const double a = cocycle_integral(f, c, map);
    CHECK(std::fabs(a) > 1e-3);
    CHECK(a == doctest::Approx(circle_oracle(f, map)).epsilon(1e-6));
    CHECK(cocycle_integral(f, c.refined(), map) == doctest::Approx(a).epsilon(1e-8));
    CHECK(std::fabs(cocycle_integral(f, c.reversed(), map) + a) <= 1e-13 * std::fabs(a));
  }

  // A nearby atom on a polyline: refinement and orientation.
  const Loop sq = Loop::polyline({vec({0, 0, 0}), vec({1, 0, 0}), vec({1, 1, 0}), vec({0, 1, 0})});
  const auto near = atom_field(g, {vec({0.5, -0.01, 0.02})}, {vec({1.0, 0.4, -0.3, 0.0, 0.8, 0.1})});
  const double a = cocycle_integral(near, sq, map);
  CHECK(cocycle_integral(near, sq.refined(), map) == doctest::Approx(a).epsilon(1e-8));
  CHECK(cocycle_integral(near, sq.reversed(), map) == doctest::Approx(-a).epsilon(1e-13));

  const auto on = atom_field(g, {vec({0.5, 0.0, 0.0})}, {vec({1.0, 0.0, 0.0, 0.0, 0.0, 0.0})});
  CHECK_THROWS_WITH(cocycle_integral(on, sq, map), "atom within exclusion tube of cocycle");
}

TEST_CASE("closed loops annihilate exact gradients") {
  // Klein-Gordon: away from the sources the vector components are
  // -grad phi_0 / m.
  const auto g = green_of(klein_gordon_operator(3, 0.9));
  const auto map = ComponentMap::range(3, 1);
  const Loop c = Loop::circle(vec({0.0, 0.0, 0.0}), 1.0, 0, 1);
  for (const auto& x : {vec({1.2, 0.1, 0.05}), vec({0.0, 0.0, 0.5}), vec({0.99, 0.0, 0.001})}) {
    const auto f = atom_field(g, {x}, {vec({1.0, 0.0, 0.0, 0.0})});
    CHECK(std::fabs(cocycle_integral(f, c, map)) < 1e-6);
  }
  const Loop tri = Loop::polyline({vec({0, 0, 0}), vec({2, 0, 0}), vec({0, 1, 1})});
  const auto f = atom_field(g, {vec({1.0, 0.05, 0.0})}, {vec({1.0, 0.0, 0.0, 0.0})});
  CHECK(std::fabs(cocycle_integral(f, tri, map)) < 1e-6);
}

TEST_CASE("surface cocycles") {
  const auto g = green_of(proca_operator(1.0, 1.0, -1.0));
  ComponentMap map;
  map.comp = {3, 4, 5};
  map.sign = {1.0, 1.0, 1.0};
  const Surface s = cube();
  REQUIRE(s.closed());
  CHECK(s.boundary().empty());
  CHECK_FALSE(Surface::fan(regular_polygon(6, 1.0)).closed());
  CHECK(Surface::icosphere(vec({0, 0, 0}), 1.0, 2).closed());

  CHECK(cocycle_integral(atom_field(g, {}, {}), s, map) == 0.0);
  for (const auto& x : {vec({2.0, 0.3, -0.2}), vec({0.4, 1.5, 1.7})}) {
    const auto f = atom_field(g, {x}, {vec({0.2, 0.9, -0.5, 1.0, -0.3, 0.6})});
    // Oracle: tensor Gauss-Legendre on each face with outward orientation.
    const auto& q = gauss_legendre(20);
    double ref = 0.0;
    for (int axis = 0; axis < 3; ++axis)
      for (double side : {-1.0, 1.0}) {
        const int u = (axis + 1) % 3, v = (axis + 2) % 3;
        // Plane index of (min(u,v), max(u,v)) in lexicographic order.
        const int lo = std::min(u, v), hi = std::max(u, v);
        const int plane = lo == 0 ? hi - 1 : 2;
        // dx^lo ^ dx^hi on the face: +1 for the outward normal +axis when
        // (lo, hi, axis) is cyclic.
        const double orient = side * ((axis == 0 || axis == 2) ? 1.0 : -1.0);
        for (int pu = 0; pu < 2; ++pu)
          for (int pv = 0; pv < 2; ++pv)
            for (std::size_t i = 0; i < q.x.size(); ++i)
              for (std::size_t j = 0; j < q.x.size(); ++j) {
                double z[3];
                z[axis] = side;
                z[u] = -1.0 + pu + 0.5 * (q.x[i] + 1.0);
                z[v] = -1.0 + pv + 0.5 * (q.x[j] + 1.0);
                ref += 0.25 * q.w[i] * q.w[j] * orient * f.value(z)(map.comp[plane]);
              }
      }
    const double a = cocycle_integral(f, s, map);
    CHECK(a == doctest::Approx(ref).epsilon(1e-6));
    CHECK(cocycle_integral(f, s.refined(), map) == doctest::Approx(a).epsilon(1e-6));
    CHECK(cocycle_integral(f, s.reversed(), map) == doctest::Approx(-a).epsilon(1e-12));
  }
  const auto on = atom_field(g, {vec({1.0, 0.2, 0.3})}, {vec({1, 0, 0, 0, 0, 0})});
  CHECK_THROWS_WITH(cocycle_integral(on, s, map), "atom within exclusion tube of cocycle");
  CHECK_THROWS_WITH(cocycle_integral(atom_field(g, {}, {}), Surface::fan(regular_polygon(6, 1.0)), map),
                    "surface cocycle must be closed");
}

TEST_CASE("Stokes identity for single atoms") {
  const auto g = green_of(proca_operator(1.0, 1.0, -1.0));
  const auto map = ComponentMap::range(3, 0);
  const Loop poly = regular_polygon(48, 1.0);
  const Surface disk = Surface::fan(poly);

  const auto zero = stokes_check(atom_field(g, {}, {}), poly, disk, map);
  CHECK(zero.loop_value == 0.0);
  CHECK(zero.surface_value == 0.0);
  CHECK(zero.pass);

  CounterRng rng(11, Stream::Test, 0);
  for (int t = 0; t < 4; ++t) {
    VecR x(3), a(6);
    for (int k = 0; k < 3; ++k) x(k) = 2.0 * rng.uniform() - 1.0;
    x(2) += x(2) > 0 ? 0.5 : -0.5;
    for (int k = 0; k < 6; ++k) a(k) = rng.normal();
    const auto f = atom_field(g, {x}, {a});
    const auto coarse = stokes_check(f, poly, disk, map, 1);
    const auto fine = stokes_check(f, poly, disk, map, 2);
    CHECK(fine.pass);
    CHECK(fine.residual < 1e-4);
    CHECK(fine.residual * 4.0 <= coarse.residual);
  }
  const auto on = atom_field(g, {vec({0.2, 0.1, 0.0})}, {vec({1, 0, 0, 0, 0, 0})});
  CHECK_THROWS_WITH(stokes_check(on, poly, disk, map), "atom within exclusion tube of cocycle");
  CHECK_THROWS_WITH(stokes_check(atom_field(g, {}, {}), regular_polygon(47, 1.0), disk, map),
                    "surface boundary does not match the loop");
}

TEST_CASE("mollified loop test functions") {
  const Lattice lat(3, 6.0, 32);
  const auto map = ComponentMap::range(3, 1);
  const Loop c = Loop::circle(vec({3.0, 3.0, 3.0}), 1.0, 0, 1);
  const Mollifier m(3, 0.3);
  const LatticeField rho = loop_testfunction(c, m, lat, 4, map);
  const double cell = lat.cell_volume();
  std::array<double, 4> mass{};
  double peak = 0.0;
  for (std::size_t s = 0; s < lat.sites(); ++s)
    for (int a = 0; a < 4; ++a) {
      mass[a] += cell * rho.v[s * 4 + a];
      peak = std::max(peak, std::fabs(rho.v[s * 4 + a]));
    }
  CHECK(peak > 0.1);
  for (int a = 0; a < 4; ++a) CHECK(std::fabs(mass[a]) < 1e-8);
  for (std::size_t s = 0; s < lat.sites(); ++s) {
    CHECK(rho.v[s * 4 + 0] == 0.0);
    CHECK(rho.v[s * 4 + 3] == 0.0);
  }
  CHECK_THROWS_WITH(loop_testfunction(c, Mollifier(3, 2.0), lat, 4, map), "mollifier scale exceeds loop feature size");
}

TEST_CASE("mollified loop responses converge in eps") {
  const auto g = green_of(proca_operator(1.0, 1.0, -1.0));
  const auto map = ComponentMap::range(3, 0);
  const Loop c = Loop::circle(vec({0.0, 0.0, 0.0}), 1.0, 0, 1);
  const std::vector<double> eps{0.4, 0.2, 0.1, 0.05, 0.0};
  const MollifiedKernel k(g, eps);
  const double x[3] = {1.25, 0.1, 0.1};
  std::vector<double> y(eps.size() * 6);
  loop_response(k, c, map, x, y.data());
  std::vector<double> diff;
  for (std::size_t l = 0; l + 1 < eps.size(); ++l) {
    double s = 0.0;
    for (int a = 0; a < 6; ++a) s = std::max(s, std::fabs(y[l * 6 + a] - y[(eps.size() - 1) * 6 + a]));
    diff.push_back(s);
  }
  for (std::size_t l = 0; l + 1 < diff.size(); ++l) CHECK(diff[l + 1] < diff[l]);
  // Once the ball clears the loop the error is exactly quadratic in eps.
  CHECK(diff[1] / diff[2] == doctest::Approx(4.0).epsilon(0.05));
  CHECK(diff[2] / diff[3] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("cumulant growth readings") {
  const auto rep = proca_operator(1.0, 1.0, -1.0).rep_in();
  const auto cg = cumulant_growth(radial_gauss(rep, 0.5, 1.0));
  CHECK(cg.with_i);
  CHECK_FALSE(cg.without_i);
  CHECK(cg.small_exponent == doctest::Approx(2.0).epsilon(0.02));
  const auto none = cumulant_growth(radial_gauss(rep, 0.0, 1.0));
  CHECK(none.with_i);
  CHECK(none.without_i);
}

TEST_CASE("tail summability") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const auto empty = tail_summability_check(*g, radial_gauss(op.rep_in(), 0.0, 1.0), 10, 1);
  CHECK(empty.shell_sums.size() == 10);
  for (double v : empty.shell_sums) CHECK(v == 0.0);
  CHECK(empty.pass);
  const auto r = tail_summability_check(*g, radial_gauss(op.rep_in(), 1.0, 1.0), 10, 1);
  CHECK(r.last < 1e-3);
  CHECK(r.trend < 0.0);
  CHECK(r.pass);
  CHECK(tail_summability_check(*g, radial_gauss(op.rep_in(), 1.0, 1.0), 0, 1).shell_sums.empty());
}

TEST_CASE("closed-form loop functionals") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const auto map = ComponentMap::range(3, 0);
  const auto levy = radial_gauss(op.rep_in(), 0.5, 1.0);
  LoopOptions opt;
  opt.cutoff = 3.0;
  opt.rel_tol = 1e-2;
  const Loop a = Loop::polyline({vec({0, 0, 0}), vec({1, 0, 0}), vec({1, 1, 0}), vec({0, 1, 0})});
  const Loop b = Loop::circle(vec({0.5, 0.5, 2.0}), 0.5, 1, 2);

  CHECK(loop_schwinger_closed(g, levy, {}, map, opt).value == cplx(1.0));
  CHECK(loop_schwinger_closed(g, radial_gauss(op.rep_in(), 0.5, 0.0), {a}, map, opt).value == cplx(1.0));

  const auto ab = loop_schwinger_closed(g, levy, {a, b}, map, opt);
  const auto ba = loop_schwinger_closed(g, levy, {b, a}, map, opt);
  CHECK(ab.converged);
  CHECK(ab.certification == "certified");
  CHECK(std::abs(ab.value) <= 1.0);
  CHECK(std::abs(ab.value) < 0.999);
  CHECK(std::abs(ab.value - ba.value) < 1e-12);

  const VecR shift = vec({1.0, -2.0, 3.0});
  const auto moved = loop_schwinger_closed(g, levy, {a.translated(shift), b.translated(shift)}, map, opt);
  CHECK(std::abs(moved.value - ab.value) < 1e-6);

  const Loop flat4 = Loop::circle(vec({0, 0, 0, 0}), 1.0, 0, 1);
  CHECK_THROWS_WITH(loop_schwinger_closed(g, levy, {flat4}, map, opt), "loop dimension does not match the operator");
  ComponentMap bad = map;
  bad.comp[2] = 6;
  CHECK_THROWS_WITH(loop_schwinger_closed(g, levy, {a}, bad, opt),
                    "component map refers to a missing field component");
}

TEST_CASE("sampled loop functionals") {
  const auto op = klein_gordon_operator(3, 1.0);
  const auto g = green_of(op);
  const auto map = ComponentMap::range(3, 1);
  const Loop c = Loop::circle(vec({3.0, 3.0, 3.0}), 1.0, 0, 1);
  const std::vector<double> eps{0.4, 0.2};

  const auto none = loop_schwinger_mc(g, radial_gauss(op.rep_in(), 0.0, 1.0), {c}, map, eps, {1, 8});
  for (const auto& e : none.per_eps) CHECK(e.value == cplx(1.0));
  CHECK(none.extrapolated.value == cplx(1.0));

  // Gaussian part against its closed form at each scale.
  const Lattice lat(3, 6.0, 16);
  const NoiseSpec gauss(op.rep_in(), 2.0 * MatR::Identity(4, 4));
  const auto mc = loop_schwinger_mc(g, gauss, lat, {c}, map, eps, {1, 400});
  for (std::size_t l = 0; l < eps.size(); ++l) {
    const cplx ref = loop_gaussian_factor(*g, gauss, lat, {c}, map, eps[l]);
    CHECK(std::fabs(ref.imag()) < 1e-12);
    CHECK(ref.real() < 0.95);
    CHECK(std::fabs(mc.per_eps[l].z_score(ref)) < 3.0);
  }
  CHECK(mc.cauchy.size() == 1);

  CHECK_THROWS_WITH(loop_schwinger_mc(g, gauss, lat, {c}, map, {0.2, 0.4}, {1, 2}),
                    "eps schedule must be decreasing");
  CHECK_THROWS_WITH(loop_schwinger_mc(g, gauss, lat, {c}, map, {}, {1, 2}), "eps schedule is empty");
  CHECK_THROWS_WITH(loop_schwinger_mc(g, gauss, lat, {c, c.translated(vec({0.0, 0.0, 0.3}))}, map, eps, {1, 2}),
                    "loops closer than the mollifier scale");
}

TEST_CASE("point sampling is deterministic") {
  const auto rep = proca_operator(1.0, 1.0, -1.0).rep_in();
  const auto levy = radial_gauss(rep, 0.5, 1.0);
  const auto a = sample_points(levy, 3, vec({0, 0, 0}), 4.0, 9);
  const auto b = sample_points(levy, 3, vec({0, 0, 0}), 4.0, 9);
  CHECK(a.pos == b.pos);
  CHECK(a.marks == b.marks);
  CHECK(a.size() > 10);
  for (double x : a.pos) CHECK((x >= 0.0 && x <= 4.0));
}

TEST_CASE("loop kernels are identical serial and parallel") {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const auto map = ComponentMap::range(3, 0);
  const auto levy = radial_gauss(op.rep_in(), 0.5, 1.0);
  const Loop c = Loop::circle(vec({0.0, 0.0, 0.0}), 1.0, 0, 1);
  const int saved = workers();
  set_workers(4);
  LoopOptions ser, par;
  ser.cutoff = par.cutoff = 3.0;
  ser.rel_tol = par.rel_tol = 5e-2;
  ser.exec = Exec::Serial;
  par.exec = Exec::Parallel;
  const auto a = loop_schwinger_closed(g, levy, {c}, map, ser);
  const auto b = loop_schwinger_closed(g, levy, {c}, map, par);
  CHECK(a.value == b.value);
  CHECK(a.evaluations == b.evaluations);
  const auto ma = loop_schwinger_mc(g, levy, {c}, map, {0.4, 0.2}, {3, 12}, ser);
  const auto mb = loop_schwinger_mc(g, levy, {c}, map, {0.4, 0.2}, {3, 12}, par);
  for (std::size_t l = 0; l < 2; ++l) CHECK(ma.per_eps[l].value == mb.per_eps[l].value);
  CHECK(ma.extrapolated.value == mb.extrapolated.value);
  set_workers(saved);
}
