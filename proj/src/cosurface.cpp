#include "covspde/cosurface.hpp"

#include "covspde/quadrature.hpp"
#include "covspde/repr.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace covspde {

ComponentMap ComponentMap::range(int count, int offset) {
  ComponentMap m;
  for (int i = 0; i < count; ++i) {
    m.comp.push_back(offset + i);
    m.sign.push_back(1.0);
  }
  return m;
}

VecR LoopPiece::point(double s) const {
  if (kind == Kind::Segment) return a + s * (b - a);
  const double t = t0 + s * (t1 - t0);
  return c + R * (std::cos(t) * u + std::sin(t) * v);
}

VecR LoopPiece::tangent(double s) const {
  if (kind == Kind::Segment) return b - a;
  const double t = t0 + s * (t1 - t0);
  return R * (t1 - t0) * (-std::sin(t) * u + std::cos(t) * v);
}

double LoopPiece::length() const {
  return kind == Kind::Segment ? (b - a).norm() : R * std::fabs(t1 - t0);
}

LoopPiece LoopPiece::sub(double s0, double s1) const {
  LoopPiece p = *this;
  if (kind == Kind::Segment) {
    p.a = point(s0);
    p.b = point(s1);
  } else {
    p.t0 = t0 + s0 * (t1 - t0);
    p.t1 = t0 + s1 * (t1 - t0);
  }
  return p;
}

namespace {

double segment_distance(const VecR& a, const VecR& b, const double* x) {
  const int d = static_cast<int>(a.size());
  double ab2 = 0.0, t = 0.0;
  for (int i = 0; i < d; ++i) {
    ab2 += (b(i) - a(i)) * (b(i) - a(i));
    t += (x[i] - a(i)) * (b(i) - a(i));
  }
  t = ab2 > 0.0 ? std::clamp(t / ab2, 0.0, 1.0) : 0.0;
  double r2 = 0.0;
  for (int i = 0; i < d; ++i) {
    const double e = x[i] - a(i) - t * (b(i) - a(i));
    r2 += e * e;
  }
  return std::sqrt(r2);
}

double piece_distance(const LoopPiece& p, const double* x) {
  if (p.kind == LoopPiece::Kind::Segment) return segment_distance(p.a, p.b, x);
  const int d = static_cast<int>(p.c.size());
  double pu = 0.0, pv = 0.0, q2 = 0.0;
  for (int i = 0; i < d; ++i) {
    const double e = x[i] - p.c(i);
    pu += e * p.u(i);
    pv += e * p.v(i);
    q2 += e * e;
  }
  auto at = [&](double t) {
    return std::sqrt(std::max(0.0, q2 + p.R * p.R - 2.0 * p.R * (pu * std::cos(t) + pv * std::sin(t))));
  };
  const double lo = std::min(p.t0, p.t1), hi = std::max(p.t0, p.t1);
  double best = std::min(at(lo), at(hi));
  if (pu != 0.0 || pv != 0.0) {
    double th = std::atan2(pv, pu);
    th = lo + std::fmod(std::fmod(th - lo, 2.0 * kPi) + 2.0 * kPi, 2.0 * kPi);
    if (th <= hi) best = std::min(best, at(th));
  }
  return best;
}

VecR to_vec(const double* x, int d) { return Eigen::Map<const VecR>(x, d); }

}  // namespace

Loop Loop::polyline(const std::vector<VecR>& vertices) {
  std::vector<VecR> v = vertices;
  if (v.size() >= 2 && (v.front() - v.back()).norm() == 0.0) v.pop_back();
  if (v.size() < 3) fail("loop needs at least three distinct vertices");
  Loop l;
  l.d_ = static_cast<int>(v.front().size());
  if (l.d_ < 2 || l.d_ > kMaxDim) fail("unsupported dimension");
  l.polyline_ = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const VecR& a = v[i];
    const VecR& b = v[(i + 1) % v.size()];
    if (a.size() != l.d_ || b.size() != l.d_) fail("loop vertices have inconsistent dimension");
    if ((b - a).norm() == 0.0) fail("loop has a zero-length segment");
    LoopPiece p;
    p.a = a;
    p.b = b;
    l.pieces_.push_back(p);
  }
  l.vertices_ = std::move(v);
  return l;
}

Loop Loop::circle(const VecR& center, double radius, int axis_i, int axis_j) {
  const int d = static_cast<int>(center.size());
  if (d < 2 || d > kMaxDim) fail("unsupported dimension");
  if (!(radius > 0.0)) fail("circle radius must be positive");
  if (axis_i == axis_j || axis_i < 0 || axis_j < 0 || axis_i >= d || axis_j >= d)
    fail("circle plane axes out of range");
  Loop l;
  l.d_ = d;
  for (int q = 0; q < 4; ++q) {
    LoopPiece p;
    p.kind = LoopPiece::Kind::Arc;
    p.c = center;
    p.u = VecR::Unit(d, axis_i);
    p.v = VecR::Unit(d, axis_j);
    p.R = radius;
    p.t0 = 0.5 * kPi * q;
    p.t1 = 0.5 * kPi * (q + 1);
    l.pieces_.push_back(p);
  }
  return l;
}

Loop Loop::reversed() const {
  Loop l = *this;
  std::reverse(l.pieces_.begin(), l.pieces_.end());
  for (auto& p : l.pieces_) {
    std::swap(p.a, p.b);
    std::swap(p.t0, p.t1);
  }
  if (polyline_) std::reverse(l.vertices_.begin() + 1, l.vertices_.end());
  return l;
}

Loop Loop::translated(const VecR& s) const {
  if (s.size() != d_) fail("translation has wrong dimension");
  Loop l = *this;
  for (auto& p : l.pieces_) {
    if (p.kind == LoopPiece::Kind::Segment) {
      p.a += s;
      p.b += s;
    } else {
      p.c += s;
    }
  }
  for (auto& v : l.vertices_) v += s;
  return l;
}

Loop Loop::refined() const {
  Loop l;
  l.d_ = d_;
  l.polyline_ = polyline_;
  for (const auto& p : pieces_) {
    l.pieces_.push_back(p.sub(0.0, 0.5));
    l.pieces_.push_back(p.sub(0.5, 1.0));
    if (polyline_) {
      l.vertices_.push_back(p.a);
      l.vertices_.push_back(p.point(0.5));
    }
  }
  return l;
}

double Loop::length() const {
  double s = 0.0;
  for (const auto& p : pieces_) s += p.length();
  return s;
}

double Loop::min_feature() const {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& p : pieces_) s = std::min(s, p.length());
  return s;
}

double Loop::distance(const double* x) const {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& p : pieces_) s = std::min(s, piece_distance(p, x));
  return s;
}

void Loop::bounds(VecR& lo, VecR& hi) const {
  lo = VecR::Constant(d_, std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const auto& p : pieces_) {
    if (p.kind == LoopPiece::Kind::Segment) {
      lo = lo.cwiseMin(p.a).cwiseMin(p.b);
      hi = hi.cwiseMax(p.a).cwiseMax(p.b);
    } else {
      const VecR r = p.R * (p.u.cwiseAbs() + p.v.cwiseAbs());
      lo = lo.cwiseMin(p.c - r);
      hi = hi.cwiseMax(p.c + r);
    }
  }
}

// ---------------------------------------------------------------------------
// Surfaces

Surface Surface::fan(const Loop& polygon) {
  if (!polygon.is_polyline()) fail("fan surfaces need a polyline loop");
  Surface s;
  s.d = polygon.d();
  s.vertices = polygon.vertices();
  VecR c = VecR::Zero(s.d);
  for (const auto& v : s.vertices) c += v;
  c /= static_cast<double>(s.vertices.size());
  const int n = static_cast<int>(s.vertices.size());
  s.vertices.push_back(c);
  for (int i = 0; i < n; ++i) s.triangles.push_back({n, i, (i + 1) % n});
  return s;
}

Surface Surface::icosphere(const VecR& center, double radius, int level) {
  if (center.size() != 3) fail("icosphere needs d = 3");
  const double t = 0.5 * (1.0 + std::sqrt(5.0));
  std::vector<VecR> v;
  for (const auto& p : std::vector<std::array<double, 3>>{{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                                                          {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                                                          {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}}) {
    VecR q(3);
    q << p[0], p[1], p[2];
    v.push_back(q.normalized());
  }
  Surface s;
  s.vertices = v;
  s.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) s = s.refined();
  for (auto& p : s.vertices) p = center + radius * p.normalized();
  return s;
}

namespace {
std::map<std::pair<int, int>, int> edge_counts(const Surface& s) {
  std::map<std::pair<int, int>, int> e;
  for (const auto& t : s.triangles)
    for (int k = 0; k < 3; ++k) ++e[{t[k], t[(k + 1) % 3]}];
  return e;
}
}  // namespace

bool Surface::closed() const {
  const auto e = edge_counts(*this);
  for (const auto& [key, n] : e) {
    if (n != 1) return false;
    const auto it = e.find({key.second, key.first});
    if (it == e.end() || it->second != 1) return false;
  }
  return !triangles.empty();
}

std::vector<std::array<int, 2>> Surface::boundary() const {
  const auto e = edge_counts(*this);
  std::vector<std::array<int, 2>> out;
  for (const auto& t : triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (!e.count({b, a})) out.push_back({a, b});
    }
  return out;
}

Surface Surface::reversed() const {
  Surface s = *this;
  for (auto& t : s.triangles) std::swap(t[1], t[2]);
  return s;
}

Surface Surface::refined() const {
  Surface s;
  s.d = d;
  s.vertices = vertices;
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    const auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    s.vertices.push_back(0.5 * (vertices[a] + vertices[b]));
    const int idx = static_cast<int>(s.vertices.size()) - 1;
    mid[key] = idx;
    return idx;
  };
  for (const auto& t : triangles) {
    const int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
    s.triangles.push_back({t[0], ab, ca});
    s.triangles.push_back({ab, t[1], bc});
    s.triangles.push_back({ca, bc, t[2]});
    s.triangles.push_back({ab, bc, ca});
  }
  return s;
}

namespace {

// Distance from x to the triangle (p0, p1, p2) in any dimension: minimize
// over the barycentric simplex; the interior critical point or an edge.
double triangle_distance(const VecR& p0, const VecR& p1, const VecR& p2, const VecR& x) {
  const VecR e1 = p1 - p0, e2 = p2 - p0, w = x - p0;
  const double a = e1.dot(e1), b = e1.dot(e2), c = e2.dot(e2), d1 = e1.dot(w), d2 = e2.dot(w);
  const double det = a * c - b * b;
  if (det > 0.0) {
    const double s = (c * d1 - b * d2) / det, t = (a * d2 - b * d1) / det;
    if (s >= 0.0 && t >= 0.0 && s + t <= 1.0) return (w - s * e1 - t * e2).norm();
  }
  return std::min({segment_distance(p0, p1, x.data()), segment_distance(p1, p2, x.data()),
                   segment_distance(p2, p0, x.data())});
}

}  // namespace

double Surface::distance(const double* x) const {
  const VecR p = to_vec(x, d);
  double s = std::numeric_limits<double>::infinity();
  for (const auto& t : triangles)
    s = std::min(s, triangle_distance(vertices[t[0]], vertices[t[1]], vertices[t[2]], p));
  return s;
}

double Surface::diameter() const {
  double s = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (std::size_t j = i + 1; j < vertices.size(); ++j) s = std::max(s, (vertices[i] - vertices[j]).norm());
  return s;
}

// ---------------------------------------------------------------------------
// Line integrals

namespace {

// z(s) and dz/ds without temporaries.
void piece_eval(const LoopPiece& p, double s, int d, double* z, double* dz) {
  if (p.kind == LoopPiece::Kind::Segment) {
    for (int i = 0; i < d; ++i) {
      dz[i] = p.b(i) - p.a(i);
      z[i] = p.a(i) + s * dz[i];
    }
    return;
  }
  const double t = p.t0 + s * (p.t1 - p.t0), c = std::cos(t), sn = std::sin(t), w = p.R * (p.t1 - p.t0);
  for (int i = 0; i < d; ++i) {
    z[i] = p.c(i) + p.R * (c * p.u(i) + sn * p.v(i));
    dz[i] = w * (-sn * p.u(i) + c * p.v(i));
  }
}

// Parameters s in (0, 1) where |x - z(s)| = r.
void sphere_crossings(const LoopPiece& p, const double* x, double r, std::vector<double>& out) {
  const int d = static_cast<int>(p.kind == LoopPiece::Kind::Segment ? p.a.size() : p.c.size());
  if (p.kind == LoopPiece::Kind::Segment) {
    double ee = 0.0, we = 0.0, ww = 0.0;
    for (int i = 0; i < d; ++i) {
      const double e = p.b(i) - p.a(i), w = x[i] - p.a(i);
      ee += e * e;
      we += w * e;
      ww += w * w;
    }
    const double disc = we * we - ee * (ww - r * r);
    if (disc <= 0.0 || ee == 0.0) return;
    for (double sg : {-1.0, 1.0}) {
      const double s = (we + sg * std::sqrt(disc)) / ee;
      if (s > 0.0 && s < 1.0) out.push_back(s);
    }
    return;
  }
  double pu = 0.0, pv = 0.0, q2 = 0.0;
  for (int i = 0; i < d; ++i) {
    const double e = x[i] - p.c(i);
    pu += e * p.u(i);
    pv += e * p.v(i);
    q2 += e * e;
  }
  const double A = std::hypot(pu, pv);
  if (A == 0.0 || p.t1 == p.t0) return;
  const double kappa = (q2 + p.R * p.R - r * r) / (2.0 * p.R);
  if (std::fabs(kappa) >= A) return;
  const double phi = std::atan2(pv, pu), delta = std::acos(kappa / A);
  for (double sg : {-1.0, 1.0})
    for (int k = -2; k <= 2; ++k) {
      const double s = (phi + sg * delta + 2.0 * kPi * k - p.t0) / (p.t1 - p.t0);
      if (s > 0.0 && s < 1.0) out.push_back(s);
    }
}

double max_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::fabs(x));
  return s;
}

// Piecewise Gauss-Legendre integration of f(z, dz/ds, acc) over a loop.
// With a focus point, pieces are cut where they cross the spheres of the
// given radii around it and graded by distance; each remaining piece is
// then analytic on a neighbourhood proportional to its length.
template <class F>
class LoopIntegrator {
 public:
  LoopIntegrator(int d, int m, F& f) : d_(d), m_(m), f_(f), acc_(m), tmp_(m) {}

  void rule(const LoopPiece& p, int order, double* out) {
    const auto& q = gauss_legendre(order);
    std::fill(acc_.begin(), acc_.end(), 0.0);
    std::array<double, kMaxDim> z{}, dz{};
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      piece_eval(p, 0.5 * (q.x[i] + 1.0), d_, z.data(), dz.data());
      std::fill(tmp_.begin(), tmp_.end(), 0.0);
      f_(z.data(), dz.data(), tmp_.data());
      const double w = 0.5 * q.w[i];
      for (int k = 0; k < m_; ++k) acc_[k] += w * tmp_[k];
    }
    std::copy(acc_.begin(), acc_.end(), out);
  }

  // Bisects until the halves agree with the whole.
  void adapt(const LoopPiece& p, const std::vector<double>& whole, double tol, int depth, double* out,
             double prev = std::numeric_limits<double>::infinity()) {
    const LoopPiece l = p.sub(0.0, 0.5), r = p.sub(0.5, 1.0);
    std::vector<double> ql(m_), qr(m_);
    rule(l, 16, ql.data());
    rule(r, 16, qr.data());
    double diff = 0.0, size = 0.0;
    for (int k = 0; k < m_; ++k) {
      diff = std::max(diff, std::fabs(ql[k] + qr[k] - whole[k]));
      size = std::max(size, std::fabs(ql[k] + qr[k]));
    }
    // A smooth integrand gains far more than a factor 4 per halving; if the
    // discrepancy stalls it is roundoff in the integrand and bisection cannot
    // help.
    const bool stalled = depth >= 3 && diff > 0.25 * prev;
    if (diff <= tol || diff <= 8.0 * std::numeric_limits<double>::epsilon() * size || stalled || depth >= 40) {
      for (int k = 0; k < m_; ++k) out[k] += ql[k] + qr[k];
      return;
    }
    adapt(l, ql, 0.5 * tol, depth + 1, out, diff);
    adapt(r, qr, 0.5 * tol, depth + 1, out, diff);
  }

  void run(const Loop& loop, double* out, const double* focus, const std::vector<double>& radii,
           double rel_tol) {
    for (int k = 0; k < m_; ++k) out[k] = 0.0;
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (double r : radii) {
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
    if (radii.empty()) rmin = 0.0;
    struct Item {
      LoopPiece p;
      int order;  // 0: adaptive
    };
    std::vector<Item> items;
    std::vector<double> cuts;
    std::vector<std::pair<LoopPiece, int>> stack;
    for (const auto& piece : loop.pieces()) {
      if (!focus) {
        items.push_back({piece, 0});
        continue;
      }
      cuts.assign({0.0, 1.0});
      for (double r : radii)
        if (r > 0.0) sphere_crossings(piece, focus, r, cuts);
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t c = cuts.size() - 1; c-- > 0;)
        if (cuts[c + 1] - cuts[c] > 1e-14) stack.push_back({piece.sub(cuts[c], cuts[c + 1]), 0});
      while (!stack.empty()) {
        auto [p, depth] = stack.back();
        stack.pop_back();
        const double dist = piece_distance(p, focus), len = p.length();
        const double h = std::max(dist, rmin);
        if (len > h && depth < 60) {
          stack.push_back({p.sub(0.5, 1.0), depth + 1});
          stack.push_back({p.sub(0.0, 0.5), depth + 1});
          continue;
        }
        // Outside every sphere the integrand is analytic within dist of the
        // piece: GL8 for len <= dist/2, GL16 for len <= dist reach double
        // precision. Inside a sphere it is only smooth at the scale r.
        const bool outside = dist >= rmax;
        items.push_back({p, outside ? (2.0 * len <= h ? 8 : 16) : 0});
      }
    }
    std::vector<std::vector<double>> q(items.size(), std::vector<double>(m_));
    std::vector<double> scale(m_, 0.0);
    for (std::size_t i = 0; i < items.size(); ++i) {
      rule(items[i].p, items[i].order ? items[i].order : 16, q[i].data());
      for (int k = 0; k < m_; ++k) scale[k] += std::fabs(q[i][k]);
    }
    const double total = loop.length();
    // The absolute floor keeps the halved tolerances clear of denormals.
    const double tol = std::max(rel_tol * max_norm(scale), 1e-280);
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].order) {
        for (int k = 0; k < m_; ++k) out[k] += q[i][k];
      } else {
        adapt(items[i].p, q[i], tol * items[i].p.length() / total, 0, out);
      }
    }
  }

 private:
  int d_, m_;
  F& f_;
  std::vector<double> acc_, tmp_;
};

}  // namespace

void line_integral(const Loop& loop, int m, const std::function<void(const VecR&, const VecR&, double*)>& f,
                   double* out, const double* focus, double smooth_radius, double rel_tol) {
  const int d = loop.d();
  VecR z(d), dz(d);
  auto g = [&](const double* zp, const double* dzp, double* acc) {
    for (int i = 0; i < d; ++i) {
      z(i) = zp[i];
      dz(i) = dzp[i];
    }
    f(z, dz, acc);
  };
  LoopIntegrator<decltype(g)> li(d, m, g);
  std::vector<double> radii;
  if (smooth_radius > 0.0) radii.push_back(smooth_radius);
  li.run(loop, out, focus, radii, rel_tol);
}

void loop_response(const MollifiedKernel& kern, const Loop& loop, const ComponentMap& map, const double* x,
                   double* out) {
  const int d = kern.green().d(), N = kern.dim(), NN = N * N;
  const int L = static_cast<int>(kern.levels());
  if (loop.d() != d) fail("loop dimension does not match the operator");
  if (static_cast<int>(map.comp.size()) != d) fail("component map needs one entry per axis");
  for (int c : map.comp)
    if (c < 0 || c >= N) fail("component map refers to a missing field component");
  if (loop.distance(x) < 1e-9) {
    for (double e : kern.eps())
      if (e == 0.0) fail("atom within exclusion tube of cocycle");
  }
  std::vector<double> K(static_cast<std::size_t>(L) * NN);
  std::array<double, kMaxDim> dx{};
  auto f = [&](const double* z, const double* dz, double* acc) {
    for (int i = 0; i < d; ++i) dx[i] = x[i] - z[i];
    kern.eval(dx.data(), K.data());
    for (int l = 0; l < L; ++l)
      for (int mu = 0; mu < d; ++mu) {
        const double w = map.sign[mu] * dz[mu];
        if (w == 0.0) continue;
        const double* col = K.data() + l * NN + map.comp[mu];
        for (int a = 0; a < N; ++a) acc[l * N + a] += w * col[a * N];
      }
  };
  LoopIntegrator<decltype(f)> li(d, L * N, f);
  li.run(loop, out, x, kern.eps(), 1e-10);
}

namespace {

// Calls fn(shifted atom position, mark) for every atom image within the
// field's cutoff of `near` (a distance functor).
template <class Near, class Fn>
void for_each_image(const FieldRealization& field, Near&& near, Fn&& fn) {
  const int d = field.green().d();
  const double cut = field.cutoff() > 0.0 ? field.cutoff() : std::numeric_limits<double>::infinity();
  const bool per = field.periodic();
  const double side = field.box_side();
  const int reach = per ? static_cast<int>(std::ceil(std::min(cut, 4.0 * side) / side)) + 1 : 0;
  std::array<double, kMaxDim> y{};
  for (std::size_t j = 0; j < field.atoms(); ++j) {
    const double* xj = field.position(j);
    std::array<int, kMaxDim> img{};
    for (int k = 0; k < d; ++k) img[k] = -reach;
    while (true) {
      for (int k = 0; k < d; ++k) y[k] = xj[k] + side * img[k];
      if (near(y.data()) <= cut) fn(y.data(), field.mark(j));
      int k = 0;
      while (k < d && ++img[k] > reach) img[k++] = -reach;
      if (k == d) break;
    }
  }
}

void require_points(const FieldRealization& field) {
  if (field.backend() != FieldRealization::Backend::Point) fail("cocycle integrals need the point backend");
}

}  // namespace

double cocycle_integral(const FieldRealization& field, const Loop& loop, const ComponentMap& map) {
  require_points(field);
  const MollifiedKernel bare(field.green_ptr(), {0.0});
  const int N = field.dim();
  std::vector<double> y(N);
  std::vector<double> terms;
  for_each_image(
      field, [&](const double* p) { return loop.distance(p); },
      [&](const double* p, const double* alpha) {
        loop_response(bare, loop, map, p, y.data());
        double s = 0.0;
        for (int a = 0; a < N; ++a) s += alpha[a] * y[a];
        terms.push_back(s);
      });
  return pairwise_sum(terms.data(), terms.size());
}

namespace {

// Degree-5 seven-point rule on the reference triangle (barycentric
// coordinates, weights summing to one).
struct TriRule {
  std::array<std::array<double, 3>, 7> bary;
  std::array<double, 7> w;
};

const TriRule& tri_rule() {
  static const TriRule r = [] {
    TriRule t;
    const double s15 = std::sqrt(15.0);
    const double a = (6.0 - s15) / 21.0, b = (6.0 + s15) / 21.0;
    const double wa = (155.0 - s15) / 1200.0, wb = (155.0 + s15) / 1200.0;
    t.bary[0] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    t.w[0] = 9.0 / 40.0;
    t.bary[1] = {a, a, 1.0 - 2.0 * a};
    t.bary[2] = {a, 1.0 - 2.0 * a, a};
    t.bary[3] = {1.0 - 2.0 * a, a, a};
    t.bary[4] = {b, b, 1.0 - 2.0 * b};
    t.bary[5] = {b, 1.0 - 2.0 * b, b};
    t.bary[6] = {1.0 - 2.0 * b, b, b};
    for (int i = 1; i <= 3; ++i) t.w[i] = wa;
    for (int i = 4; i <= 6; ++i) t.w[i] = wb;
    return t;
  }();
  return r;
}

// Oriented plane components of e1 ^ e2 (half of it is the area element of
// the triangle spanned by e1, e2).
std::vector<double> wedge(const VecR& e1, const VecR& e2) {
  const int d = static_cast<int>(e1.size());
  std::vector<double> w(plane_count(d));
  for (int p = 0; p < plane_count(d); ++p) {
    const auto [i, j] = plane_axes(d, p);
    w[p] = e1(i) * e2(j) - e1(j) * e2(i);
  }
  return w;
}

// sum over sub-triangles (after `refine` uniform splits) of the degree-5
// rule applied to g(point) . wedge; g writes plane_count(d) values.
template <class G>
void triangle_quadrature(const VecR& p0, const VecR& p1, const VecR& p2, int refine, int m, G&& g,
                         double* out) {
  const int d = static_cast<int>(p0.size());
  const int P = plane_count(d);
  const int n = 1 << refine;
  const VecR e1 = (p1 - p0) / n, e2 = (p2 - p0) / n;
  const auto w = wedge(e1, e2);
  const auto& rule = tri_rule();
  std::vector<double> val(static_cast<std::size_t>(m) * P);
  for (int k = 0; k < m; ++k) out[k] = 0.0;
  auto add_tri = [&](const VecR& a, const VecR& b, const VecR& c, double orient) {
    for (int q = 0; q < 7; ++q) {
      const VecR z = rule.bary[q][0] * a + rule.bary[q][1] * b + rule.bary[q][2] * c;
      std::fill(val.begin(), val.end(), 0.0);
      g(z, val.data());
      for (int k = 0; k < m; ++k) {
        double s = 0.0;
        for (int p = 0; p < P; ++p) s += val[k * P + p] * w[p];
        out[k] += 0.5 * orient * rule.w[q] * s;
      }
    }
  };
  // Uniform split into n^2 congruent triangles: "up" ones share the
  // orientation of the parent, "down" ones are point reflections.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j + i < n; ++j) {
      const VecR a = p0 + i * e1 + j * e2;
      add_tri(a, a + e1, a + e2, 1.0);
      if (i + j + 1 < n) add_tri(a + e1 + e2, a + e2, a + e1, 1.0);
    }
}

}  // namespace

double surface_integral(const Surface& s, const std::function<void(const VecR&, double*)>& form, int refine) {
  if (refine < 0 || refine > 12) fail("surface refinement out of range");
  std::vector<double> terms;
  for (const auto& t : s.triangles) {
    double v = 0.0;
    triangle_quadrature(s.vertices[t[0]], s.vertices[t[1]], s.vertices[t[2]], refine, 1,
                        [&](const VecR& z, double* out) { form(z, out); }, &v);
    terms.push_back(v);
  }
  return pairwise_sum(terms.data(), terms.size());
}

double cocycle_integral(const FieldRealization& field, const Surface& surface, const ComponentMap& map,
                        int refine) {
  require_points(field);
  const int d = field.green().d(), N = field.dim();
  if (surface.d != d) fail("surface dimension does not match the operator");
  if (d != 3 && d != 4) fail("surface cocycles need d = 3 or 4");
  const int P = plane_count(d);
  if (static_cast<int>(map.comp.size()) != P) fail("component map needs one entry per rotation plane");
  if (!surface.closed()) fail("surface cocycle must be closed");
  const GreenFunction& g = field.green();
  std::vector<double> G(static_cast<std::size_t>(N) * N);
  std::vector<double> terms;
  for_each_image(
      field, [&](const double* p) { return surface.distance(p); },
      [&](const double* p, const double* alpha) {
        if (surface.distance(p) < 1e-9) fail("atom within exclusion tube of cocycle");
        // Split triangles until they are small against the atom distance.
        std::vector<std::array<VecR, 3>> tris;
        for (const auto& t : surface.triangles)
          tris.push_back({surface.vertices[t[0]], surface.vertices[t[1]], surface.vertices[t[2]]});
        double flux = 0.0;
        while (!tris.empty()) {
          auto tri = tris.back();
          tris.pop_back();
          const double dist = triangle_distance(tri[0], tri[1], tri[2], to_vec(p, d));
          const double size = std::max({(tri[1] - tri[0]).norm(), (tri[2] - tri[1]).norm(),
                                        (tri[0] - tri[2]).norm()});
          if (size > 0.5 * dist && size > 1e-6) {
            const VecR ab = 0.5 * (tri[0] + tri[1]), bc = 0.5 * (tri[1] + tri[2]), ca = 0.5 * (tri[2] + tri[0]);
            tris.push_back({tri[0], ab, ca});
            tris.push_back({ab, tri[1], bc});
            tris.push_back({ca, bc, tri[2]});
            tris.push_back({ab, bc, ca});
            continue;
          }
          double v = 0.0;
          triangle_quadrature(tri[0], tri[1], tri[2], refine, 1,
                              [&](const VecR& z, double* out) {
                                std::array<double, kMaxDim> dx{};
                                for (int i = 0; i < d; ++i) dx[i] = p[i] - z(i);
                                g.point_into(dx.data(), G.data());
                                for (int pl = 0; pl < P; ++pl) {
                                  double s = 0.0;
                                  for (int a = 0; a < N; ++a) s += alpha[a] * G[a * N + map.comp[pl]];
                                  out[pl] = map.sign[pl] * s;
                                }
                              },
                              &v);
          flux += v;
        }
        terms.push_back(flux);
      });
  return pairwise_sum(terms.data(), terms.size());
}

LatticeField loop_testfunction(const Loop& loop, const Mollifier& moll, const Lattice& lat, int N,
                               const ComponentMap& map) {
  const int d = lat.d();
  if (loop.d() != d || moll.d() != d) fail("loop, mollifier and lattice disagree on dimension");
  if (static_cast<int>(map.comp.size()) != d) fail("component map needs one entry per axis");
  for (int c : map.comp)
    if (c < 0 || c >= N) fail("component map refers to a missing field component");
  const double eps = moll.eps();
  if (eps >= loop.min_feature()) fail("mollifier scale exceeds loop feature size");
  if (2.0 * eps >= lat.L()) fail("mollifier scale exceeds half the box");
  LatticeField out(lat, N);
  VecR lo, hi;
  loop.bounds(lo, hi);
  const double L = lat.L();
  std::vector<double> acc(d);
  for (std::size_t s = 0; s < lat.sites(); ++s) {
    const VecR x0 = lat.position(s);
    // Periodic images of the site that can reach the loop.
    std::array<int, kMaxDim> img{};
    for (int k = 0; k < d; ++k) img[k] = -2;
    while (true) {
      VecR x = x0;
      bool near_box = true;
      for (int k = 0; k < d; ++k) {
        x(k) += L * img[k];
        if (x(k) < lo(k) - eps || x(k) > hi(k) + eps) near_box = false;
      }
      if (near_box && loop.distance(x.data()) < eps) {
        line_integral(
            loop, d,
            [&](const VecR& z, const VecR& dz, double* o) {
              const VecR r = x - z;
              const double e = moll.value(r.data());
              if (e == 0.0) return;
              for (int mu = 0; mu < d; ++mu) o[mu] += e * dz(mu);
            },
            acc.data(), x.data(), eps, 1e-12);
        for (int mu = 0; mu < d; ++mu) out.at(s, map.comp[mu]) += map.sign[mu] * acc[mu];
      }
      int k = 0;
      while (k < d && ++img[k] > 2) img[k++] = -2;
      if (k == d) break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cumulant growth

CumulantGrowth cumulant_growth(const LevyMeasure& levy) {
  const int N = levy.dim();
  CumulantGrowth g;
  if (levy.total_mass() == 0.0) {
    g.with_i = g.without_i = true;
    g.small_exponent = std::numeric_limits<double>::infinity();
    return g;
  }
  CounterRng rng(0x6c6f6f70, Stream::Probe, 0);
  std::vector<VecR> dirs;
  for (int k = 0; k < 8; ++k) {
    VecR v(N);
    for (int i = 0; i < N; ++i) v(i) = rng.normal();
    dirs.push_back(v.normalized());
  }
  // sup over directions of |F(t u)| on log-spaced t.
  auto profile = [&](bool with_i) {
    std::vector<double> t, s;
    for (int k = -12; k <= 12; ++k) {
      const double tk = std::pow(10.0, k / 4.0);
      double best = 0.0;
      for (const auto& u : dirs) {
        const VecR y = tk * u;
        const double v = with_i ? std::abs(levy.cumulant(y.data())) : std::fabs(levy.cumulant_real_exponent(y.data()));
        best = std::isfinite(v) ? std::max(best, v) : std::numeric_limits<double>::infinity();
      }
      t.push_back(tk);
      s.push_back(best);
    }
    return std::make_pair(t, s);
  };
  // |F(y)| <= c |y|^{1+eta} for one eta > 0 needs the small-|y| slope above
  // one and the large-|y| slope no larger than it.
  auto holds = [&](bool with_i, double* small_slope) {
    const auto [t, s] = profile(with_i);
    for (double v : s)
      if (!std::isfinite(v)) return false;
    const std::size_t n = t.size();
    auto slope = [&](std::size_t i, std::size_t j) {
      if (s[i] <= 0.0 || s[j] <= 0.0) return s[i] == 0.0 && s[j] == 0.0 ? 0.0 : std::nan("");
      return std::log(s[j] / s[i]) / std::log(t[j] / t[i]);
    };
    const double lo = slope(0, 2), hi = slope(n - 3, n - 1);
    if (small_slope) *small_slope = lo;
    if (!std::isfinite(lo) || !std::isfinite(hi)) return false;
    return lo > 1.02 && hi <= lo - 0.01;
  };
  g.with_i = holds(true, &g.small_exponent);
  g.without_i = holds(false, nullptr);
  return g;
}

// ---------------------------------------------------------------------------

PointConfiguration sample_points(const LevyMeasure& levy, int d, const VecR& lo, double side,
                                 std::uint64_t seed) {
  if (!(side > 0.0)) fail("sampling box must have positive side");
  if (lo.size() != d) fail("sampling box corner has wrong dimension");
  PointConfiguration pc;
  pc.d = d;
  pc.N = levy.dim();
  if (levy.total_mass() == 0.0) return pc;
  CounterRng cnt(seed, Stream::PoissonCount, 0);
  const std::uint64_t K = cnt.poisson(levy.total_mass() * std::pow(side, d));
  pc.pos.resize(K * d);
  pc.marks.resize(K * pc.N);
  for (std::uint64_t j = 0; j < K; ++j) {
    CounterRng rng(seed, Stream::Atom, j);
    for (int k = 0; k < d; ++k) pc.pos[j * d + k] = lo(k) + side * rng.uniform();
    levy.sample_mark(rng, pc.marks.data() + j * pc.N);
  }
  return pc;
}

// ---------------------------------------------------------------------------
// Stokes

StokesReport stokes_check(const FieldRealization& field, const Loop& loop, const Surface& surface,
                          const ComponentMap& map, int refine) {
  require_points(field);
  const int d = field.green().d();
  if (!loop.is_polyline()) fail("Stokes check needs a polyline loop");
  if (surface.d != d || loop.d() != d) fail("surface dimension does not match the operator");
  // The oriented boundary must reproduce the loop's segments.
  const auto bnd = surface.boundary();
  const auto& lv = loop.vertices();
  if (bnd.size() != lv.size()) fail("surface boundary does not match the loop");
  for (std::size_t i = 0; i < lv.size(); ++i) {
    const VecR& a = lv[i];
    const VecR& b = lv[(i + 1) % lv.size()];
    bool found = false;
    for (const auto& e : bnd)
      if ((surface.vertices[e[0]] - a).norm() <= 1e-10 && (surface.vertices[e[1]] - b).norm() <= 1e-10) found = true;
    if (!found) fail("surface boundary does not match the loop");
  }
  for (std::size_t j = 0; j < field.atoms(); ++j)
    if (surface.distance(field.position(j)) < 1e-9 || loop.distance(field.position(j)) < 1e-9)
      fail("atom within exclusion tube of cocycle");

  StokesReport r;
  r.loop_value = cocycle_integral(field, loop, map);
  const double h = 1e-5 * surface.diameter();
  const int P = plane_count(d);
  auto A = [&](const VecR& z) {
    const VecR v = field.value(z.data());
    VecR a(d);
    for (int mu = 0; mu < d; ++mu) a(mu) = map.sign[mu] * v(map.comp[mu]);
    return a;
  };
  r.surface_value = surface_integral(
      surface,
      [&](const VecR& z, double* out) {
        // dA[mu](nu) = d_nu A_mu by Richardson-extrapolated central differences.
        std::vector<VecR> dA(d, VecR::Zero(d));
        for (int nu = 0; nu < d; ++nu) {
          auto central = [&](double step) {
            VecR zp = z, zm = z;
            zp(nu) += step;
            zm(nu) -= step;
            return VecR((A(zp) - A(zm)) / (2.0 * step));
          };
          const VecR D = (4.0 * central(0.5 * h) - central(h)) / 3.0;
          for (int mu = 0; mu < d; ++mu) dA[mu](nu) = D(mu);
        }
        for (int p = 0; p < P; ++p) {
          const auto [i, j] = plane_axes(d, p);
          out[p] = dA[j](i) - dA[i](j);
        }
      },
      refine);
  const double scale = std::max(std::fabs(r.loop_value), std::fabs(r.surface_value));
  r.residual = scale > 0.0 ? std::fabs(r.loop_value - r.surface_value) / scale : 0.0;
  r.pass = r.residual < 1e-4;
  return r;
}

// ---------------------------------------------------------------------------
// Tail summability

TailReport tail_summability_check(const GreenFunction& g, const LevyMeasure& levy, int n_shells,
                                  std::uint64_t seed, double threshold) {
  if (n_shells < 0) fail("shell count must be non-negative");
  TailReport rep;
  rep.pass = true;
  if (n_shells == 0) return rep;
  if (!(g.mass_gap() > 0.0)) fail("tail check needs a strictly positive spectrum");
  const int d = g.d(), N = g.dim();
  const double R = n_shells + 1.0;
  const PointConfiguration pc = sample_points(levy, d, VecR::Constant(d, -R), 2.0 * R, seed);
  std::vector<std::vector<double>> shells(n_shells);
  std::vector<double> G(static_cast<std::size_t>(N) * N);
  for (std::size_t j = 0; j < pc.size(); ++j) {
    const double* x = pc.pos.data() + j * d;
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) r2 += x[k] * x[k];
    const double r = std::sqrt(r2);
    const int n = static_cast<int>(std::floor(r));
    if (n < 1 || n > n_shells) continue;
    // Probe at the origin: |alpha_j| |G(x0 - x_j)| with the operator norm.
    VecR mx(d);
    for (int k = 0; k < d; ++k) mx(k) = -x[k];
    const MatR Gm = g.point(mx);
    const double a = Eigen::Map<const VecR>(pc.marks.data() + j * N, N).norm();
    shells[n - 1].push_back(a * Gm.operatorNorm());
  }
  for (const auto& s : shells) rep.shell_sums.push_back(pairwise_sum(s.data(), s.size()));
  rep.last = rep.shell_sums.back();
  // Least-squares slope of log shell sums for n > 3.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int n = 4; n <= n_shells; ++n) {
    const double v = rep.shell_sums[n - 1];
    if (v <= 0.0) continue;
    sx += n;
    sy += std::log(v);
    sxx += double(n) * n;
    sxy += n * std::log(v);
    ++cnt;
  }
  rep.trend = cnt >= 2 ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : 0.0;
  bool all_zero = true;
  for (double v : rep.shell_sums) all_zero = all_zero && v == 0.0;
  rep.pass = all_zero || (rep.last < threshold && rep.trend < 0.0);
  return rep;
}

}  // namespace covspde
