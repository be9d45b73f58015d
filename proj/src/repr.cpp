#include "covspde/repr.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

namespace covspde {

int plane_count(int d) { return d * (d - 1) / 2; }

std::pair<int, int> plane_axes(int d, int plane) {
  int a = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j, ++a)
      if (a == plane) return {i, j};
  fail("unknown rotation plane");
}

int plane_index(int d, int i, int j) {
  if (i == j || i < 0 || j < 0 || i >= d || j >= d) fail("unknown rotation plane");
  if (i > j) std::swap(i, j);
  int a = 0;
  for (int p = 0; p < i; ++p) a += d - 1 - p;
  return a + (j - i - 1);
}

MatR defining_generator(int d, int plane) {
  auto [i, j] = plane_axes(d, plane);
  MatR s = MatR::Zero(d, d);
  s(i, j) = -1.0;
  s(j, i) = 1.0;
  return s;
}

Representation::Representation(int d, std::vector<MatR> generators, std::string name)
    : d_(d), gens_(std::move(generators)), name_(std::move(name)) {
  if (d < 2 || d > kMaxDim) fail("dimension must be in [2, 4]");
  if (static_cast<int>(gens_.size()) != plane_count(d))
    fail("representation needs one generator per rotation plane");
  dim_ = static_cast<int>(gens_.front().rows());
  for (const auto& g : gens_) {
    if (g.rows() != dim_ || g.cols() != dim_) fail("generator shape mismatch");
    if (max_abs(g + g.transpose()) >= 1e-12) fail("generators must be antisymmetric");
  }
}

const MatR& Representation::generator(int plane) const {
  if (plane < 0 || plane >= static_cast<int>(gens_.size())) fail("unknown rotation plane");
  return gens_[plane];
}

Representation Representation::operator+(const Representation& o) const {
  if (o.d_ != d_) fail("direct sum of representations with different d");
  std::vector<MatR> g;
  g.reserve(gens_.size());
  for (std::size_t a = 0; a < gens_.size(); ++a) {
    MatR s = MatR::Zero(dim_ + o.dim_, dim_ + o.dim_);
    s.topLeftCorner(dim_, dim_) = gens_[a];
    s.bottomRightCorner(o.dim_, o.dim_) = o.gens_[a];
    g.push_back(std::move(s));
  }
  return Representation(d_, std::move(g), name_ + "+" + o.name_);
}

namespace {

Representation make_trivial(int d) {
  return Representation(d, std::vector<MatR>(plane_count(d), MatR::Zero(1, 1)), "trivial");
}

Representation make_vector(int d) {
  std::vector<MatR> g;
  for (int a = 0; a < plane_count(d); ++a) g.push_back(defining_generator(d, a));
  return Representation(d, std::move(g), "vector");
}

// Basis E_ab = e_a e_b^T - e_b e_a^T (a<b, plane order); action X -> [l, X].
Representation make_skew2(int d) {
  const int m = plane_count(d);
  std::vector<MatR> basis;
  for (int a = 0; a < m; ++a) basis.push_back(defining_generator(d, a));
  std::vector<MatR> g;
  for (int a = 0; a < m; ++a) {
    const MatR& l = basis[a];
    MatR s = MatR::Zero(m, m);
    for (int c = 0; c < m; ++c) {
      const MatR x = l * basis[c] - basis[c] * l;
      // Coordinates in the basis: coefficient of E_ab is x(b, a).
      for (int r = 0; r < m; ++r) {
        auto [i, j] = plane_axes(d, r);
        s(r, c) = x(j, i);
      }
    }
    g.push_back(std::move(s));
  }
  return Representation(d, std::move(g), "skew2");
}

}  // namespace

Representation builtin_representation(const std::string& name, int d) {
  if (d < 2 || d > kMaxDim) fail("dimension must be in [2, 4]");
  std::vector<std::string> parts;
  std::stringstream ss(name);
  std::string tok;
  while (std::getline(ss, tok, '+')) parts.push_back(tok);
  if (parts.empty()) fail("unknown representation '" + name + "'; supported: trivial, vector, skew2 and '+' sums");
  auto one = [&](const std::string& p) {
    if (p == "trivial") return make_trivial(d);
    if (p == "vector") return make_vector(d);
    if (p == "skew2") return make_skew2(d);
    fail("unknown representation '" + p + "'; supported: trivial, vector, skew2 and '+' sums");
  };
  Representation r = one(parts[0]);
  for (std::size_t k = 1; k < parts.size(); ++k) r = r + one(parts[k]);
  return r;
}

MatR rotation_matrix(const Representation& rep, int plane, double angle) {
  if (plane < 0 || plane >= plane_count(rep.d())) fail("unknown rotation plane");
  if (!std::isfinite(angle)) fail("rotation angle must be finite");
  const MatR a = angle * rep.generator(plane);
  return a.exp();
}

double commutation_residual(const Representation& rep) {
  const int d = rep.d();
  const int m = plane_count(d);
  double worst = 0.0;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      const MatR la = defining_generator(d, a), lb = defining_generator(d, b);
      const MatR lc = la * lb - lb * la;
      MatR expect = MatR::Zero(rep.dim(), rep.dim());
      for (int c = 0; c < m; ++c) {
        auto [i, j] = plane_axes(d, c);
        const double f = lc(j, i);
        if (f != 0.0) expect += f * rep.generator(c);
      }
      const MatR& sa = rep.generator(a);
      const MatR& sb = rep.generator(b);
      worst = std::max(worst, max_abs(sa * sb - sb * sa - expect));
    }
  return worst;
}

MatR compose_rotations(const Representation& rep, const std::vector<double>& angles) {
  MatR r = MatR::Identity(rep.dim(), rep.dim());
  for (std::size_t a = 0; a < angles.size(); ++a)
    r = rotation_matrix(rep, static_cast<int>(a), angles[a]) * r;
  return r;
}

}  // namespace covspde
