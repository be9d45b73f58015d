#include "covspde/covop.hpp"

#include "covspde/quadrature.hpp"
#include "covspde/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

namespace covspde {

namespace {

std::string content_key(const Representation& in, const Representation& out,
                        const std::vector<MatR>& B, const MatR& M) {
  std::string s = std::to_string(in.d()) + "|" + in.name() + "|" + out.name();
  char buf[32];
  auto put = [&](const MatR& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", m.data()[i]);
      s += buf;
    }
    s += ";";
  };
  for (const auto& b : B) put(b);
  put(M);
  std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(s));
  return buf;
}

VecR random_unit(CounterRng& rng, int d) {
  VecR v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.normal();
  return v / v.norm();
}

cplx det_of(const CovariantOperator& op, const VecR& p) {
  return full_symbol(op, p).partialPivLu().determinant();
}

}  // namespace

CovariantOperator::CovariantOperator(Representation rep_in, Representation rep_out,
                                     std::vector<MatR> B, MatR M, std::string name)
    : rep_in_(std::move(rep_in)),
      rep_out_(std::move(rep_out)),
      B_(std::move(B)),
      M_(std::move(M)),
      name_(std::move(name)) {
  const int n = rep_in_.dim();
  if (rep_out_.dim() != n) fail("operator shape mismatch: dim(rep_in) must equal dim(rep_out)");
  if (rep_out_.d() != rep_in_.d()) fail("operator shape mismatch: representations of different d");
  if (static_cast<int>(B_.size()) != rep_in_.d()) fail("operator shape mismatch: need d matrices B");
  for (const auto& b : B_)
    if (b.rows() != n || b.cols() != n) fail("operator shape mismatch: B has wrong size");
  if (M_.rows() != n || M_.cols() != n) fail("operator shape mismatch: M has wrong size");
  key_ = content_key(rep_in_, rep_out_, B_, M_);
}

CovariantOperator CovariantOperator::certified() const {
  CovariantOperator c = *this;
  c.certified_ = check_covariance(*this).pass;
  return c;
}

cplx MassSpectrum::det_model(double t) const {
  cplx v = prefactor;
  for (const auto& m : masses) v *= (t + m * m);
  return v;
}

double MassSpectrum::min_mass() const {
  if (!strictly_positive || masses.empty()) fail("mass gap undefined: spectrum not strictly positive");
  return masses.front().real();
}

MatC symbol(const CovariantOperator& op, const VecR& p) {
  const int n = op.dim();
  MatC s = MatC::Zero(n, n);
  for (int j = 0; j < op.d(); ++j) s += cplx(0.0, p(j)) * op.B()[j].cast<cplx>();
  return s;
}

MatC full_symbol(const CovariantOperator& op, const VecR& p) {
  return symbol(op, p) + op.M().cast<cplx>();
}

double intertwining_residual(const CovariantOperator& op, int index_sign) {
  const int d = op.d();
  double worst = 0.0;
  for (int a = 0; a < plane_count(d); ++a) {
    const MatR& s = op.rep_in().generator(a);
    const MatR& sp = op.rep_out().generator(a);
    const MatR l = defining_generator(d, a);
    worst = std::max(worst, max_abs(sp * op.M() - op.M() * s));
    for (int k = 0; k < d; ++k) {
      MatR rhs = MatR::Zero(op.dim(), op.dim());
      for (int m = 0; m < d; ++m) {
        const double coef = index_sign > 0 ? l(m, k) : l(k, m);
        if (coef != 0.0) rhs += coef * op.B()[m];
      }
      worst = std::max(worst, max_abs(sp * op.B()[k] - op.B()[k] * s - rhs));
    }
  }
  return worst;
}

CovarianceReport check_covariance(const CovariantOperator& op) {
  CovarianceReport r;
  r.residual = intertwining_residual(op, +1);
  r.pass = r.residual < 1e-10;

  const int d = op.d();
  const Representation vec = builtin_representation("vector", d);
  CounterRng rng(0xC0FFEEull, Stream::Test, 17);
  const double angles[3] = {kPi / 2, 1.0, 2.37};
  for (int trial = 0; trial < 8; ++trial) {
    VecR p(d);
    for (int i = 0; i < d; ++i) p(i) = 2.0 * rng.normal();
    const int plane = trial % plane_count(d);
    for (double ang : angles) {
      const MatR R = rotation_matrix(vec, plane, ang);
      const MatR t_in = rotation_matrix(op.rep_in(), plane, ang);
      const MatR t_out = rotation_matrix(op.rep_out(), plane, ang);
      const MatC lhs = t_out.cast<cplx>() * full_symbol(op, p) * t_in.transpose().cast<cplx>();
      const VecR rp = R * p;
      r.finite_residual = std::max(r.finite_residual, max_abs(lhs - full_symbol(op, rp)));
    }
  }
  return r;
}

MassSpectrum mass_spectrum(const CovariantOperator& op) {
  const int N = op.dim();
  const int d = op.d();
  double bmax = 0.0;
  for (const auto& b : op.B()) bmax = std::max(bmax, max_abs(b));
  const double mmax = max_abs(op.M());
  const double T = std::max(4.0 * (N * bmax) * (N * bmax) + 4.0 * mmax * mmax, 1.0);

  CounterRng rng(0x5EC7Aull, Stream::Test, 1);
  const VecR p0 = random_unit(rng, d);

  const int deg_max = N / 2;
  const int n_nodes = 4 * (deg_max + 1) + 8;
  const std::vector<double> nodes = chebyshev_nodes(n_nodes, 0.0, 1.0);
  VecR rhs(n_nodes);
  MatR V(n_nodes, deg_max + 1);
  double hadamard_ratio = 0.0;  // |det| / prod of column norms
  for (int i = 0; i < n_nodes; ++i) {
    const MatC A = full_symbol(op, p0 * std::sqrt(nodes[i] * T));
    rhs(i) = A.partialPivLu().determinant().real();
    double bound = 1.0;
    for (int j = 0; j < N; ++j) bound *= A.col(j).norm();
    if (bound > 0.0) hadamard_ratio = std::max(hadamard_ratio, std::fabs(rhs(i)) / bound);
    double v = 1.0;
    for (int k = 0; k <= deg_max; ++k, v *= nodes[i]) V(i, k) = v;
  }
  VecR q = V.colPivHouseholderQr().solve(rhs);

  MassSpectrum ms;
  const double qmax = q.cwiseAbs().maxCoeff();
  if (!(hadamard_ratio > 1e-11)) {  // singular at every node: det vanishes identically
    ms.prefactor = 0.0;
    ms.n = 0;
    ms.admissible = false;
    ms.strictly_positive = false;
    return ms;
  }
  int n = deg_max;
  while (n > 0 && std::fabs(q(n)) < 1e-9 * qmax) --n;
  ms.n = n;
  ms.degree_ok = 2 * n <= N;

  std::vector<cplx> troots;
  if (n > 0) {
    MatC comp = MatC::Zero(n, n);
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -q(i) / q(n);
    Eigen::ComplexEigenSolver<MatC> es(comp, false);
    for (int i = 0; i < n; ++i) troots.push_back(es.eigenvalues()(i) * T);
  }
  // Repeated roots split under fitting noise; replace clusters by their mean.
  std::vector<int> group(troots.size(), -1);
  int ng = 0;
  for (std::size_t i = 0; i < troots.size(); ++i) {
    if (group[i] >= 0) continue;
    group[i] = ng;
    for (std::size_t j = i + 1; j < troots.size(); ++j)
      if (group[j] < 0 &&
          std::abs(troots[i] - troots[j]) < 1e-5 * std::max(1.0, std::abs(troots[i])))
        group[j] = ng;
    ++ng;
  }
  std::vector<cplx> merged(troots.size());
  for (int g = 0; g < ng; ++g) {
    cplx mean = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < troots.size(); ++i)
      if (group[i] == g) {
        mean += troots[i];
        ++cnt;
      }
    mean /= static_cast<double>(cnt);
    for (std::size_t i = 0; i < troots.size(); ++i)
      if (group[i] == g) merged[i] = mean;
  }

  bool real_masses = true;
  bool nonzero = true;
  for (const cplx& t : merged) {
    const double tol = 1e-8 * std::max(1.0, std::abs(t));
    if (std::fabs(t.imag()) > tol || t.real() > tol) real_masses = false;
    cplx m = std::sqrt(-t);
    if (real_masses) m = cplx(std::sqrt(std::max(0.0, -t.real())), 0.0);
    if (std::abs(m) < 1e-8) nonzero = false;
    ms.masses.push_back(m);
  }
  std::sort(ms.masses.begin(), ms.masses.end(), [](cplx a, cplx b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
  });

  // Prefactor by least squares with the roots fixed.
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n_nodes; ++i) {
    ms.prefactor = 1.0;
    const cplx pm = ms.det_model(nodes[i] * T);
    num += rhs(i) * pm.real();
    den += std::norm(pm);
  }
  ms.prefactor = num / den;

  // Rotation invariance: the determinant must depend on |p|^2 only.
  for (int trial = 0; trial < 32; ++trial) {
    const VecR dir = random_unit(rng, d);
    const double t = T * rng.uniform();
    const cplx a = det_of(op, dir * std::sqrt(t));
    const cplx b = ms.det_model(t);
    const double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
    ms.invariance_residual = std::max(ms.invariance_residual, rel);
  }
  if (ms.invariance_residual > 1e-8)
    fail("operator symbol determinant is not rotation invariant; operator likely not covariant");

  ms.admissible = real_masses && std::abs(ms.prefactor) > 0.0 && ms.degree_ok;
  ms.strictly_positive = ms.admissible && nonzero;
  return ms;
}

CovariantOperator proca_operator(double m, double b, double c) {
  if (std::fabs(std::fabs(b) - 1.0) > 0 || std::fabs(std::fabs(c) - 1.0) > 0)
    fail("Proca operator requires b, c in {+1, -1}");
  if (b * c != -1.0) fail("Proca operator requires bc = -1");
  if (!(m >= 0.0)) fail("Proca mass must be non-negative");
  const Representation rep = builtin_representation("vector+vector", 3);
  std::vector<MatR> B;
  for (int j = 0; j < 3; ++j) {
    // (e_j x .) as a matrix: (L_j)_{ik} = eps_{ijk}.
    MatR L = MatR::Zero(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) {
        if (i == j || k == j || i == k) continue;
        const int perm = (j - i + 3) % 3;  // eps_{ijk}: +1 for cyclic order
        L(i, k) = perm == 1 ? 1.0 : -1.0;
      }
    MatR Bj = MatR::Zero(6, 6);
    Bj.topRightCorner(3, 3) = -b * L;
    Bj.bottomLeftCorner(3, 3) = -c * L;
    B.push_back(Bj);
  }
  return CovariantOperator(rep, rep, std::move(B), m * MatR::Identity(6, 6), "proca");
}

CovariantOperator klein_gordon_operator(int d, double m) {
  const Representation rep = builtin_representation("trivial+vector", d);
  std::vector<MatR> B;
  for (int j = 0; j < d; ++j) {
    MatR Bj = MatR::Zero(d + 1, d + 1);
    Bj(0, j + 1) = 1.0;
    Bj(j + 1, 0) = 1.0;
    B.push_back(Bj);
  }
  return CovariantOperator(rep, rep, std::move(B), m * MatR::Identity(d + 1, d + 1),
                           "klein_gordon");
}

CovariantOperator scalar_operator(int d, double m) {
  const Representation rep = builtin_representation("trivial", d);
  return CovariantOperator(rep, rep, std::vector<MatR>(d, MatR::Zero(1, 1)),
                           MatR::Constant(1, 1, m), "scalar");
}

CovariantOperator direct_sum(const CovariantOperator& a, const CovariantOperator& b) {
  const int na = a.dim(), nb = b.dim();
  auto blk = [&](const MatR& x, const MatR& y) {
    MatR r = MatR::Zero(na + nb, na + nb);
    r.topLeftCorner(na, na) = x;
    r.bottomRightCorner(nb, nb) = y;
    return r;
  };
  std::vector<MatR> B;
  for (int j = 0; j < a.d(); ++j) B.push_back(blk(a.B()[j], b.B()[j]));
  return CovariantOperator(a.rep_in() + b.rep_in(), a.rep_out() + b.rep_out(), std::move(B),
                           blk(a.M(), b.M()), a.name() + "+" + b.name());
}

}  // namespace covspde
