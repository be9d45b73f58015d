#include "covspde/polynomial.hpp"

#include <algorithm>
#include <cmath>

namespace covspde {

Poly Poly::constant(cplx c) {
  Poly p;
  p.add(Monomial{}, c);
  return p;
}

Poly Poly::variable(int j, cplx c) {
  Poly p;
  Monomial m{};
  m[j] = 1;
  p.add(m, c);
  return p;
}

void Poly::add(const Monomial& m, cplx c) {
  if (c == cplx(0.0)) return;
  auto [it, inserted] = terms_.emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == cplx(0.0)) terms_.erase(it);
  }
}

int Poly::degree() const {
  int deg = -1;
  for (const auto& [m, c] : terms_) {
    int s = 0;
    for (auto e : m) s += e;
    deg = std::max(deg, s);
  }
  return deg;
}

cplx Poly::coeff(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? cplx(0.0) : it->second;
}

Poly& Poly::operator+=(const Poly& o) {
  for (const auto& [m, c] : o.terms_) add(m, c);
  return *this;
}

Poly& Poly::operator-=(const Poly& o) {
  for (const auto& [m, c] : o.terms_) add(m, -c);
  return *this;
}

Poly& Poly::operator*=(cplx c) {
  if (c == cplx(0.0)) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, v] : terms_) v *= c;
  return *this;
}

Poly operator*(const Poly& a, const Poly& b) {
  Poly r;
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) {
      Monomial m;
      for (int k = 0; k < kMaxDim; ++k) m[k] = static_cast<std::uint8_t>(ma[k] + mb[k]);
      r.add(m, ca * cb);
    }
  return r;
}

Poly Poly::derivative(int j) const {
  Poly r;
  for (const auto& [m, c] : terms_) {
    if (m[j] == 0) continue;
    Monomial mm = m;
    --mm[j];
    r.add(mm, c * static_cast<double>(m[j]));
  }
  return r;
}

Poly Poly::times_variable(int j) const {
  Poly r;
  for (const auto& [m, c] : terms_) {
    Monomial mm = m;
    ++mm[j];
    r.add(mm, c);
  }
  return r;
}

cplx Poly::eval(const double* x, int d) const {
  cplx s = 0.0;
  for (const auto& [m, c] : terms_) {
    double v = 1.0;
    for (int k = 0; k < d; ++k)
      for (int e = 0; e < m[k]; ++e) v *= x[k];
    s += c * v;
  }
  return s;
}

void Poly::prune(double tol) {
  std::erase_if(terms_, [tol](const auto& kv) { return std::abs(kv.second) <= tol; });
}

MatC PolyMatrix::eval(const double* x, int d) const {
  MatC m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = (*this)(i, j).eval(x, d);
  return m;
}

int PolyMatrix::degree() const {
  int deg = -1;
  for (const auto& p : e) deg = std::max(deg, p.degree());
  return deg;
}

AdjugateDet adjugate_and_det(const PolyMatrix& a) {
  // M_0 = 0, c_n = 1; M_k = A M_{k-1} + c_{n-k+1} I; c_{n-k} = -tr(A M_k)/k.
  const int n = a.n;
  auto mul = [n](const PolyMatrix& x, const PolyMatrix& y) {
    PolyMatrix r(n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        if (x(i, k).is_zero()) continue;
        for (int j = 0; j < n; ++j)
          if (!y(k, j).is_zero()) r(i, j) += x(i, k) * y(k, j);
      }
    return r;
  };
  PolyMatrix mk(n);
  Poly c_prev = Poly::constant(1.0);
  for (int k = 1; k <= n; ++k) {
    PolyMatrix next = mul(a, mk);
    for (int i = 0; i < n; ++i) next(i, i) += c_prev;
    mk = std::move(next);
    PolyMatrix am = mul(a, mk);
    Poly tr;
    for (int i = 0; i < n; ++i) tr += am(i, i);
    c_prev = tr * cplx(-1.0 / k);
  }
  AdjugateDet out;
  const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
  out.det = c_prev * cplx(sgn);
  out.adj = mk;
  for (auto& p : out.adj.e) p *= cplx(-sgn);
  return out;
}

}  // namespace covspde
