#pragma once

#include "covspde/core.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <vector>

namespace covspde {

using Monomial = std::array<std::uint8_t, kMaxDim>;

/// Sparse multivariate polynomial with complex coefficients in up to kMaxDim variables.
class Poly {
 public:
  Poly() = default;
  static Poly constant(cplx c);
  static Poly variable(int j, cplx c = 1.0);

  const std::map<Monomial, cplx>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;
  cplx coeff(const Monomial& m) const;

  Poly& operator+=(const Poly& o);
  Poly& operator-=(const Poly& o);
  Poly& operator*=(cplx c);
  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
  friend Poly operator*(Poly a, cplx c) { return a *= c; }
  friend Poly operator*(const Poly& a, const Poly& b);

  Poly derivative(int j) const;
  Poly times_variable(int j) const;
  cplx eval(const double* x, int d) const;
  /// Drops coefficients with |c| <= tol.
  void prune(double tol);

 private:
  void add(const Monomial& m, cplx c);
  std::map<Monomial, cplx> terms_;
};

struct PolyMatrix {
  int n = 0;
  std::vector<Poly> e;
  explicit PolyMatrix(int size = 0) : n(size), e(static_cast<std::size_t>(size) * size) {}
  Poly& operator()(int i, int j) { return e[static_cast<std::size_t>(i) * n + j]; }
  const Poly& operator()(int i, int j) const { return e[static_cast<std::size_t>(i) * n + j]; }
  MatC eval(const double* x, int d) const;
  int degree() const;
};

struct AdjugateDet {
  PolyMatrix adj;
  Poly det;
};

/// Faddeev-LeVerrier on a matrix of polynomials: det(A) and adj(A) symbolically.
AdjugateDet adjugate_and_det(const PolyMatrix& a);

}  // namespace covspde
