#include "covspde/quadrature.hpp"

#include "covspde/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace covspde {

namespace {

// Legendre P_n and P_n' by the three-term recurrence.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

QuadRule build_gl(int n) {
  // Golub-Welsch for the nodes, then Newton polish and derivative-form weights.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
  QuadRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = es.eigenvalues()(i);
    double p, dp;
    for (int it = 0; it < 3; ++it) {
      legendre(n, x, p, dp);
      x -= p / dp;
    }
    legendre(n, x, p, dp);
    r.x[i] = x;
    r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

}  // namespace

const QuadRule& gauss_legendre(int n) {
  if (n < 1) fail("Gauss-Legendre order must be positive");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<QuadRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) {
    if (n == 1)
      slot = std::make_unique<QuadRule>(QuadRule{{0.0}, {2.0}});
    else
      slot = std::make_unique<QuadRule>(build_gl(n));
  }
  return *slot;
}

std::vector<double> chebyshev_nodes(int n, double a, double b) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) {
    const double c = std::cos(kPi * (2.0 * k + 1.0) / (2.0 * n));
    t[k] = 0.5 * (a + b) + 0.5 * (b - a) * c;
  }
  return t;
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

}  // namespace covspde
