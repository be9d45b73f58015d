#pragma once

#include <vector>

namespace covspde {

struct QuadRule {
  std::vector<double> x;
  std::vector<double> w;
};

/// Gauss-Legendre rule on [-1, 1]. Cached per order; the reference stays valid.
const QuadRule& gauss_legendre(int n);

/// Chebyshev points of the first kind mapped to [a, b].
std::vector<double> chebyshev_nodes(int n, double a, double b);

/// Pairwise summation; order of additions depends only on the length.
double pairwise_sum(const double* v, std::size_t n);

}  // namespace covspde
