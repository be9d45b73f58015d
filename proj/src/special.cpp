#include "covspde/special.hpp"

#include "covspde/core.hpp"

#include <cmath>

namespace covspde {

namespace {

bool is_half_integer(double nu) {
  const double t = nu - 0.5;
  return std::fabs(t - std::round(t)) < 1e-14;
}

}  // namespace

void bessel_k_seq(double nu, double x, int count, double* out) {
  if (count <= 0) return;
  if (!(x > 0.0)) fail("Bessel K argument must be positive");
  double k0, k1;
  if (is_half_integer(nu)) {
    // Walk from K_{1/2} = K_{-1/2} to order nu (upward from |nu|).
    const double half = std::sqrt(kPi / (2.0 * x)) * std::exp(-x);
    const double an = std::fabs(nu);
    double km = half, kc = half;  // K_{-1/2}, K_{1/2}
    double mu = 0.5;
    while (mu < an - 1e-12) {
      const double kn = km + (2.0 * mu / x) * kc;
      km = kc;
      kc = kn;
      mu += 1.0;
    }
    k0 = kc;
    // For nu < 0, K_{nu+1} = K_{|nu|-1} = km.
    k1 = (nu < 0) ? km : km + (2.0 * mu / x) * kc;
  } else {
    k0 = std::cyl_bessel_k(std::fabs(nu), x);
    k1 = std::cyl_bessel_k(std::fabs(nu + 1.0), x);
  }
  out[0] = k0;
  if (count == 1) return;
  out[1] = k1;
  for (int k = 2; k < count; ++k) {
    const double m = nu + k - 1;
    out[k] = out[k - 2] + (2.0 * m / x) * out[k - 1];
  }
}

double bessel_k(double nu, double x) {
  double v;
  bessel_k_seq(nu, x, 1, &v);
  return v;
}

double bessel_j(double nu, double x) { return std::cyl_bessel_j(nu, x); }

double matern_constant(int d, double s) {
  return std::pow(2.0 * kPi, -0.5 * d) * std::pow(2.0, 1.0 - s) / std::tgamma(s);
}

double sphere_mean_cos(int N, double z) {
  if (z == 0.0) return 1.0;
  if (N == 1) return std::cos(z);
  if (N == 3) return std::sin(z) / z;
  const double nu = 0.5 * N - 1.0;
  return std::tgamma(0.5 * N) * std::pow(2.0 / z, nu) * std::cyl_bessel_j(nu, std::fabs(z));
}

double sphere_mean_exp(int N, double z) {
  if (z == 0.0) return 1.0;
  if (N == 1) return std::cosh(z);
  if (N == 3) return std::sinh(z) / z;
  const double nu = 0.5 * N - 1.0;
  return std::tgamma(0.5 * N) * std::pow(2.0 / z, nu) * std::cyl_bessel_i(nu, std::fabs(z));
}

double sphere_mean_exp_dz(int N, double z) {
  if (z == 0.0) return 0.0;
  if (N == 1) return std::sinh(z);
  // d/dz [z^-nu I_nu(z)] = z^-nu I_{nu+1}(z).
  const double nu = 0.5 * N - 1.0;
  return std::tgamma(0.5 * N) * std::pow(2.0, nu) * std::pow(z, -nu) * std::cyl_bessel_i(nu + 1.0, z);
}

double sphere_area(int N) { return 2.0 * std::pow(kPi, 0.5 * N) / std::tgamma(0.5 * N); }

}  // namespace covspde
