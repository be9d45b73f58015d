#pragma once

namespace covspde {

/// K_{nu+k}(x) for k = 0..count-1 into out. nu may be negative (K_{-v} = K_v).
/// Half-integer orders use the elementary closed form; others start from the
/// standard-library values and recur upward (stable for K).
void bessel_k_seq(double nu, double x, int count, double* out);

double bessel_k(double nu, double x);
double bessel_j(double nu, double x);

/// Constant C_s with  F^{-1}[(|p|^2+mu^2)^{-s}](r) = C_s mu^nu r^{-nu} K_nu(mu r),
/// nu = d/2 - s, under G(x) = \int e^{ipx} G^(p) d^dp/(2pi)^d.
double matern_constant(int d, double s);

/// Averages over the unit sphere S^{N-1}: E cos(z <u, e>) and E exp(z <u, e>).
/// The second is the regular radial solution of Delta Phi = Phi with Phi(0) = 1.
double sphere_mean_cos(int N, double z);
double sphere_mean_exp(int N, double z);
/// d/dz of sphere_mean_exp.
double sphere_mean_exp_dz(int N, double z);
/// Surface area of S^{N-1}.
double sphere_area(int N);

}  // namespace covspde
