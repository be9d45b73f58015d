#pragma once
// Independent reference computations shared by the unit tests. Nothing here
// calls into the library's numerical paths.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <random>

namespace oracle {

inline constexpr double pi = 3.14159265358979323846;

// exp(A) by scaling-and-squaring with a 20-term Taylor core.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  const double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  while (std::ldexp(nrm, -s) > 0.25) ++s;
  const Eigen::MatrixXd b = a * std::ldexp(1.0, -s);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 20; ++k) {
    term = term * b / k;
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

// The 6x6 Proca operator written out entry by entry, derivatives replaced by i p.
inline Eigen::MatrixXcd proca_full_symbol(double m, double b, double c, const Eigen::Vector3d& p) {
  using C = std::complex<double>;
  const C I(0.0, 1.0);
  const C dx = I * p(0), dy = I * p(1), dz = I * p(2);
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(6, 6);
  for (int i = 0; i < 6; ++i) s(i, i) = m;
  s(0, 4) = b * dz;  s(0, 5) = -b * dy;
  s(1, 3) = -b * dz; s(1, 5) = b * dx;
  s(2, 3) = b * dy;  s(2, 4) = -b * dx;
  s(3, 1) = c * dz;  s(3, 2) = -c * dy;
  s(4, 0) = -c * dz; s(4, 2) = c * dx;
  s(5, 0) = c * dy;  s(5, 1) = -c * dx;
  return s;
}

// F^{-1}[(m^2+|p|^2)^{-s}](r) in d dims by the heat-kernel subordination
// integral (1/Gamma(s)) int_0^inf u^{s-1} e^{-m^2 u} (4 pi u)^{-d/2} e^{-r^2/(4u)} du,
// evaluated with the trapezoid rule in v = log u (doubly exponential decay).
inline double matern_subordination(int d, double m, double s, double r) {
  const double h = 0.01;
  double sum = 0.0;
  for (double v = -60.0; v <= 12.0; v += h) {
    const double u = std::exp(v);
    const double e = -m * m * u - r * r / (4.0 * u);
    if (e < -745.0) continue;
    sum += std::pow(u, s) * std::pow(4.0 * pi * u, -0.5 * d) * std::exp(e);
  }
  return sum * h / std::tgamma(s);
}

// Yukawa kernel Y(r) = e^{-mr}/(4 pi r) and its radial derivatives in d = 3.
struct Yukawa3 {
  double m;
  double y(double r) const { return std::exp(-m * r) / (4 * pi * r); }
  double y1(double r) const { return -std::exp(-m * r) * (m * r + 1) / (4 * pi * r * r); }
  double y2(double r) const {
    return std::exp(-m * r) * (m * m * r * r + 2 * m * r + 2) / (4 * pi * r * r * r);
  }
  // d_i d_j Y at x.
  Eigen::Matrix3d hessian(const Eigen::Vector3d& x) const {
    const double r = x.norm();
    const Eigen::Vector3d u = x / r;
    return (y2(r) - y1(r) / r) * (u * u.transpose()) + (y1(r) / r) * Eigen::Matrix3d::Identity();
  }
  Eigen::Vector3d gradient(const Eigen::Vector3d& x) const {
    const double r = x.norm();
    return y1(r) * x / r;
  }
};

}  // namespace oracle
