#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace covspde {

using cplx = std::complex<double>;
using MatR = Eigen::MatrixXd;
using MatC = Eigen::MatrixXcd;
using VecR = Eigen::VectorXd;
using VecC = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr int kMaxDim = 4;

/// All library failures surface as this type; messages are part of the API.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() ? static_cast<double>(m.cwiseAbs().maxCoeff()) : 0.0;
}

}  // namespace covspde
