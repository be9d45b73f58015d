#pragma once

#include "covspde/core.hpp"
#include "covspde/repr.hpp"

#include <string>
#include <vector>

namespace covspde {

/// First-order operator D = sum_j B_j d_j + M between multiplets of type tau -> tau'.
class CovariantOperator {
 public:
  CovariantOperator(Representation rep_in, Representation rep_out, std::vector<MatR> B, MatR M,
                    std::string name = "custom");

  int d() const { return rep_in_.d(); }
  int dim() const { return rep_in_.dim(); }
  const Representation& rep_in() const { return rep_in_; }
  const Representation& rep_out() const { return rep_out_; }
  const std::vector<MatR>& B() const { return B_; }
  const MatR& M() const { return M_; }
  const std::string& name() const { return name_; }

  /// Set by check_covariance on a passing operator (see certified()).
  bool covariance_checked() const { return certified_; }
  CovariantOperator certified() const;

  /// Stable content hash (hex) used as cache key.
  const std::string& key() const { return key_; }

 private:
  Representation rep_in_, rep_out_;
  std::vector<MatR> B_;
  MatR M_;
  std::string name_;
  std::string key_;
  bool certified_ = false;
};

struct CovarianceReport {
  bool pass = false;
  double residual = 0.0;         // infinitesimal intertwining relations
  double finite_residual = 0.0;  // tau'(R)(sigma(p)+M)tau(R)^-1 vs sigma(Rp)+M
};

struct MassSpectrum {
  std::vector<cplx> masses;  // ascending by real part, with multiplicity
  cplx prefactor = 0.0;      // c in det = c prod(|p|^2 + m_k^2)
  int n = 0;
  bool degree_ok = true;     // 2n <= N
  bool admissible = false;
  bool strictly_positive = false;
  double invariance_residual = 0.0;

  cplx det_model(double t) const;
  /// Smallest mass; requires a strictly positive spectrum.
  double min_mass() const;
};

MatC symbol(const CovariantOperator& op, const VecR& p);
MatC full_symbol(const CovariantOperator& op, const VecR& p);

CovarianceReport check_covariance(const CovariantOperator& op);
/// Infinitesimal residual using a caller-supplied sign for the plane action on
/// the derivative index (+1: sum_m (l_a)_{ml} B_m, -1: sum_m (l_a)_{lm} B_m).
double intertwining_residual(const CovariantOperator& op, int index_sign = +1);

MassSpectrum mass_spectrum(const CovariantOperator& op);

CovariantOperator proca_operator(double m, double b, double c);
/// trivial+vector operator [[m, d^T],[d, m I]]: det = m^{d-1}(|p|^2+m^2).
CovariantOperator klein_gordon_operator(int d, double m);
/// B = 0, M = [m] on the trivial representation.
CovariantOperator scalar_operator(int d, double m);
CovariantOperator direct_sum(const CovariantOperator& a, const CovariantOperator& b);

}  // namespace covspde
