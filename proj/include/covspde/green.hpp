#pragma once

#include "covspde/core.hpp"
#include "covspde/covop.hpp"
#include "covspde/lattice.hpp"
#include "covspde/parallel.hpp"
#include "covspde/polynomial.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace covspde {

/// One pole term coeff * P(p) / (|p|^2 + mass^2)^power.
struct PoleTerm {
  double mass = 0.0;
  double power = 1.0;
  double coeff = 0.0;
};

/// G^(p) = sum_k coeff_k P(p) / (|p|^2 + m_k^2)^{s_k} with P = adj(sigma(p)+M).
/// Repeated masses appear with powers 1..multiplicity (confluent form).
struct PartialFractions {
  int d = 0;
  PolyMatrix numerator;
  Poly determinant;  // symbolic det(sigma(p)+M)
  std::vector<PoleTerm> terms;

  MatC eval(const VecR& p) const;
  /// Residue matrix R_k(p) = coeff_k P(p).
  MatC residue(std::size_t k, const VecR& p) const;
};

/// Green function of an admissible, strictly massive operator: either a
/// first-order covariant operator or the scalar (m^2 - Laplacian)^s.
class GreenFunction {
 public:
  static std::shared_ptr<const GreenFunction> for_operator(const CovariantOperator& op);
  static std::shared_ptr<const GreenFunction> scalar_power(int d, double mass, double exponent);

  int d() const { return d_; }
  int dim() const { return dim_; }
  const std::string& key() const { return key_; }
  const MassSpectrum& spectrum() const { return spectrum_; }
  double mass_gap() const { return spectrum_.min_mass(); }
  const Representation& rep_in() const { return rep_in_; }
  const Representation& rep_out() const { return rep_out_; }
  const std::optional<CovariantOperator>& op() const { return op_; }
  const PartialFractions& partial_fractions() const { return pf_; }

  MatC full_symbol(const VecR& p) const;
  MatC momentum(const VecR& p) const;
  /// Symbol averaged over the aliased +-p of Nyquist components (keeps the
  /// lattice operator real and rotation symmetric).
  MatC lattice_symbol(const Lattice& lat, std::size_t mode) const;

  /// Position-space kernel G(x), x != 0.
  MatR point(const VecR& x) const;
  /// Same, row-major N*N into out; no allocation.
  void point_into(const double* x, double* out) const;
  /// The kernel is sum_k T_k(x) F_k(r) with F_k = ((1/r) d/dr)^k F_0 of the
  /// radial pole sum; radial_order() is the largest k.
  int radial_order() const { return kmax_; }
  /// Assembles sum_k T_k(x) F[k] for caller-supplied radial values.
  void assemble_into(const double* x, const double* F, double* out) const;

 private:
  GreenFunction() = default;
  void build_expansion();

  struct RadialGroup {
    double mu = 0.0;
    double nu = 0.0;
    std::vector<double> kcoef;  // coeff * C_s mu^nu (-mu)^k
  };
  struct Term {
    int entry;
    int mono;
    int k;
    double c;
  };

  int d_ = 0;
  int dim_ = 0;
  std::string key_;
  std::optional<CovariantOperator> op_;
  double power_ = 1.0;  // scalar_power exponent
  double power_mass_ = 1.0;
  Representation rep_in_{2, {MatR::Zero(1, 1)}, "trivial"};
  Representation rep_out_{2, {MatR::Zero(1, 1)}, "trivial"};
  MassSpectrum spectrum_;
  PartialFractions pf_;

  int kmax_ = 0;
  int max_pow_ = 0;
  std::vector<Monomial> monos_;
  std::vector<RadialGroup> radial_;
  std::vector<Term> terms_;
};

/// Cached Green function of an operator (validates admissibility once).
std::shared_ptr<const GreenFunction> green_of(const CovariantOperator& op);

MatC momentum_green(const CovariantOperator& op, const VecR& p);
PartialFractions partial_fractions(const CovariantOperator& op);
MatR point_kernel(const CovariantOperator& op, const VecR& x);

struct LatticeKernel {
  Lattice lat;
  int N = 0;
  std::vector<double> values;  // site-major, N*N row-major per site
  MatR at(std::size_t site) const;
};

/// Inverse FFT of the (Nyquist-averaged) momentum Green function; cached by
/// (operator, lattice). Requires m_min L >= 5 unless allow_small_box.
std::shared_ptr<const LatticeKernel> lattice_kernel(const GreenFunction& g, const Lattice& lat,
                                                    bool allow_small_box = false,
                                                    Exec ex = default_exec());
std::shared_ptr<const LatticeKernel> lattice_kernel(const CovariantOperator& op,
                                                    const Lattice& lat,
                                                    bool allow_small_box = false);
/// Scalar kernel of (1 - Laplacian)^(-lambda), lambda in (0, 1/2].
std::shared_ptr<const LatticeKernel> fractional_kernel(double lambda, const Lattice& lat,
                                                       bool allow_small_box = false);
void clear_kernel_cache();

/// max_b max_x |D G_lat(., b) - delta_x0 e_b / a^d| * a^d, D applied spectrally.
double lattice_kernel_residual(const GreenFunction& g, const LatticeKernel& k,
                               Exec ex = default_exec());

struct DecayProfile {
  std::vector<double> radii;
  std::vector<double> shell_max;
  std::optional<double> rate;  // kappa in log|G| ~ c - kappa r - beta log r
  double mass_gap = 0.0;
  bool pass = false;           // rate >= 0.8 m_min
};

DecayProfile decay_profile(const GreenFunction& g, const std::vector<double>& radii);
DecayProfile decay_profile(const CovariantOperator& op, const std::vector<double>& radii);

/// Unit directions used for shell maxima (Fibonacci sphere in d=3).
std::vector<VecR> shell_directions(int d, int count);

}  // namespace covspde
