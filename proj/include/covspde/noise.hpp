#pragma once

#include "covspde/core.hpp"
#include "covspde/lattice.hpp"
#include "covspde/repr.hpp"
#include "covspde/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace covspde {

/// Finite tau-invariant Levy measure (compound-Poisson mark law times intensity).
class LevyMeasure {
 public:
  enum class Family { RadialGauss, RadialExponential, TwoPoint };

  struct Params {
    double rho = 1.0;    // total mass
    double scale = 1.0;  // radial_gauss: E|alpha|^2 = scale^2; radial_exponential: l; two_point: s
    double rmax = 0.0;   // radial_exponential truncation (default 10 l)
    VecR v;              // two_point direction (normalized internally)
  };

  LevyMeasure(Family family, const Representation& rep, Params params);

  Family family() const { return family_; }
  std::string family_name() const;
  const Params& params() const { return p_; }
  int dim() const { return dim_; }
  double total_mass() const { return p_.rho; }

  void sample_mark(CounterRng& rng, double* out) const;
  /// psi(y) = int (e^{i<alpha,y>} - 1) dlambda(alpha).
  cplx cumulant(const double* y) const;
  /// int (e^{<alpha,y>} - 1) dlambda (the reading without i; may be +inf).
  double cumulant_real_exponent(const double* y) const;

  /// int alpha_{i1} ... alpha_{ik} dlambda for k <= 4.
  double moment(const std::vector<int>& idx) const;
  VecR mean() const;
  MatR second_moment() const;
  /// int <alpha,g>^2 dlambda and int <alpha,g>^4 dlambda.
  double contract2(const double* g) const;
  double contract4(const double* g) const;

 private:
  double radial_moment(int k) const;  // E r^k under the mark law
  void check_invariance(const Representation& rep) const;

  Family family_;
  Params p_;
  int dim_;
  double rnorm_ = 1.0;  // radial_exponential normalizer
};

LevyMeasure builtin_levy(const std::string& family, const Representation& rep,
                         const LevyMeasure::Params& params);

struct NoiseSpec {
  Representation rep;
  MatR A;                            // Gaussian covariance (may be zero)
  std::optional<LevyMeasure> levy;

  NoiseSpec(Representation r, MatR cov, std::optional<LevyMeasure> l = std::nullopt);
  int dim() const { return rep.dim(); }
  bool has_gaussian() const { return max_abs(A) > 0.0; }
  double rho() const { return levy ? levy->total_mass() : 0.0; }
};

enum class Deposit { NearestSite, Spectral };

/// One sampled noise: Poisson atoms in a box plus a Gaussian lattice part
/// drawn mode-by-mode in Fourier space (each mode from its own counter).
class NoiseRealization {
 public:
  const Lattice& lattice() const { return lat_; }
  std::uint64_t seed() const { return seed_; }
  int dim() const { return N_; }
  const VecR& box_lo() const { return lo_; }
  double box_side() const { return side_; }
  double padding() const { return pad_; }
  bool periodic() const { return pad_ == 0.0; }
  std::size_t atoms() const { return marks_.size() / N_; }
  const double* position(std::size_t j) const { return pos_.data() + j * lat_.d(); }
  const double* mark(std::size_t j) const { return marks_.data() + j * N_; }
  bool has_gaussian() const { return has_gauss_; }

  /// Gaussian Fourier coefficient sum_c eta_c e^{-ik x_c} at a mode.
  VecC gaussian_mode(std::size_t mode) const;
  /// White-noise increments per cell plus deposited atoms (lattice backend).
  LatticeField lattice_values(Deposit deposit = Deposit::NearestSite) const;

  friend NoiseRealization sample_noise(const NoiseSpec&, const Lattice&, std::uint64_t, double);

 private:
  NoiseRealization(const Lattice& lat) : lat_(lat) {}
  Lattice lat_;
  std::uint64_t seed_ = 0;
  int N_ = 1;
  VecR lo_;
  double side_ = 0.0;
  double pad_ = 0.0;
  std::vector<double> pos_;
  std::vector<double> marks_;
  bool has_gauss_ = false;
  MatR gauss_root_;  // A^{1/2}
};

/// Atoms uniform in [-padding, L+padding]^d with Poisson(rho |box|) count.
NoiseRealization sample_noise(const NoiseSpec& spec, const Lattice& lat, std::uint64_t seed,
                              double padding = 0.0);

/// exp(-1/2 a^d sum <f,Af>) exp(a^d sum psi(f)).
cplx charfunc_noise(const NoiseSpec& spec, const LatticeField& f);

/// Uniform random rotation angles for invariance checks (one per plane).
std::vector<double> random_angles(CounterRng& rng, int d);

}  // namespace covspde
