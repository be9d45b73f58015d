#pragma once

#include "covspde/core.hpp"
#include "covspde/green.hpp"
#include "covspde/lattice.hpp"
#include "covspde/rng.hpp"

#include <array>
#include <vector>

namespace covspde {

/// Band-limited periodic test function on [0, L)^d:
/// f(x) = sum_m Re(C_m exp(2 pi i <k_m, x> / L)), C_m complex multiplets.
class TrigField {
 public:
  struct Mode {
    std::array<int, kMaxDim> k{};
    VecC c;
  };

  TrigField(int d, double L, int comps);

  int d() const { return d_; }
  double L() const { return L_; }
  int comps() const { return comps_; }
  const std::vector<Mode>& modes() const { return modes_; }

  TrigField& add(const std::array<int, kMaxDim>& k, const VecC& c);
  VecR wavevector(const Mode& m) const;
  /// Largest |k_i| over all modes.
  int bandwidth() const;

  VecR eval(const double* x) const;
  LatticeField sample(const Lattice& lat) const;

  TrigField operator+(const TrigField& o) const;
  TrigField operator*(double s) const;
  TrigField operator-() const { return *this * -1.0; }

  /// Applies a momentum multiplier: C_m -> G^(kappa_m) C_m. With the Green
  /// function this is D^{-1} f.
  TrigField apply(const GreenFunction& g) const;
  /// (T f)(x) = tau(R) f(R^{-1} x) for a lattice-compatible rotation R
  /// (integer matrix) and the representation matrix tau(R).
  TrigField rotated(const MatR& R, const MatR& tau) const;
  /// Shift f(x) -> f(x - s).
  TrigField translated(const VecR& s) const;

  /// Band-limited interpolant of lattice samples: every non-Nyquist mode
  /// whose largest coefficient exceeds drop_below times the peak.
  static TrigField from_lattice(const LatticeField& f, double drop_below = 0.0);

  /// int_{[0,L)^d} <f, g> dx (exact).
  double inner(const TrigField& o) const;

 private:
  int d_;
  double L_;
  int comps_;
  std::vector<Mode> modes_;
};

/// Random test function with `count` modes of |k_i| <= kmax and unit-scale
/// Gaussian coefficients.
TrigField random_trig_field(CounterRng& rng, int d, double L, int comps, int count, int kmax);

}  // namespace covspde
