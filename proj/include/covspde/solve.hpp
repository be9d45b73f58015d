#pragma once

#include "covspde/green.hpp"
#include "covspde/noise.hpp"
#include "covspde/testfn.hpp"

#include <memory>
#include <optional>

namespace covspde {

/// Weak solution of the adjoint equation, defined by (phi, f) = (eta, D^{-1} f).
/// Lattice backend: phi^(k) = (sigma(k) + M)^{-H} eta^(k) on the torus.
/// Point backend: phi(y) = sum_j G(x_j - y)^T alpha_j over the Poisson atoms.
class FieldRealization {
 public:
  enum class Backend { Lattice, Point };

  Backend backend() const { return backend_; }
  const GreenFunction& green() const { return *green_; }
  std::shared_ptr<const GreenFunction> green_ptr() const { return green_; }
  int dim() const { return green_->dim(); }
  std::uint64_t seed() const { return seed_; }

  /// Lattice backend values.
  const LatticeField& lattice_values() const;
  /// Point backend: number of atoms and their data.
  std::size_t atoms() const { return marks_.size() / dim(); }
  const double* position(std::size_t j) const { return pos_.data() + j * green_->d(); }
  const double* mark(std::size_t j) const { return marks_.data() + j * dim(); }
  bool periodic() const { return periodic_; }
  double box_side() const { return side_; }
  /// Kernel terms beyond this distance are dropped.
  double cutoff() const { return cutoff_; }

  /// Point backend field value at x.
  VecR value(const double* x) const;

  friend FieldRealization solve_lattice(std::shared_ptr<const GreenFunction>,
                                        const NoiseRealization&, Deposit, Exec);
  friend FieldRealization solve_points(std::shared_ptr<const GreenFunction>,
                                       const NoiseRealization&);
  friend FieldRealization atom_field(std::shared_ptr<const GreenFunction>, const std::vector<VecR>&,
                                     const std::vector<VecR>&);

 private:
  FieldRealization() = default;
  Backend backend_ = Backend::Lattice;
  std::shared_ptr<const GreenFunction> green_;
  std::uint64_t seed_ = 0;
  std::optional<LatticeField> field_;
  std::vector<double> pos_, marks_;
  bool periodic_ = true;
  double side_ = 0.0;
  double cutoff_ = 0.0;
};

FieldRealization solve_lattice(std::shared_ptr<const GreenFunction> g, const NoiseRealization& noise,
                               Deposit deposit = Deposit::NearestSite, Exec ex = default_exec());
FieldRealization solve_lattice(const CovariantOperator& op, const NoiseRealization& noise,
                               Deposit deposit = Deposit::NearestSite);
FieldRealization solve_points(std::shared_ptr<const GreenFunction> g, const NoiseRealization& noise);
FieldRealization solve_points(const CovariantOperator& op, const NoiseRealization& noise);
/// Point-backend field of explicit atoms in free space, without truncation.
FieldRealization atom_field(std::shared_ptr<const GreenFunction> g, const std::vector<VecR>& positions,
                           const std::vector<VecR>& marks);

/// max over modes of |(sigma+M)^H phi^ - eta^| / max |eta^| (lattice backend).
double solve_residual(const FieldRealization& field, const NoiseRealization& noise,
                      Deposit deposit = Deposit::NearestSite);

/// (phi, f). Lattice: a^d sum_s <phi_s, f(x_s)>. Point: sum_j <alpha_j, (D^{-1} f)(x_j)>
/// with D^{-1} f evaluated exactly in Fourier space (periodic backend only).
double eval_pairing(const FieldRealization& field, const TrigField& f);
double eval_pairing(const FieldRealization& field, const LatticeField& f);

/// (eta, g) for a band-limited g straight from the noise: Gaussian part from
/// the Fourier modes of g, atoms by the chosen deposit rule. Equals the
/// lattice-solve pairing of D^{-1}-preimages without building the field.
double noise_pairing(const NoiseRealization& noise, const TrigField& g,
                     Deposit deposit = Deposit::NearestSite);
/// (phi, f) computed as (eta, D^{-1} f) on the sparse modes of f.
double pathwise_pairing(const GreenFunction& g, const NoiseRealization& noise, const TrigField& f,
                        Deposit deposit = Deposit::NearestSite);

}  // namespace covspde
