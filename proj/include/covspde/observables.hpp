#pragma once

#include "covspde/solve.hpp"

#include <string>
#include <vector>

namespace covspde {

struct SchwingerEstimate {
  enum class Method { ClosedForm, MonteCarlo };
  cplx value = 0.0;
  double std_error = 0.0;  // sqrt(E|Z - mean|^2 / n); 0 for closed forms
  std::size_t n_samples = 0;
  Method method = Method::ClosedForm;
  std::string descriptor;

  /// |value - reference| / std_error (infinite when std_error is 0 and they differ).
  double z_score(cplx reference) const;
};

struct SeedRange {
  std::uint64_t first = 0;
  std::uint64_t count = 0;
};

/// Gamma_phi(f) = E exp(i (phi, f)) in closed form: g = D^{-1} f spectrally,
/// then the noise characteristic functional of g by lattice quadrature.
cplx charfunc_solution(const GreenFunction& g, const NoiseSpec& spec, const TrigField& f,
                       const Lattice& lat);

/// E[(phi, f)(phi, h)] from A, the Levy second moment and mean.
double two_point_closed(const GreenFunction& g, const NoiseSpec& spec, const TrigField& f,
                        const TrigField& h, const Lattice& lat);
/// Fourth cumulant of (phi, f): int dx int dlambda <alpha, D^{-1} f(x)>^4.
double fourth_cumulant_closed(const GreenFunction& g, const NoiseSpec& spec, const TrigField& f,
                              const Lattice& lat);
/// Isserlis sum of pairwise two-point functions for four test functions.
double wick_four_point(const GreenFunction& g, const NoiseSpec& spec, const std::vector<TrigField>& fs,
                       const Lattice& lat);

/// Pairings (phi, f_i) per seed, row-major [seed][i], via the sparse
/// pathwise form. Every seed writes its own row.
std::vector<double> pairing_samples(const GreenFunction& g, const NoiseSpec& spec, const Lattice& lat,
                                    const std::vector<TrigField>& fs, SeedRange seeds,
                                    Deposit deposit = Deposit::NearestSite, Exec ex = default_exec());

/// Monte Carlo mean of prod_i (phi, f_i); n <= 4.
SchwingerEstimate npoint_mc(const GreenFunction& g, const NoiseSpec& spec, const Lattice& lat,
                            const std::vector<TrigField>& fs, SeedRange seeds,
                            Deposit deposit = Deposit::NearestSite, Exec ex = default_exec());
/// Monte Carlo E exp(i (phi, f)).
SchwingerEstimate charfunc_mc(const GreenFunction& g, const NoiseSpec& spec, const Lattice& lat,
                              const TrigField& f, SeedRange seeds,
                              Deposit deposit = Deposit::NearestSite, Exec ex = default_exec());

/// Estimators on a sample column (stride picks one test function out of
/// pairing_samples).
SchwingerEstimate mean_estimate(const std::vector<double>& x);
SchwingerEstimate charfunc_estimate(const std::vector<double>& x);
/// Fourth cumulant k4 = m4 - 3 m2^2 about the sample mean; batch-means error.
SchwingerEstimate fourth_cumulant_estimate(const std::vector<double>& x, int batches = 50);

std::vector<double> column(const std::vector<double>& rows, std::size_t width, std::size_t col);

}  // namespace covspde
