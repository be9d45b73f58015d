#pragma once

#include "covspde/core.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace covspde {

/// Periodic cubic lattice: n sites per axis (power of two, n >= 8), side L.
/// Sites x = a*i, i in [0, n); momenta 2pi/L * {-n/2, ..., n/2-1}.
class Lattice {
 public:
  Lattice(int d, double L, int n);

  int d() const { return d_; }
  double L() const { return L_; }
  int n() const { return n_; }
  double a() const { return L_ / n_; }
  double cell_volume() const;
  std::size_t sites() const { return sites_; }

  std::array<int, kMaxDim> coords(std::size_t idx) const;
  std::size_t index(const std::array<int, kMaxDim>& c) const;  // wraps periodically
  int signed_coord(int i) const { return i >= n_ / 2 ? i - n_ : i; }

  VecR position(std::size_t idx) const;
  /// Minimal-image displacement of the site from the origin.
  VecR displacement(std::size_t idx) const;
  VecR momentum(std::size_t idx) const;
  std::size_t conjugate(std::size_t idx) const;
  bool self_conjugate(std::size_t idx) const { return conjugate(idx) == idx; }
  /// Number of Nyquist components (signed index -n/2) of a mode.
  int nyquist_count(std::size_t idx) const;
  std::size_t nearest_site(const double* x) const;

  bool operator==(const Lattice& o) const { return d_ == o.d_ && L_ == o.L_ && n_ == o.n_; }
  std::string key() const;

 private:
  int d_;
  double L_;
  int n_;
  std::size_t sites_;
};

/// In-place complex FFT on a lattice array (row-major, axis 0 slowest).
/// forward: sum_x f(x) e^{-ikx}; inverse: sum_k F(k) e^{+ikx} (unnormalized).
void fft_forward(const Lattice& lat, cplx* data);
void fft_inverse(const Lattice& lat, cplx* data);

/// Lattice array of real multiplets, site-major: v[site * comps + c].
struct LatticeField {
  Lattice lat;
  int comps = 1;
  std::vector<double> v;

  LatticeField(const Lattice& l, int c) : lat(l), comps(c), v(l.sites() * c, 0.0) {}
  double& at(std::size_t site, int c) { return v[site * comps + c]; }
  double at(std::size_t site, int c) const { return v[site * comps + c]; }
};

/// Binary snapshot: magic "CSPG", u32 version=1, u32 d, u32 n, u32 N, f64 L,
/// then row-major little-endian f64 values (per site: N values for fields,
/// N*N for kernels).
void write_snapshot(const std::string& path, const Lattice& lat, int N,
                    const std::vector<double>& values);
struct Snapshot {
  int d = 0, n = 0, N = 0;
  double L = 0.0;
  std::vector<double> values;
};
Snapshot read_snapshot(const std::string& path);

}  // namespace covspde
