#include "covspde/lattice.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <tuple>

namespace covspde {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes little-endian");

Lattice::Lattice(int d, double L, int n) : d_(d), L_(L), n_(n) {
  if (d < 1 || d > kMaxDim) fail("lattice dimension must be in [1, 4]");
  if (!(L > 0.0) || !std::isfinite(L)) fail("lattice side L must be positive");
  if (n < 8 || (n & (n - 1)) != 0) fail("lattice n must be a power of two >= 8");
  sites_ = 1;
  for (int i = 0; i < d; ++i) sites_ *= static_cast<std::size_t>(n);
}

double Lattice::cell_volume() const { return std::pow(a(), d_); }

std::array<int, kMaxDim> Lattice::coords(std::size_t idx) const {
  std::array<int, kMaxDim> c{};
  for (int k = d_ - 1; k >= 0; --k) {
    c[k] = static_cast<int>(idx % n_);
    idx /= n_;
  }
  return c;
}

std::size_t Lattice::index(const std::array<int, kMaxDim>& c) const {
  std::size_t idx = 0;
  for (int k = 0; k < d_; ++k) {
    int v = c[k] % n_;
    if (v < 0) v += n_;
    idx = idx * n_ + static_cast<std::size_t>(v);
  }
  return idx;
}

VecR Lattice::position(std::size_t idx) const {
  const auto c = coords(idx);
  VecR x(d_);
  for (int k = 0; k < d_; ++k) x(k) = a() * c[k];
  return x;
}

VecR Lattice::displacement(std::size_t idx) const {
  const auto c = coords(idx);
  VecR x(d_);
  for (int k = 0; k < d_; ++k) x(k) = a() * signed_coord(c[k]);
  return x;
}

VecR Lattice::momentum(std::size_t idx) const {
  const auto c = coords(idx);
  VecR p(d_);
  for (int k = 0; k < d_; ++k) p(k) = 2.0 * kPi / L_ * signed_coord(c[k]);
  return p;
}

std::size_t Lattice::conjugate(std::size_t idx) const {
  auto c = coords(idx);
  for (int k = 0; k < d_; ++k) c[k] = -c[k];
  return index(c);
}

int Lattice::nyquist_count(std::size_t idx) const {
  const auto c = coords(idx);
  int cnt = 0;
  for (int k = 0; k < d_; ++k) cnt += (c[k] == n_ / 2);
  return cnt;
}

std::size_t Lattice::nearest_site(const double* x) const {
  std::array<int, kMaxDim> c{};
  for (int k = 0; k < d_; ++k) c[k] = static_cast<int>(std::floor(x[k] / a() + 0.5));
  return index(c);
}

std::string Lattice::key() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "d%d_L%.17g_n%d", d_, L_, n_);
  return buf;
}

namespace {

struct PlanPair {
  fftw_plan fwd;
  fftw_plan inv;
};

const PlanPair& plans_for(int d, int n) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, PlanPair> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({d, n});
  if (it != cache.end()) return it->second;
  int dims[kMaxDim];
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) {
    dims[k] = n;
    total *= n;
  }
  fftw_complex* buf = fftw_alloc_complex(total);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanPair p{fftw_plan_dft(d, dims, buf, buf, FFTW_FORWARD, flags),
             fftw_plan_dft(d, dims, buf, buf, FFTW_BACKWARD, flags)};
  fftw_free(buf);
  return cache.emplace(std::make_pair(d, n), p).first->second;
}

}  // namespace

void fft_forward(const Lattice& lat, cplx* data) {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plans_for(lat.d(), lat.n()).fwd, p, p);
}

void fft_inverse(const Lattice& lat, cplx* data) {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plans_for(lat.d(), lat.n()).inv, p, p);
}

void write_snapshot(const std::string& path, const Lattice& lat, int N,
                    const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open snapshot for writing: " + path);
  const std::uint32_t hdr[4] = {1u, static_cast<std::uint32_t>(lat.d()),
                                static_cast<std::uint32_t>(lat.n()), static_cast<std::uint32_t>(N)};
  const double L = lat.L();
  out.write("CSPG", 4);
  out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  out.write(reinterpret_cast<const char*>(&L), sizeof L);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) fail("snapshot write failed: " + path);
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open snapshot: " + path);
  char magic[4];
  std::uint32_t hdr[4];
  Snapshot s;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  in.read(reinterpret_cast<char*>(&s.L), sizeof s.L);
  if (!in || std::memcmp(magic, "CSPG", 4) != 0) fail("not a CSPG snapshot: " + path);
  if (hdr[0] != 1u) fail("unsupported snapshot version");
  s.d = static_cast<int>(hdr[1]);
  s.n = static_cast<int>(hdr[2]);
  s.N = static_cast<int>(hdr[3]);
  in.seekg(0, std::ios::end);
  const auto end = static_cast<std::size_t>(in.tellg());
  const std::size_t header = 4 + sizeof hdr + sizeof(double);
  s.values.resize((end - header) / sizeof(double));
  in.seekg(static_cast<std::streamoff>(header));
  in.read(reinterpret_cast<char*>(s.values.data()),
          static_cast<std::streamsize>(s.values.size() * sizeof(double)));
  return s;
}

}  // namespace covspde
