#include "covspde/testfn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

namespace covspde {

TrigField::TrigField(int d, double L, int comps) : d_(d), L_(L), comps_(comps) {
  if (d < 1 || d > kMaxDim) fail("unsupported dimension");
  if (!(L > 0.0)) fail("box side must be positive");
  if (comps < 1) fail("test function needs at least one component");
}

TrigField& TrigField::add(const std::array<int, kMaxDim>& k, const VecC& c) {
  if (c.size() != comps_) fail("test function coefficient has wrong size");
  Mode m;
  m.k = k;
  for (int i = d_; i < kMaxDim; ++i) m.k[i] = 0;
  m.c = c;
  modes_.push_back(std::move(m));
  return *this;
}

VecR TrigField::wavevector(const Mode& m) const {
  VecR kv(d_);
  for (int i = 0; i < d_; ++i) kv(i) = 2.0 * kPi * m.k[i] / L_;
  return kv;
}

int TrigField::bandwidth() const {
  int b = 0;
  for (const auto& m : modes_)
    for (int i = 0; i < d_; ++i) b = std::max(b, std::abs(m.k[i]));
  return b;
}

VecR TrigField::eval(const double* x) const {
  VecR v = VecR::Zero(comps_);
  for (const auto& m : modes_) {
    double ph = 0.0;
    for (int i = 0; i < d_; ++i) ph += 2.0 * kPi * m.k[i] * x[i] / L_;
    const cplx e = std::polar(1.0, ph);
    for (int c = 0; c < comps_; ++c) v(c) += (m.c(c) * e).real();
  }
  return v;
}

LatticeField TrigField::sample(const Lattice& lat) const {
  if (lat.d() != d_ || lat.L() != L_) fail("test function and lattice disagree on the box");
  if (bandwidth() >= lat.n() / 2) fail("test function not band-limited on the lattice");
  LatticeField f(lat, comps_);
  const int n = lat.n();
  if (modes_.size() > 64) {
    // Many modes: place the coefficients on the lattice spectrum and
    // transform once per component.
    std::vector<cplx> F(lat.sites());
    for (int q = 0; q < comps_; ++q) {
      std::fill(F.begin(), F.end(), cplx(0.0));
      for (const auto& m : modes_) {
        std::array<int, kMaxDim> neg{};
        for (int i = 0; i < d_; ++i) neg[i] = -m.k[i];
        const std::size_t a = lat.index(m.k), b = lat.index(neg);
        if (a == b) {
          F[a] += m.c(q).real();
        } else {
          F[a] += 0.5 * m.c(q);
          F[b] += 0.5 * std::conj(m.c(q));
        }
      }
      fft_inverse(lat, F.data());
      for (std::size_t s = 0; s < lat.sites(); ++s) f.at(s, q) = F[s].real();
    }
    return f;
  }
  for (const auto& m : modes_) {
    // Per-axis phase tables; the site phase is their product.
    std::vector<std::vector<cplx>> tab(d_, std::vector<cplx>(n));
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < n; ++j) tab[i][j] = std::polar(1.0, 2.0 * kPi * m.k[i] * j / n);
    for (std::size_t s = 0; s < lat.sites(); ++s) {
      const auto c = lat.coords(s);
      cplx e = 1.0;
      for (int i = 0; i < d_; ++i) e *= tab[i][c[i]];
      for (int q = 0; q < comps_; ++q) f.at(s, q) += (m.c(q) * e).real();
    }
  }
  return f;
}

TrigField TrigField::operator+(const TrigField& o) const {
  if (o.d_ != d_ || o.L_ != L_ || o.comps_ != comps_) fail("incompatible test functions");
  TrigField r = *this;
  for (const auto& m : o.modes_) r.modes_.push_back(m);
  return r;
}

TrigField TrigField::operator*(double s) const {
  TrigField r = *this;
  for (auto& m : r.modes_) m.c *= s;
  return r;
}

TrigField TrigField::apply(const GreenFunction& g) const {
  if (g.d() != d_ || g.dim() != comps_) fail("Green function does not match test function");
  TrigField r = *this;
  for (auto& m : r.modes_) m.c = g.momentum(wavevector(m)) * m.c;
  return r;
}

TrigField TrigField::rotated(const MatR& R, const MatR& tau) const {
  TrigField r = *this;
  for (auto& m : r.modes_) {
    // e^{i<k, R^{-1} x>} = e^{i<R k, x>} for orthogonal R.
    std::array<int, kMaxDim> k{};
    for (int i = 0; i < d_; ++i) {
      double s = 0.0;
      for (int j = 0; j < d_; ++j) s += R(i, j) * m.k[j];
      k[i] = static_cast<int>(std::lround(s));
      if (std::fabs(s - k[i]) > 1e-9) fail("rotation is not lattice compatible");
    }
    m.k = k;
    m.c = tau.cast<cplx>() * m.c;
  }
  return r;
}

TrigField TrigField::translated(const VecR& s) const {
  TrigField r = *this;
  for (auto& m : r.modes_) m.c *= std::polar(1.0, -wavevector(m).dot(s));
  return r;
}

double TrigField::inner(const TrigField& o) const {
  if (o.d_ != d_ || o.L_ != L_ || o.comps_ != comps_) fail("incompatible test functions");
  // Collect both sides by wave vector (k and -k merged through conjugation).
  using Key = std::array<int, kMaxDim>;
  auto collect = [&](const TrigField& f) {
    std::map<Key, VecC> out;
    for (const auto& m : f.modes_) {
      Key neg{};
      for (int i = 0; i < kMaxDim; ++i) neg[i] = -m.k[i];
      const bool zero = m.k == neg;
      // Re(C e^{ikx}) = (C e^{ikx} + conj(C) e^{-ikx}) / 2.
      auto add = [&](const Key& k, const VecC& c) {
        auto it = out.find(k);
        if (it == out.end()) out.emplace(k, c);
        else it->second += c;
      };
      if (zero) {
        add(m.k, m.c.real().cast<cplx>());
      } else {
        add(m.k, 0.5 * m.c);
        add(neg, 0.5 * m.c.conjugate());
      }
    }
    return out;
  };
  const auto a = collect(*this), b = collect(o);
  cplx s = 0.0;
  for (const auto& [k, ca] : a) {
    auto it = b.find(k);
    if (it != b.end()) s += ca.dot(it->second);  // conj(ca) . cb
  }
  return s.real() * std::pow(L_, d_);
}

TrigField TrigField::from_lattice(const LatticeField& f, double drop_below) {
  const Lattice& lat = f.lat;
  const int d = lat.d();
  TrigField out(d, lat.L(), f.comps);
  std::vector<std::vector<cplx>> spec(f.comps, std::vector<cplx>(lat.sites()));
  double peak = 0.0;
  for (int q = 0; q < f.comps; ++q) {
    for (std::size_t s = 0; s < lat.sites(); ++s) spec[q][s] = f.at(s, q);
    fft_forward(lat, spec[q].data());
    for (const auto& v : spec[q]) peak = std::max(peak, std::abs(v));
  }
  const double norm = 1.0 / static_cast<double>(lat.sites());
  for (std::size_t s = 0; s < lat.sites(); ++s) {
    if (lat.nyquist_count(s) > 0) continue;
    const std::size_t conj = lat.conjugate(s);
    if (conj < s) continue;
    VecC c(f.comps);
    double mag = 0.0;
    for (int q = 0; q < f.comps; ++q) {
      c(q) = (conj == s ? 1.0 : 2.0) * norm * spec[q][s];
      mag = std::max(mag, std::abs(spec[q][s]));
    }
    if (mag <= drop_below * peak || mag == 0.0) continue;
    const auto co = lat.coords(s);
    std::array<int, kMaxDim> k{};
    for (int i = 0; i < d; ++i) k[i] = lat.signed_coord(co[i]);
    out.add(k, c);
  }
  return out;
}

TrigField random_trig_field(CounterRng& rng, int d, double L, int comps, int count, int kmax) {
  TrigField f(d, L, comps);
  for (int m = 0; m < count; ++m) {
    std::array<int, kMaxDim> k{};
    for (int i = 0; i < d; ++i)
      k[i] = static_cast<int>(std::floor(rng.uniform() * (2 * kmax + 1))) - kmax;
    VecC c(comps);
    for (int q = 0; q < comps; ++q) c(q) = cplx(rng.normal(), rng.normal());
    f.add(k, c);
  }
  return f;
}

}  // namespace covspde
