#include "covspde/noise.hpp"

#include "covspde/parallel.hpp"
#include "covspde/quadrature.hpp"
#include "covspde/special.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace covspde {

namespace {

// Panelled Gauss-Legendre over the radial law of radial_exponential.
template <class F>
double radial_expect(double ell, double rmax, double norm, double freq, F&& f) {
  const int panels = 4 + static_cast<int>(std::ceil(freq * rmax / 2.0));
  const auto& q = gauss_legendre(24);
  double s = 0.0;
  const double h = rmax / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = p * h;
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const double r = a + 0.5 * h * (q.x[i] + 1.0);
      s += 0.5 * h * q.w[i] * std::exp(-r / ell) * f(r);
    }
  }
  return s / norm;
}

int delta_pairs(const std::vector<int>& i) {
  // Number of pairings of four indices that match (isotropic 4th-moment tensor).
  return (i[0] == i[1] && i[2] == i[3]) + (i[0] == i[2] && i[1] == i[3]) +
         (i[0] == i[3] && i[1] == i[2]);
}

}  // namespace

std::vector<double> random_angles(CounterRng& rng, int d) {
  std::vector<double> a(plane_count(d));
  for (auto& x : a) x = 2.0 * kPi * rng.uniform();
  return a;
}

LevyMeasure::LevyMeasure(Family family, const Representation& rep, Params params)
    : family_(family), p_(std::move(params)), dim_(rep.dim()) {
  if (!(p_.rho >= 0.0) || !std::isfinite(p_.rho)) fail("Levy total mass must be finite and >= 0");
  if (!(p_.scale >= 0.0)) fail("Levy scale must be >= 0");
  if (family_ == Family::RadialExponential) {
    if (!(p_.scale > 0.0)) fail("radial_exponential needs a positive length scale");
    if (p_.rmax <= 0.0) p_.rmax = 10.0 * p_.scale;
    rnorm_ = p_.scale * (1.0 - std::exp(-p_.rmax / p_.scale));
  }
  if (family_ == Family::TwoPoint) {
    if (p_.v.size() != dim_) fail("two_point direction has wrong dimension");
    const double nv = p_.v.norm();
    if (!(nv > 0.0)) fail("two_point direction must be nonzero");
    p_.v /= nv;
  }
  check_invariance(rep);
}

std::string LevyMeasure::family_name() const {
  switch (family_) {
    case Family::RadialGauss: return "radial_gauss";
    case Family::RadialExponential: return "radial_exponential";
    case Family::TwoPoint: return "two_point";
  }
  return "";
}

void LevyMeasure::check_invariance(const Representation& rep) const {
  CounterRng rng(0x1E7Eull, Stream::Test, 29);
  VecR y(dim_);
  for (int r = 0; r < 16; ++r) {
    const MatR T = compose_rotations(rep, random_angles(rng, rep.d()));
    for (int k = 0; k < 16; ++k) {
      for (int i = 0; i < dim_; ++i) y(i) = 1.5 * rng.normal();
      const VecR ty = T.transpose() * y;
      const cplx a = cumulant(y.data()), b = cumulant(ty.data());
      if (std::abs(a - b) > 1e-8 * std::max(1.0, std::abs(a)))
        fail("Lévy measure is not τ-invariant for the given representation");
    }
  }
}

double LevyMeasure::radial_moment(int k) const {
  switch (family_) {
    case Family::RadialGauss: {
      // alpha ~ N(0, s^2/N I): E r^2 = s^2, E r^4 = s^4 (N+2)/N.
      const double s2 = p_.scale * p_.scale;
      if (k == 0) return 1.0;
      if (k == 2) return s2;
      if (k == 4) return s2 * s2 * (dim_ + 2.0) / dim_;
      break;
    }
    case Family::RadialExponential:
      return radial_expect(p_.scale, p_.rmax, rnorm_, 0.0, [k](double r) { return std::pow(r, k); });
    case Family::TwoPoint:
      return std::pow(p_.scale, k);
  }
  fail("unsupported radial moment order");
}

void LevyMeasure::sample_mark(CounterRng& rng, double* out) const {
  switch (family_) {
    case Family::RadialGauss: {
      const double sd = p_.scale / std::sqrt(static_cast<double>(dim_));
      for (int i = 0; i < dim_; ++i) out[i] = sd * rng.normal();
      return;
    }
    case Family::RadialExponential: {
      const double u = rng.uniform();
      const double r = -p_.scale * std::log1p(-u * (1.0 - std::exp(-p_.rmax / p_.scale)));
      double nrm = 0.0;
      for (int i = 0; i < dim_; ++i) {
        out[i] = rng.normal();
        nrm += out[i] * out[i];
      }
      nrm = std::sqrt(nrm);
      for (int i = 0; i < dim_; ++i) out[i] *= r / nrm;
      return;
    }
    case Family::TwoPoint: {
      const double sgn = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (int i = 0; i < dim_; ++i) out[i] = sgn * p_.scale * p_.v(i);
      return;
    }
  }
}

cplx LevyMeasure::cumulant(const double* y) const {
  double yy = 0.0;
  for (int i = 0; i < dim_; ++i) yy += y[i] * y[i];
  switch (family_) {
    case Family::RadialGauss:
      return p_.rho * std::expm1(-p_.scale * p_.scale * yy / (2.0 * dim_));
    case Family::RadialExponential: {
      const double ny = std::sqrt(yy);
      if (ny == 0.0) return 0.0;
      const double e = radial_expect(p_.scale, p_.rmax, rnorm_, ny,
                                     [&](double r) { return sphere_mean_cos(dim_, r * ny) - 1.0; });
      return p_.rho * e;
    }
    case Family::TwoPoint: {
      double vy = 0.0;
      for (int i = 0; i < dim_; ++i) vy += p_.v(i) * y[i];
      return p_.rho * (std::cos(p_.scale * vy) - 1.0);
    }
  }
  return 0.0;
}

double LevyMeasure::cumulant_real_exponent(const double* y) const {
  double yy = 0.0;
  for (int i = 0; i < dim_; ++i) yy += y[i] * y[i];
  switch (family_) {
    case Family::RadialGauss:
      return p_.rho * std::expm1(p_.scale * p_.scale * yy / (2.0 * dim_));
    case Family::RadialExponential: {
      const double ny = std::sqrt(yy);
      return p_.rho * radial_expect(p_.scale, p_.rmax, rnorm_, 0.0,
                                    [&](double r) { return sphere_mean_exp(dim_, r * ny) - 1.0; });
    }
    case Family::TwoPoint: {
      double vy = 0.0;
      for (int i = 0; i < dim_; ++i) vy += p_.v(i) * y[i];
      return p_.rho * (std::cosh(p_.scale * vy) - 1.0);
    }
  }
  return 0.0;
}

double LevyMeasure::moment(const std::vector<int>& idx) const {
  const std::size_t k = idx.size();
  if (k > 4) fail("moment order above supported range");
  for (int i : idx)
    if (i < 0 || i >= dim_) fail("moment index out of range");
  if (k == 0) return p_.rho;
  if (k % 2 == 1) return 0.0;  // all families are symmetric
  if (family_ == Family::TwoPoint) {
    double v = p_.rho * std::pow(p_.scale, static_cast<double>(k));
    for (int i : idx) v *= p_.v(i);
    return v;
  }
  const double N = dim_;
  if (k == 2) return idx[0] == idx[1] ? p_.rho * radial_moment(2) / N : 0.0;
  return p_.rho * radial_moment(4) * delta_pairs(idx) / (N * (N + 2.0));
}

VecR LevyMeasure::mean() const { return VecR::Zero(dim_); }

MatR LevyMeasure::second_moment() const {
  MatR c(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) c(i, j) = moment({i, j});
  return c;
}

double LevyMeasure::contract2(const double* g) const {
  double gg = 0.0;
  for (int i = 0; i < dim_; ++i) gg += g[i] * g[i];
  if (family_ == Family::TwoPoint) {
    double vg = 0.0;
    for (int i = 0; i < dim_; ++i) vg += p_.v(i) * g[i];
    return p_.rho * p_.scale * p_.scale * vg * vg;
  }
  return p_.rho * radial_moment(2) * gg / dim_;
}

double LevyMeasure::contract4(const double* g) const {
  double gg = 0.0;
  for (int i = 0; i < dim_; ++i) gg += g[i] * g[i];
  if (family_ == Family::TwoPoint) {
    double vg = 0.0;
    for (int i = 0; i < dim_; ++i) vg += p_.v(i) * g[i];
    return p_.rho * std::pow(p_.scale * vg, 4);
  }
  const double N = dim_;
  return p_.rho * radial_moment(4) * 3.0 * gg * gg / (N * (N + 2.0));
}

LevyMeasure builtin_levy(const std::string& family, const Representation& rep,
                         const LevyMeasure::Params& params) {
  if (family == "radial_gauss") return LevyMeasure(LevyMeasure::Family::RadialGauss, rep, params);
  if (family == "radial_exponential")
    return LevyMeasure(LevyMeasure::Family::RadialExponential, rep, params);
  if (family == "two_point") return LevyMeasure(LevyMeasure::Family::TwoPoint, rep, params);
  fail("unknown Levy family '" + family + "'; supported: radial_gauss, radial_exponential, two_point");
}

NoiseSpec::NoiseSpec(Representation r, MatR cov, std::optional<LevyMeasure> l)
    : rep(std::move(r)), A(std::move(cov)), levy(std::move(l)) {
  const int N = rep.dim();
  if (A.rows() != N || A.cols() != N) fail("Gaussian covariance has wrong shape");
  if (max_abs(A - A.transpose()) > 1e-12) fail("Gaussian covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatR> es(A);
  if (es.eigenvalues().minCoeff() < -1e-12) fail("Gaussian covariance must be positive semidefinite");
  CounterRng rng(0xA11ull, Stream::Test, 31);
  for (int t = 0; t < 8; ++t) {
    const MatR T = compose_rotations(rep, random_angles(rng, rep.d()));
    if (max_abs(T * A - A * T) > 1e-10) fail("Gaussian covariance does not commute with the representation");
  }
  if (levy && levy->dim() != N) fail("Levy measure dimension does not match representation");
}

NoiseRealization sample_noise(const NoiseSpec& spec, const Lattice& lat, std::uint64_t seed,
                              double padding) {
  if (!(padding >= 0.0)) fail("padding must be non-negative");
  NoiseRealization nr(lat);
  const int d = lat.d();
  nr.seed_ = seed;
  nr.N_ = spec.dim();
  nr.pad_ = padding;
  nr.lo_ = VecR::Constant(d, -padding);
  nr.side_ = lat.L() + 2.0 * padding;
  if (spec.has_gaussian()) {
    nr.has_gauss_ = true;
    Eigen::SelfAdjointEigenSolver<MatR> es(spec.A);
    nr.gauss_root_ = es.eigenvectors() *
                     es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                     es.eigenvectors().transpose();
  }
  if (spec.levy && spec.rho() > 0.0) {
    CounterRng cnt(seed, Stream::PoissonCount, 0);
    const std::uint64_t K = cnt.poisson(spec.rho() * std::pow(nr.side_, d));
    nr.pos_.resize(K * d);
    nr.marks_.resize(K * nr.N_);
    for (std::uint64_t j = 0; j < K; ++j) {
      CounterRng rng(seed, Stream::Atom, j);
      for (int k = 0; k < d; ++k) nr.pos_[j * d + k] = nr.lo_(k) + nr.side_ * rng.uniform();
      spec.levy->sample_mark(rng, nr.marks_.data() + j * nr.N_);
    }
  }
  return nr;
}

VecC NoiseRealization::gaussian_mode(std::size_t mode) const {
  VecC z = VecC::Zero(N_);
  if (!has_gauss_) return z;
  const std::size_t conj = lat_.conjugate(mode);
  const std::size_t canon = std::min(mode, conj);
  CounterRng rng(seed_, Stream::GaussMode, canon);
  const double var_scale = static_cast<double>(lat_.sites()) / lat_.cell_volume();
  VecC w(N_);
  if (conj == mode) {
    const double s = std::sqrt(var_scale);
    for (int i = 0; i < N_; ++i) w(i) = s * rng.normal();
  } else {
    const double s = std::sqrt(0.5 * var_scale);
    for (int i = 0; i < N_; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      w(i) = cplx(s * re, s * im);
    }
  }
  z = gauss_root_.cast<cplx>() * w;
  if (mode != canon) z = z.conjugate();
  return z;
}

LatticeField NoiseRealization::lattice_values(Deposit deposit) const {
  const std::size_t S = lat_.sites();
  const int d = lat_.d();
  LatticeField out(lat_, N_);
  const double inv_cell = 1.0 / lat_.cell_volume();
  const bool spectral_atoms = deposit == Deposit::Spectral && atoms() > 0;
  if (has_gauss_ || spectral_atoms) {
    std::vector<cplx> buf(S * N_, cplx(0.0));
    if (has_gauss_) {
      for_each_block(default_exec(), S, 2048, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t m = lo; m < hi; ++m) {
          const VecC z = gaussian_mode(m);
          for (int c = 0; c < N_; ++c) buf[c * S + m] = z(c);
        }
      });
    }
    if (spectral_atoms) {
      for_each_block(default_exec(), S, 2048, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t m = lo; m < hi; ++m) {
          const VecR p = lat_.momentum(m);
          const auto c = lat_.coords(m);
          for (std::size_t j = 0; j < atoms(); ++j) {
            cplx ph = 1.0;
            for (int k = 0; k < d; ++k) {
              const double arg = p(k) * position(j)[k];
              ph *= (c[k] == lat_.n() / 2) ? cplx(std::cos(arg), 0.0) : std::polar(1.0, -arg);
            }
            for (int q = 0; q < N_; ++q) buf[q * S + m] += inv_cell * mark(j)[q] * ph;
          }
        }
      });
    }
    for (int c = 0; c < N_; ++c) fft_inverse(lat_, buf.data() + c * S);
    const double norm = 1.0 / static_cast<double>(S);
    for (std::size_t s = 0; s < S; ++s)
      for (int c = 0; c < N_; ++c) out.at(s, c) = buf[c * S + s].real() * norm;
  }
  if (deposit == Deposit::NearestSite) {
    for (std::size_t j = 0; j < atoms(); ++j) {
      const std::size_t s = lat_.nearest_site(position(j));
      for (int c = 0; c < N_; ++c) out.at(s, c) += inv_cell * mark(j)[c];
    }
  }
  return out;
}

cplx charfunc_noise(const NoiseSpec& spec, const LatticeField& f) {
  const std::size_t S = f.lat.sites();
  const int N = f.comps;
  if (N != spec.dim()) fail("test function has wrong number of components");
  std::vector<double> gq(S, 0.0), pr(S, 0.0), pi(S, 0.0);
  for_each_block(default_exec(), S, 1024, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      const double* fs = f.v.data() + s * N;
      if (spec.has_gaussian()) {
        double q = 0.0;
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < N; ++j) q += fs[i] * spec.A(i, j) * fs[j];
        gq[s] = q;
      }
      if (spec.levy) {
        const cplx c = spec.levy->cumulant(fs);
        pr[s] = c.real();
        pi[s] = c.imag();
      }
    }
  });
  const double vol = f.lat.cell_volume();
  const double g = pairwise_sum(gq.data(), S) * vol;
  const cplx psi(pairwise_sum(pr.data(), S) * vol, pairwise_sum(pi.data(), S) * vol);
  return std::exp(-0.5 * g + psi);
}

}  // namespace covspde
