#include "covspde/green.hpp"

#include "covspde/rng.hpp"
#include "covspde/special.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

namespace covspde {

namespace {

constexpr int kMaxK = 16;
constexpr int kMaxMonos = 512;

// Taylor coefficients (order < len) of prod_i (w_i + delta)^(-r_i) in delta.
std::vector<double> inverse_product_series(const std::vector<double>& w, const std::vector<int>& r,
                                           int len) {
  std::vector<double> s(len, 0.0);
  s[0] = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::vector<double> f(len);
    double binom = 1.0;  // binom(-r, q) / w^q, accumulated
    for (int q = 0; q < len; ++q) {
      f[q] = binom * std::pow(w[i], -r[i]);
      binom *= -(r[i] + q) / ((q + 1.0) * w[i]);
    }
    std::vector<double> out(len, 0.0);
    for (int a = 0; a < len; ++a)
      for (int b = 0; a + b < len; ++b) out[a + b] += s[a] * f[b];
    s = std::move(out);
  }
  return s;
}

std::vector<PoleTerm> pole_terms(const std::vector<double>& mu, const std::vector<int>& mult,
                                 double c) {
  std::vector<PoleTerm> terms;
  if (mu.empty()) return {PoleTerm{0.0, 0.0, 1.0 / c}};  // polynomial symbol: local kernel
  for (std::size_t j = 0; j < mu.size(); ++j) {
    std::vector<double> w;
    std::vector<int> r;
    for (std::size_t i = 0; i < mu.size(); ++i)
      if (i != j) {
        w.push_back(mu[i] * mu[i] - mu[j] * mu[j]);
        r.push_back(mult[i]);
      }
    const std::vector<double> ser = inverse_product_series(w, r, mult[j]);
    for (int q = 0; q < mult[j]; ++q)
      terms.push_back({mu[j], static_cast<double>(mult[j] - q), ser[q] / c});
  }
  std::sort(terms.begin(), terms.end(), [](const PoleTerm& a, const PoleTerm& b) {
    return std::tie(a.mass, a.power) < std::tie(b.mass, b.power);
  });
  return terms;
}

double poly_scale(const Poly& p) {
  double s = 0.0;
  for (const auto& [m, c] : p.terms()) s = std::max(s, std::abs(c));
  return s;
}

}  // namespace

MatC PartialFractions::eval(const VecR& p) const {
  const MatC P = numerator.eval(p.data(), d);
  const double t = p.squaredNorm();
  cplx w = 0.0;
  for (const auto& term : terms) w += term.coeff * std::pow(t + term.mass * term.mass, -term.power);
  return w * P;
}

MatC PartialFractions::residue(std::size_t k, const VecR& p) const {
  return terms.at(k).coeff * numerator.eval(p.data(), d);
}

std::shared_ptr<const GreenFunction> GreenFunction::for_operator(const CovariantOperator& op) {
  MassSpectrum ms = mass_spectrum(op);
  if (!ms.admissible) fail("Green function undefined: non-admissible mass spectrum");
  if (!ms.strictly_positive) fail("zero mode at p=0");

  std::shared_ptr<GreenFunction> g(new GreenFunction());
  g->d_ = op.d();
  g->dim_ = op.dim();
  g->key_ = "op:" + op.key();
  g->op_ = op;
  g->rep_in_ = op.rep_in();
  g->rep_out_ = op.rep_out();
  g->spectrum_ = ms;

  const int N = op.dim();
  PolyMatrix A(N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      Poly e = Poly::constant(op.M()(i, j));
      for (int k = 0; k < op.d(); ++k)
        if (op.B()[k](i, j) != 0.0) e += Poly::variable(k, cplx(0.0, op.B()[k](i, j)));
      A(i, j) = e;
    }
  AdjugateDet ad = adjugate_and_det(A);
  double scale = 0.0;
  for (const auto& p : ad.adj.e) scale = std::max(scale, poly_scale(p));
  for (auto& p : ad.adj.e) p.prune(1e-13 * scale);
  ad.det.prune(1e-13 * poly_scale(ad.det));

  std::vector<double> mu;
  std::vector<int> mult;
  for (const auto& m : ms.masses) {
    const double v = m.real();
    if (!mu.empty() && std::fabs(v - mu.back()) <= 1e-7 * std::max(1.0, v))
      ++mult.back();
    else {
      mu.push_back(v);
      mult.push_back(1);
    }
  }
  const double c = ms.prefactor.real();

  // Symbolic determinant must reproduce c prod (t + mu^2)^r.
  CounterRng rng(0xDE7ull, Stream::Test, 3);
  for (int trial = 0; trial < 16; ++trial) {
    VecR p(op.d());
    for (int i = 0; i < op.d(); ++i) p(i) = 2.0 * rng.normal();
    const double t = p.squaredNorm();
    double model = c;
    for (std::size_t j = 0; j < mu.size(); ++j) model *= std::pow(t + mu[j] * mu[j], mult[j]);
    const cplx sym = ad.det.eval(p.data(), op.d());
    if (std::abs(sym - model) > 1e-8 * std::max(std::abs(model), 1e-300))
      fail("symbolic determinant disagrees with the fitted mass spectrum");
  }

  g->pf_.d = op.d();
  g->pf_.numerator = std::move(ad.adj);
  g->pf_.determinant = std::move(ad.det);
  g->pf_.terms = pole_terms(mu, mult, c);
  g->build_expansion();
  return g;
}

std::shared_ptr<const GreenFunction> GreenFunction::scalar_power(int d, double mass,
                                                                 double exponent) {
  if (!(mass > 0.0)) fail("zero mode at p=0");
  if (!(exponent > 0.0)) fail("scalar power exponent must be positive");
  std::shared_ptr<GreenFunction> g(new GreenFunction());
  g->d_ = d;
  g->dim_ = 1;
  char buf[96];
  std::snprintf(buf, sizeof buf, "power:d%d_m%.17g_s%.17g", d, mass, exponent);
  g->key_ = buf;
  g->power_ = exponent;
  g->power_mass_ = mass;
  g->rep_in_ = builtin_representation("trivial", d);
  g->rep_out_ = g->rep_in_;
  g->spectrum_.masses = {cplx(mass, 0.0)};
  g->spectrum_.prefactor = 1.0;
  g->spectrum_.n = 1;
  g->spectrum_.admissible = true;
  g->spectrum_.strictly_positive = true;
  g->pf_.d = d;
  g->pf_.numerator = PolyMatrix(1);
  g->pf_.numerator(0, 0) = Poly::constant(1.0);
  g->pf_.terms = {PoleTerm{mass, exponent, 1.0}};
  g->build_expansion();
  return g;
}

void GreenFunction::build_expansion() {
  const int N = dim_;
  // P(-i grad) applied to a radial function F(r) = sum_k T_k(x) F_k(r) with
  // F_k = ((1/r) d/dr)^k F, via d_j[Q F_k] = (d_j Q) F_k + x_j Q F_{k+1}.
  std::map<Monomial, std::vector<Poly>> expansions;
  auto expansion = [&](const Monomial& beta) -> const std::vector<Poly>& {
    auto it = expansions.find(beta);
    if (it != expansions.end()) return it->second;
    std::vector<Poly> e{Poly::constant(1.0)};
    for (int j = 0; j < d_; ++j)
      for (int rep = 0; rep < beta[j]; ++rep) {
        std::vector<Poly> next(e.size() + 1);
        for (std::size_t k = 0; k < e.size(); ++k) {
          next[k] += e[k].derivative(j);
          next[k + 1] += e[k].times_variable(j);
        }
        e = std::move(next);
      }
    return expansions.emplace(beta, std::move(e)).first->second;
  };

  std::map<std::tuple<int, int, Monomial>, cplx> acc;  // (entry, k, monomial)
  double scale = 0.0;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (const auto& [beta, cb] : pf_.numerator(a, b).terms()) {
        int order = 0;
        for (auto e : beta) order += e;
        cplx factor = cb;
        for (int q = 0; q < order; ++q) factor *= cplx(0.0, -1.0);
        const auto& e = expansion(beta);
        for (std::size_t k = 0; k < e.size(); ++k)
          for (const auto& [mono, cm] : e[k].terms()) {
            cplx& slot = acc[{a * N + b, static_cast<int>(k), mono}];
            slot += factor * cm;
            scale = std::max(scale, std::abs(factor * cm));
          }
      }

  std::map<Monomial, int> mono_index;
  terms_.clear();
  monos_.clear();
  kmax_ = 0;
  max_pow_ = 0;
  for (const auto& [key, v] : acc) {
    const auto& [entry, k, mono] = key;
    if (std::fabs(v.imag()) > 1e-9 * scale) fail("position-space kernel is not real");
    if (std::fabs(v.real()) <= 1e-14 * scale) continue;
    auto it = mono_index.find(mono);
    if (it == mono_index.end()) {
      it = mono_index.emplace(mono, static_cast<int>(monos_.size())).first;
      monos_.push_back(mono);
      for (auto e : mono) max_pow_ = std::max<int>(max_pow_, e);
    }
    terms_.push_back({entry, it->second, k, v.real()});
    kmax_ = std::max(kmax_, k);
  }
  if (kmax_ + 1 > kMaxK || static_cast<int>(monos_.size()) > kMaxMonos)
    fail("kernel expansion exceeds supported derivative order");

  radial_.clear();
  for (const auto& t : pf_.terms) {
    RadialGroup rg;
    rg.mu = t.mass;
    rg.nu = 0.5 * d_ - t.power;
    if (t.power == 0.0) continue;  // supported at the origin only
    const double base = t.coeff * matern_constant(d_, t.power) * std::pow(t.mass, rg.nu);
    double f = 1.0;
    for (int k = 0; k <= kmax_; ++k, f *= -t.mass) rg.kcoef.push_back(base * f);
    radial_.push_back(std::move(rg));
  }
}

MatC GreenFunction::full_symbol(const VecR& p) const {
  if (op_) return covspde::full_symbol(*op_, p);
  MatC s(1, 1);
  s(0, 0) = std::pow(power_mass_ * power_mass_ + p.squaredNorm(), power_);
  return s;
}

MatC GreenFunction::momentum(const VecR& p) const {
  if (op_) return covspde::full_symbol(*op_, p).partialPivLu().inverse();
  MatC s(1, 1);
  s(0, 0) = std::pow(power_mass_ * power_mass_ + p.squaredNorm(), -power_);
  return s;
}

MatC GreenFunction::lattice_symbol(const Lattice& lat, std::size_t mode) const {
  VecR p = lat.momentum(mode);
  const int nq = lat.nyquist_count(mode);
  if (nq == 0) return full_symbol(p);
  const auto c = lat.coords(mode);
  std::vector<int> axes;
  for (int k = 0; k < lat.d(); ++k)
    if (c[k] == lat.n() / 2) axes.push_back(k);
  MatC acc = MatC::Zero(dim_, dim_);
  for (int mask = 0; mask < (1 << nq); ++mask) {
    VecR q = p;
    for (int b = 0; b < nq; ++b)
      if (mask & (1 << b)) q(axes[b]) = -q(axes[b]);
    acc += full_symbol(q);
  }
  return acc / static_cast<double>(1 << nq);
}

MatR GreenFunction::point(const VecR& x) const {
  if (x.size() != d_) fail("point dimension mismatch");
  MatR out(dim_, dim_);
  std::vector<double> buf(static_cast<std::size_t>(dim_) * dim_);
  point_into(x.data(), buf.data());
  for (int a = 0; a < dim_; ++a)
    for (int b = 0; b < dim_; ++b) out(a, b) = buf[a * dim_ + b];
  return out;
}

void GreenFunction::point_into(const double* x, double* out) const {
  double r2 = 0.0;
  for (int j = 0; j < d_; ++j) r2 += x[j] * x[j];
  if (r2 == 0.0) fail("kernel singular at origin");
  const double r = std::sqrt(r2);

  std::array<double, kMaxK> R{};
  std::array<double, kMaxK> K{};
  for (const auto& g : radial_) {
    bessel_k_seq(g.nu, g.mu * r, kmax_ + 1, K.data());
    double rp = std::pow(r, -g.nu);
    for (int k = 0; k <= kmax_; ++k, rp /= r) R[k] += g.kcoef[k] * rp * K[k];
  }
  assemble_into(x, R.data(), out);
}

void GreenFunction::assemble_into(const double* x, const double* R, double* out) const {
  std::array<std::array<double, 16>, kMaxDim> pw{};
  for (int j = 0; j < d_; ++j) {
    pw[j][0] = 1.0;
    for (int e = 1; e <= max_pow_; ++e) pw[j][e] = pw[j][e - 1] * x[j];
  }
  std::array<double, kMaxMonos> mv;
  for (std::size_t m = 0; m < monos_.size(); ++m) {
    double v = 1.0;
    for (int j = 0; j < d_; ++j) v *= pw[j][monos_[m][j]];
    mv[m] = v;
  }
  const int nn = dim_ * dim_;
  for (int e = 0; e < nn; ++e) out[e] = 0.0;
  for (const auto& t : terms_) out[t.entry] += t.c * mv[t.mono] * R[t.k];
}

std::shared_ptr<const GreenFunction> green_of(const CovariantOperator& op) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const GreenFunction>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(op.key());
    if (it != cache.end()) return it->second;
  }
  auto g = GreenFunction::for_operator(op);
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(op.key(), g).first->second;
}

MatC momentum_green(const CovariantOperator& op, const VecR& p) { return green_of(op)->momentum(p); }

PartialFractions partial_fractions(const CovariantOperator& op) {
  return green_of(op)->partial_fractions();
}

MatR point_kernel(const CovariantOperator& op, const VecR& x) { return green_of(op)->point(x); }

MatR LatticeKernel::at(std::size_t site) const {
  MatR m(N, N);
  const double* v = values.data() + site * N * N;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) m(a, b) = v[a * N + b];
  return m;
}

namespace {

std::mutex& kernel_mutex() {
  static std::mutex mu;
  return mu;
}
std::map<std::string, std::shared_ptr<const LatticeKernel>>& kernel_cache() {
  static std::map<std::string, std::shared_ptr<const LatticeKernel>> cache;
  return cache;
}

constexpr std::size_t kModeBlock = 1024;

}  // namespace

std::shared_ptr<const LatticeKernel> lattice_kernel(const GreenFunction& g, const Lattice& lat,
                                                    bool allow_small_box, Exec ex) {
  if (lat.d() != g.d()) fail("lattice dimension does not match operator");
  if (!allow_small_box && !g.spectrum().masses.empty() && g.mass_gap() * lat.L() < 5.0)
    fail("box too small for mass gap: wrap-around exceeds tolerance");
  const std::string key = g.key() + "@" + lat.key();
  {
    std::lock_guard<std::mutex> lock(kernel_mutex());
    auto it = kernel_cache().find(key);
    if (it != kernel_cache().end()) return it->second;
  }
  const int N = g.dim();
  const std::size_t S = lat.sites();
  auto k = std::make_shared<LatticeKernel>(LatticeKernel{lat, N, std::vector<double>(S * N * N)});
  const double norm = 1.0 / std::pow(lat.L(), lat.d());
  std::vector<cplx> col(S * N);
  for (int b = 0; b < N; ++b) {
    for_each_block(ex, S, kModeBlock, [&](std::size_t lo, std::size_t hi) {
      VecC e = VecC::Zero(N);
      e(b) = 1.0;
      for (std::size_t m = lo; m < hi; ++m) {
        const VecC x = g.lattice_symbol(lat, m).partialPivLu().solve(e);
        for (int a = 0; a < N; ++a) col[a * S + m] = x(a);
      }
    });
    for (int a = 0; a < N; ++a) fft_inverse(lat, col.data() + a * S);
    for (std::size_t s = 0; s < S; ++s)
      for (int a = 0; a < N; ++a) k->values[s * N * N + a * N + b] = col[a * S + s].real() * norm;
  }
  std::lock_guard<std::mutex> lock(kernel_mutex());
  return kernel_cache().emplace(key, k).first->second;
}

std::shared_ptr<const LatticeKernel> lattice_kernel(const CovariantOperator& op,
                                                    const Lattice& lat, bool allow_small_box) {
  return lattice_kernel(*green_of(op), lat, allow_small_box);
}

std::shared_ptr<const LatticeKernel> fractional_kernel(double lambda, const Lattice& lat,
                                                       bool allow_small_box) {
  if (!(lambda > 0.0 && lambda <= 0.5)) fail("fractional exponent must lie in (0, 1/2]");
  auto g = GreenFunction::scalar_power(lat.d(), 1.0, lambda);
  return lattice_kernel(*g, lat, allow_small_box);
}

void clear_kernel_cache() {
  std::lock_guard<std::mutex> lock(kernel_mutex());
  kernel_cache().clear();
}

double lattice_kernel_residual(const GreenFunction& g, const LatticeKernel& k, Exec ex) {
  const Lattice& lat = k.lat;
  const int N = k.N;
  const std::size_t S = lat.sites();
  const double inv_cell = 1.0 / lat.cell_volume();
  std::vector<cplx> col(S * N), out(S * N);
  double worst = 0.0;
  for (int b = 0; b < N; ++b) {
    for (std::size_t s = 0; s < S; ++s)
      for (int a = 0; a < N; ++a) col[a * S + s] = k.values[s * N * N + a * N + b];
    for (int a = 0; a < N; ++a) fft_forward(lat, col.data() + a * S);
    for_each_block(ex, S, kModeBlock, [&](std::size_t lo, std::size_t hi) {
      VecC v(N);
      for (std::size_t m = lo; m < hi; ++m) {
        for (int a = 0; a < N; ++a) v(a) = col[a * S + m];
        const VecC w = g.lattice_symbol(lat, m) * v;
        for (int a = 0; a < N; ++a) out[a * S + m] = w(a);
      }
    });
    for (int a = 0; a < N; ++a) fft_inverse(lat, out.data() + a * S);
    const double scale = 1.0 / static_cast<double>(S);
    for (std::size_t s = 0; s < S; ++s)
      for (int a = 0; a < N; ++a) {
        const double target = (s == 0 && a == b) ? inv_cell : 0.0;
        worst = std::max(worst, std::abs(out[a * S + s] * scale - target) / inv_cell);
      }
  }
  return worst;
}

std::vector<VecR> shell_directions(int d, int count) {
  std::vector<VecR> dirs;
  if (d == 2) {
    for (int i = 0; i < count; ++i) {
      const double th = 2.0 * kPi * (i + 0.5) / count;
      VecR v(2);
      v << std::cos(th), std::sin(th);
      dirs.push_back(v);
    }
  } else if (d == 3) {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / count;
      const double rr = std::sqrt(1.0 - z * z);
      VecR v(3);
      v << rr * std::cos(golden * i), rr * std::sin(golden * i), z;
      dirs.push_back(v);
    }
  } else {
    for (int i = 0; i < count; ++i) {
      CounterRng rng(0xD1Bull, Stream::Probe, static_cast<std::uint64_t>(i));
      VecR v(d);
      for (int j = 0; j < d; ++j) v(j) = rng.normal();
      dirs.push_back(v / v.norm());
    }
  }
  return dirs;
}

DecayProfile decay_profile(const GreenFunction& g, const std::vector<double>& radii) {
  DecayProfile prof;
  prof.mass_gap = g.spectrum().masses.empty() ? std::numeric_limits<double>::infinity() : g.mass_gap();
  const auto dirs = shell_directions(g.d(), 256);
  for (double r : radii) {
    if (!(r > 0.0)) fail("decay radii must be positive");
    double mx = 0.0;
    for (const auto& u : dirs) mx = std::max(mx, max_abs(g.point(u * r)));
    prof.radii.push_back(r);
    prof.shell_max.push_back(mx);
  }
  const std::size_t n = prof.radii.size();
  if (n >= 2) {
    const int cols = n >= 3 ? 3 : 2;
    MatR A(n, cols);
    VecR y(n);
    for (std::size_t i = 0; i < n; ++i) {
      A(i, 0) = 1.0;
      A(i, 1) = -prof.radii[i];
      if (cols == 3) A(i, 2) = -std::log(prof.radii[i]);
      y(i) = std::log(std::max(prof.shell_max[i], 1e-300));
    }
    const VecR c = A.colPivHouseholderQr().solve(y);
    prof.rate = c(1);
    prof.pass = *prof.rate >= 0.8 * prof.mass_gap;
  }
  return prof;
}

DecayProfile decay_profile(const CovariantOperator& op, const std::vector<double>& radii) {
  return decay_profile(*green_of(op), radii);
}

}  // namespace covspde
