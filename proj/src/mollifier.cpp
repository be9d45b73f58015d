#include "covspde/cosurface.hpp"

#include "covspde/quadrature.hpp"
#include "covspde/special.hpp"

#include <cmath>
#include <mutex>

namespace covspde {

namespace {

constexpr int kMaxShift = 20;
constexpr int kChebNodes = 48;

// g(u) = exp(-1/(1-u)) has g^(k)(u) = g(u) P_k(w), w = 1/(1-u), with
// P_{k+1}(w) = w^2 (P_k'(w) - P_k(w)).
const std::vector<std::vector<double>>& bump_polys() {
  static const std::vector<std::vector<double>> polys = [] {
    std::vector<std::vector<double>> p{{1.0}};
    for (int k = 0; k < kMaxShift; ++k) {
      const auto& q = p.back();
      std::vector<double> next(q.size() + 2, 0.0);
      for (std::size_t i = 0; i < q.size(); ++i) {
        next[i + 2] -= q[i];
        if (i > 0) next[i + 1] += i * q[i];
      }
      p.push_back(std::move(next));
    }
    return p;
  }();
  return polys;
}

double bump_derivative(double u, int k) {
  if (u >= 1.0) return 0.0;
  const double w = 1.0 / (1.0 - u);
  const auto& p = bump_polys()[k];
  double s = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) s = s * w + p[i];
  return std::exp(-w) * s;
}

// int_a^b f over `panels` equal Gauss-Legendre panels.
template <class F>
double integrate(double a, double b, int panels, F&& f) {
  if (b <= a) return 0.0;
  const auto& q = gauss_legendre(32);
  const double h = (b - a) / panels;
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    for (std::size_t i = 0; i < q.x.size(); ++i) s += 0.5 * h * q.w[i] * f(lo + 0.5 * h * (q.x[i] + 1.0));
  }
  return s;
}

// Matern radial profile in dimension D: F^-1[(|p|^2+mu^2)^-s](r).
double matern(int D, double s, double mu, double r) {
  const double nu = 0.5 * D - s;
  return matern_constant(D, s) * std::pow(mu, nu) * std::pow(r, -nu) * bessel_k(nu, mu * r);
}

}  // namespace

Mollifier::Mollifier(int d, double eps) : d_(d), eps_(eps) {
  if (!(eps > 0.0)) fail("mollifier scale must be positive");
  if (d < 1 || d > kMaxDim) fail("unsupported dimension");
  const double m = sphere_area(d) * integrate(0.0, 1.0, 4, [&](double t) {
                     return bump_derivative(t * t, 0) * std::pow(t, d - 1);
                   });
  norm_ = 1.0 / m;
}

double Mollifier::radial(double r, int shift) const {
  if (shift < 0 || shift > kMaxShift) fail("mollifier shift out of range");
  const double u = (r / eps_) * (r / eps_);
  if (u >= 1.0) return 0.0;
  return norm_ * std::pow(eps_, -d_) * std::pow(-1.0 / (kPi * eps_ * eps_), shift) * bump_derivative(u, shift);
}

double Mollifier::value(const double* x) const {
  double r2 = 0.0;
  for (int i = 0; i < d_; ++i) r2 += x[i] * x[i];
  return radial(std::sqrt(r2));
}

double Mollifier::multiplier(double mu) const {
  return sphere_area(d_) * integrate(0.0, eps_, 4, [&](double r) {
           return radial(r) * std::pow(r, d_ - 1) * sphere_mean_exp(d_, mu * r);
         });
}

double Mollifier::multiplier_dmu(double mu) const {
  return sphere_area(d_) * integrate(0.0, eps_, 4, [&](double r) {
           return radial(r) * std::pow(r, d_) * sphere_mean_exp_dz(d_, mu * r);
         });
}

double Mollifier::fourier(double k) const {
  return sphere_area(d_) * integrate(0.0, eps_, 8, [&](double r) {
           return radial(r) * std::pow(r, d_ - 1) * sphere_mean_cos(d_, k * r);
         });
}

double Mollifier::mass() const { return multiplier(0.0); }

namespace {

// (eta_D * F_s)(r) for r < eps in dimension D = d + 2 shift, using the
// spherical-mean identity for Yukawa kernels: the mean of F(|x - y|) over
// |y| = rho is F(max(r, rho)) Phi(mu min(r, rho)). Double poles follow from
// F_2 = -(1/(2 mu)) d/dmu F_1.
double inside_value(const Mollifier& m, int shift, double mu, int power, double r) {
  const int D = m.d() + 2 * shift;
  const double eps = m.eps();
  const double area = sphere_area(D);
  auto eta = [&](double rho) { return m.radial(rho, shift); };
  auto phi = [&](double z) { return sphere_mean_exp(D, z); };
  auto dphi = [&](double z) { return sphere_mean_exp_dz(D, z); };
  auto F1 = [&](double rho) { return matern(D, 1.0, mu, rho); };
  auto F2 = [&](double rho) { return matern(D, 2.0, mu, rho); };
  // The shifted bumps oscillate more with every shift.
  const int pa = 2 + 2 * shift, pb = 4 + 4 * shift;
  const double A = integrate(0.0, r, pa, [&](double p) { return eta(p) * phi(mu * p) * std::pow(p, D - 1); });
  const double B1 = integrate(r, eps, pb, [&](double p) { return eta(p) * F1(p) * std::pow(p, D - 1); });
  if (power == 1) return area * (F1(r) * A + phi(mu * r) * B1);
  const double Amu = integrate(0.0, r, pa, [&](double p) { return eta(p) * dphi(mu * p) * std::pow(p, D); });
  const double B2 = integrate(r, eps, pb, [&](double p) { return eta(p) * F2(p) * std::pow(p, D - 1); });
  return area * (F2(r) * A - F1(r) * Amu / (2.0 * mu) - r * dphi(mu * r) * B1 / (2.0 * mu) + phi(mu * r) * B2);
}

std::vector<double> chebyshev_fit(const std::vector<double>& vals) {
  const int n = static_cast<int>(vals.size());
  std::vector<double> c(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += vals[i] * std::cos(kPi * j * (i + 0.5) / n);
    c[j] = (j == 0 ? 1.0 : 2.0) * s / n;
  }
  return c;
}

double chebyshev_eval(const std::vector<double>& c, double t) {
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t j = c.size(); j-- > 1;) {
    const double b0 = 2.0 * t * b1 - b2 + c[j];
    b2 = b1;
    b1 = b0;
  }
  return t * b1 - b2 + c[0];
}

}  // namespace

MollifiedKernel::MollifiedKernel(std::shared_ptr<const GreenFunction> g, std::vector<double> eps)
    : g_(std::move(g)), eps_(std::move(eps)) {
  if (eps_.empty()) fail("mollified kernel needs at least one scale");
  kmax_ = g_->radial_order();
  if (kmax_ > kMaxShift) fail("kernel expansion exceeds supported derivative order");
  for (const auto& t : g_->partial_fractions().terms) {
    if (t.power == 0.0 || t.coeff == 0.0) continue;
    if (t.power != 1.0 && t.power != 2.0) fail("mollified kernel supports simple and double poles only");
    groups_.push_back({t.mass, static_cast<int>(t.power), t.coeff});
  }
  const int d = g_->d();
  c_.assign(eps_.size(), std::vector<double>(groups_.size(), 1.0));
  dc_.assign(eps_.size(), std::vector<double>(groups_.size(), 0.0));
  table_.resize(eps_.size());
  for (std::size_t l = 0; l < eps_.size(); ++l) {
    if (eps_[l] < 0.0) fail("mollifier scale must be non-negative");
    eps_max_ = std::max(eps_max_, eps_[l]);
    if (eps_[l] == 0.0) continue;
    const Mollifier m(d, eps_[l]);
    table_[l].resize(groups_.size());
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      const auto& grp = groups_[gi];
      c_[l][gi] = m.multiplier(grp.mu);
      dc_[l][gi] = m.multiplier_dmu(grp.mu);
      table_[l][gi].resize(kmax_ + 1);
      for (int k = 0; k <= kmax_; ++k) {
        std::vector<double> vals(kChebNodes);
        for (int i = 0; i < kChebNodes; ++i) {
          const double t = std::cos(kPi * (i + 0.5) / kChebNodes);
          const double r = eps_[l] * std::sqrt(0.5 * (t + 1.0));
          vals[i] = inside_value(m, k, grp.mu, grp.power, r);
        }
        table_[l][gi][k] = chebyshev_fit(vals);
      }
    }
  }
  // Radial bases K_{g,s} (and K_{g,1} for double poles) with the constants
  // coeff (-2 pi)^k C_{d+2k,s} mu^nu folded in.
  std::vector<std::array<int, 2>> owner;  // (group, which)
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const auto& grp = groups_[gi];
    for (int which = 0; which < (grp.power == 2 ? 2 : 1); ++which) {
      const double s = which == 0 ? grp.power : 1.0;
      Basis b;
      b.mu = grp.mu;
      b.nu0 = 0.5 * d - s;
      double f = grp.coeff;
      for (int k = 0; k <= kmax_; ++k, f *= -2.0 * kPi)
        b.scale.push_back(f * matern_constant(d + 2 * k, s) * std::pow(grp.mu, b.nu0 + k));
      bases_.push_back(std::move(b));
      owner.push_back({static_cast<int>(gi), which});
    }
  }
  weight_.assign(eps_.size(), std::vector<double>(bases_.size(), 0.0));
  for (std::size_t l = 0; l < eps_.size(); ++l)
    for (std::size_t bi = 0; bi < bases_.size(); ++bi) {
      const auto [gi, which] = owner[bi];
      weight_[l][bi] = which == 0 ? c_[l][gi] : -dc_[l][gi] / (2.0 * groups_[gi].mu);
    }
}

void MollifiedKernel::radial_inside(double r, std::size_t level, double* R) const {
  const double t = 2.0 * (r / eps_[level]) * (r / eps_[level]) - 1.0;
  for (int k = 0; k <= kmax_; ++k) R[k] = 0.0;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    double f = groups_[gi].coeff;
    for (int k = 0; k <= kmax_; ++k, f *= -2.0 * kPi) R[k] += f * chebyshev_eval(table_[level][gi][k], t);
  }
}

void MollifiedKernel::eval(const double* x, double* out) const {
  const int d = g_->d(), N = dim(), NN = N * N;
  double r2 = 0.0;
  for (int i = 0; i < d; ++i) r2 += x[i] * x[i];
  const double r = std::sqrt(r2);
  const int K1 = kmax_ + 1;
  std::array<double, 24> R{};

  std::size_t n_outside = 0;
  for (double e : eps_)
    if (e == 0.0 || r >= e) ++n_outside;
  if (n_outside > 0 && r == 0.0) fail("kernel singular at origin");

  // Outside the ball every level is a combination of per-group radial
  // bases: G_eps = sum_g c_g K_{g,s} - [s = 2] c'_g / (2 mu) K_{g,1}.
  thread_local std::vector<double> basis, combined;
  const std::size_t nb = bases_.size();
  if (n_outside > 0) {
    basis.assign(nb * K1, 0.0);
    std::array<double, 24> K{};
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const Basis& b = bases_[bi];
      bessel_k_seq(b.nu0, b.mu * r, K1, K.data());
      double rp = std::pow(r, -b.nu0);
      for (int k = 0; k < K1; ++k, rp /= r) basis[bi * K1 + k] = b.scale[k] * rp * K[k];
    }
  }
  // Assembling is linear in the radial values, so combine radials first
  // unless the bases are fewer than the outside levels.
  const bool per_basis = n_outside > nb;
  if (per_basis) {
    combined.assign(nb * NN, 0.0);
    for (std::size_t bi = 0; bi < nb; ++bi) g_->assemble_into(x, basis.data() + bi * K1, combined.data() + bi * NN);
  }
  for (std::size_t l = 0; l < eps_.size(); ++l) {
    double* o = out + l * NN;
    if (eps_[l] == 0.0 || r >= eps_[l]) {
      if (per_basis) {
        for (int e = 0; e < NN; ++e) o[e] = 0.0;
        for (std::size_t bi = 0; bi < nb; ++bi) {
          const double w = weight_[l][bi];
          for (int e = 0; e < NN; ++e) o[e] += w * combined[bi * NN + e];
        }
      } else {
        for (int k = 0; k < K1; ++k) R[k] = 0.0;
        for (std::size_t bi = 0; bi < nb; ++bi) {
          const double w = weight_[l][bi];
          for (int k = 0; k < K1; ++k) R[k] += w * basis[bi * K1 + k];
        }
        g_->assemble_into(x, R.data(), o);
      }
    } else {
      radial_inside(r, l, R.data());
      g_->assemble_into(x, R.data(), o);
    }
  }
}

}  // namespace covspde
