#include "covspde/solve.hpp"

#include "covspde/quadrature.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace covspde {

namespace {

std::vector<cplx> component_spectra(const LatticeField& f) {
  const std::size_t S = f.lat.sites();
  std::vector<cplx> buf(S * f.comps);
  for (int c = 0; c < f.comps; ++c) {
    for (std::size_t s = 0; s < S; ++s) buf[c * S + s] = f.at(s, c);
    fft_forward(f.lat, buf.data() + c * S);
  }
  return buf;
}

std::size_t mode_index(const Lattice& lat, const std::array<int, kMaxDim>& k) {
  return lat.index(k);  // wraps negative components
}

void check_band(const Lattice& lat, const TrigField& f) {
  if (f.d() != lat.d() || f.L() != lat.L()) fail("test function and lattice disagree on the box");
  if (f.bandwidth() >= lat.n() / 2) fail("test function not band-limited on the lattice");
}

}  // namespace

const LatticeField& FieldRealization::lattice_values() const {
  if (!field_) fail("field has no lattice values (point backend)");
  return *field_;
}

FieldRealization solve_lattice(std::shared_ptr<const GreenFunction> g, const NoiseRealization& noise,
                               Deposit deposit, Exec ex) {
  const Lattice& lat = noise.lattice();
  const int N = g->dim();
  if (noise.dim() != N) fail("noise and operator multiplets differ");
  if (lat.d() != g->d()) fail("noise and operator dimensions differ");
  const std::size_t S = lat.sites();
  std::vector<cplx> buf = component_spectra(noise.lattice_values(deposit));
  for_each_block(ex, S, 512, [&](std::size_t lo, std::size_t hi) {
    VecC e(N);
    for (std::size_t m = lo; m < hi; ++m) {
      for (int c = 0; c < N; ++c) e(c) = buf[c * S + m];
      const MatC sh = g->lattice_symbol(lat, m).adjoint();
      const VecC p = sh.partialPivLu().solve(e);
      for (int c = 0; c < N; ++c) buf[c * S + m] = p(c);
    }
  });
  LatticeField phi(lat, N);
  const double norm = 1.0 / static_cast<double>(S);
  for (int c = 0; c < N; ++c) {
    fft_inverse(lat, buf.data() + c * S);
    for (std::size_t s = 0; s < S; ++s) phi.at(s, c) = buf[c * S + s].real() * norm;
  }
  FieldRealization f;
  f.backend_ = FieldRealization::Backend::Lattice;
  f.green_ = std::move(g);
  f.seed_ = noise.seed();
  f.field_ = std::move(phi);
  f.side_ = lat.L();
  return f;
}

FieldRealization solve_lattice(const CovariantOperator& op, const NoiseRealization& noise,
                               Deposit deposit) {
  return solve_lattice(green_of(op), noise, deposit);
}

FieldRealization solve_points(std::shared_ptr<const GreenFunction> g, const NoiseRealization& noise) {
  if (noise.has_gaussian()) fail("point backend requires pure Poisson noise");
  if (noise.dim() != g->dim()) fail("noise and operator multiplets differ");
  if (noise.lattice().d() != g->d()) fail("noise and operator dimensions differ");
  FieldRealization f;
  f.backend_ = FieldRealization::Backend::Point;
  f.seed_ = noise.seed();
  f.periodic_ = noise.periodic();
  f.side_ = noise.box_side();
  // A pole-free Green function is local: nothing reaches past the atom.
  f.cutoff_ = g->spectrum().masses.empty() ? 0.0 : 12.0 / g->mass_gap();
  const int d = g->d(), N = g->dim();
  f.pos_.assign(noise.position(0), noise.position(0) + noise.atoms() * d);
  f.marks_.assign(noise.mark(0), noise.mark(0) + noise.atoms() * N);
  f.green_ = std::move(g);
  return f;
}

FieldRealization solve_points(const CovariantOperator& op, const NoiseRealization& noise) {
  return solve_points(green_of(op), noise);
}

FieldRealization atom_field(std::shared_ptr<const GreenFunction> g, const std::vector<VecR>& positions,
                           const std::vector<VecR>& marks) {
  if (positions.size() != marks.size()) fail("one mark per atom required");
  const int d = g->d(), N = g->dim();
  FieldRealization f;
  f.backend_ = FieldRealization::Backend::Point;
  f.periodic_ = false;
  f.cutoff_ = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < positions.size(); ++j) {
    if (positions[j].size() != d) fail("atom position has the wrong dimension");
    if (marks[j].size() != N) fail("atom mark has the wrong size");
    f.pos_.insert(f.pos_.end(), positions[j].data(), positions[j].data() + d);
    f.marks_.insert(f.marks_.end(), marks[j].data(), marks[j].data() + N);
  }
  f.green_ = std::move(g);
  return f;
}

VecR FieldRealization::value(const double* x) const {
  if (backend_ != Backend::Point) fail("pointwise values need the point backend");
  const int d = green_->d(), N = dim();
  const double c2 = cutoff_ * cutoff_;
  VecR out = VecR::Zero(N);
  std::vector<double> G(static_cast<std::size_t>(N) * N);
  std::array<double, kMaxDim> dx{};
  auto add_term = [&](const double* alpha) {
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) r2 += dx[k] * dx[k];
    if (r2 > c2) return;
    if (r2 < 1e-24) fail("evaluation at atom location");
    green_->point_into(dx.data(), G.data());
    // phi_b += sum_a G_ab alpha_a
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) out(b) += G[a * N + b] * alpha[a];
  };
  const int reach = periodic_ ? static_cast<int>(std::ceil(cutoff_ / side_)) + 1 : 0;
  for (std::size_t j = 0; j < atoms(); ++j) {
    const double* xj = position(j);
    std::array<double, kMaxDim> base{};
    for (int k = 0; k < d; ++k) {
      base[k] = xj[k] - x[k];
      if (periodic_) base[k] -= side_ * std::round(base[k] / side_);
    }
    if (!periodic_) {
      dx = base;
      add_term(mark(j));
      continue;
    }
    std::array<int, kMaxDim> img{};
    for (int k = 0; k < d; ++k) img[k] = -reach;
    while (true) {
      for (int k = 0; k < d; ++k) dx[k] = base[k] + side_ * img[k];
      add_term(mark(j));
      int k = 0;
      while (k < d && ++img[k] > reach) img[k++] = -reach;
      if (k == d) break;
    }
  }
  return out;
}

double solve_residual(const FieldRealization& field, const NoiseRealization& noise, Deposit deposit) {
  const LatticeField& phi = field.lattice_values();
  const Lattice& lat = phi.lat;
  const std::size_t S = lat.sites();
  const int N = phi.comps;
  const auto eh = component_spectra(noise.lattice_values(deposit));
  const auto ph = component_spectra(phi);
  double res = 0.0, scale = 0.0;
  VecC p(N), e(N);
  for (std::size_t m = 0; m < S; ++m) {
    for (int c = 0; c < N; ++c) {
      p(c) = ph[c * S + m];
      e(c) = eh[c * S + m];
    }
    const VecC r = field.green().lattice_symbol(lat, m).adjoint() * p - e;
    res = std::max(res, max_abs(r));
    scale = std::max(scale, max_abs(e));
  }
  return scale > 0.0 ? res / scale : res;
}

double eval_pairing(const FieldRealization& field, const LatticeField& f) {
  const LatticeField& phi = field.lattice_values();
  if (!(f.lat == phi.lat) || f.comps != phi.comps) fail("test function does not match the field lattice");
  std::vector<double> prod(phi.v.size());
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = phi.v[i] * f.v[i];
  return pairwise_sum(prod.data(), prod.size()) * phi.lat.cell_volume();
}

double eval_pairing(const FieldRealization& field, const TrigField& f) {
  if (f.comps() != field.dim()) fail("test function has wrong number of components");
  if (field.backend() == FieldRealization::Backend::Lattice)
    return eval_pairing(field, f.sample(field.lattice_values().lat));
  if (!field.periodic() || f.L() != field.box_side())
    fail("test function support exceeds sampling box");
  const TrigField g = f.apply(field.green());
  std::vector<double> terms(field.atoms());
  const int N = field.dim();
  for (std::size_t j = 0; j < field.atoms(); ++j) {
    const VecR v = g.eval(field.position(j));
    double s = 0.0;
    for (int c = 0; c < N; ++c) s += field.mark(j)[c] * v(c);
    terms[j] = s;
  }
  return pairwise_sum(terms.data(), terms.size());
}

double noise_pairing(const NoiseRealization& noise, const TrigField& g, Deposit deposit) {
  const Lattice& lat = noise.lattice();
  check_band(lat, g);
  if (g.comps() != noise.dim()) fail("test function has wrong number of components");
  const int N = noise.dim();
  double gauss = 0.0;
  if (noise.has_gaussian()) {
    for (const auto& m : g.modes()) {
      const VecC z = noise.gaussian_mode(mode_index(lat, m.k));
      gauss += z.dot(m.c).real();
    }
    gauss *= lat.cell_volume();
  }
  std::vector<double> terms(noise.atoms());
  std::vector<double> site(lat.d());
  for (std::size_t j = 0; j < noise.atoms(); ++j) {
    VecR v;
    if (deposit == Deposit::NearestSite) {
      const VecR x = lat.position(lat.nearest_site(noise.position(j)));
      v = g.eval(x.data());
    } else {
      v = g.eval(noise.position(j));
    }
    double s = 0.0;
    for (int c = 0; c < N; ++c) s += noise.mark(j)[c] * v(c);
    terms[j] = s;
  }
  return gauss + pairwise_sum(terms.data(), terms.size());
}

double pathwise_pairing(const GreenFunction& g, const NoiseRealization& noise, const TrigField& f,
                        Deposit deposit) {
  return noise_pairing(noise, f.apply(g), deposit);
}

}  // namespace covspde
