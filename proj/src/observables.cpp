#include "covspde/observables.hpp"

#include "covspde/quadrature.hpp"

#include <cmath>
#include <limits>

namespace covspde {

namespace {

LatticeField preimage(const GreenFunction& g, const TrigField& f, const Lattice& lat) {
  return f.apply(g).sample(lat);
}

double cell_sum(const std::vector<double>& v, const Lattice& lat) {
  return pairwise_sum(v.data(), v.size()) * lat.cell_volume();
}

double covariance(const NoiseSpec& spec, const LatticeField& u, const LatticeField& v) {
  const int N = u.comps;
  const std::size_t S = u.lat.sites();
  MatR C = spec.A;
  VecR mean = VecR::Zero(N);
  if (spec.levy) {
    C += spec.levy->second_moment();
    mean = spec.levy->mean();
  }
  std::vector<double> q(S), mu(S), mv(S);
  for (std::size_t s = 0; s < S; ++s) {
    const Eigen::Map<const VecR> a(u.v.data() + s * N, N), b(v.v.data() + s * N, N);
    q[s] = a.dot(C * b);
    mu[s] = mean.dot(a);
    mv[s] = mean.dot(b);
  }
  return cell_sum(q, u.lat) + cell_sum(mu, u.lat) * cell_sum(mv, u.lat);
}

double sample_mean(const double* x, std::size_t n) { return pairwise_sum(x, n) / static_cast<double>(n); }

}  // namespace

double SchwingerEstimate::z_score(cplx reference) const {
  const double diff = std::abs(value - reference);
  if (std_error > 0.0) return diff / std_error;
  return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

cplx charfunc_solution(const GreenFunction& g, const NoiseSpec& spec, const TrigField& f,
                       const Lattice& lat) {
  if (f.comps() != spec.dim()) fail("test function has wrong number of components");
  return charfunc_noise(spec, preimage(g, f, lat));
}

double two_point_closed(const GreenFunction& g, const NoiseSpec& spec, const TrigField& f,
                        const TrigField& h, const Lattice& lat) {
  return covariance(spec, preimage(g, f, lat), preimage(g, h, lat));
}

double fourth_cumulant_closed(const GreenFunction& g, const NoiseSpec& spec, const TrigField& f,
                              const Lattice& lat) {
  if (!spec.levy) return 0.0;
  const LatticeField u = preimage(g, f, lat);
  std::vector<double> q(lat.sites());
  for (std::size_t s = 0; s < q.size(); ++s) q[s] = spec.levy->contract4(u.v.data() + s * u.comps);
  return cell_sum(q, lat);
}

double wick_four_point(const GreenFunction& g, const NoiseSpec& spec, const std::vector<TrigField>& fs,
                       const Lattice& lat) {
  if (fs.size() != 4) fail("Wick sum needs four test functions");
  auto c = [&](int i, int j) { return two_point_closed(g, spec, fs[i], fs[j], lat); };
  return c(0, 1) * c(2, 3) + c(0, 2) * c(1, 3) + c(0, 3) * c(1, 2);
}

std::vector<double> pairing_samples(const GreenFunction& g, const NoiseSpec& spec, const Lattice& lat,
                                    const std::vector<TrigField>& fs, SeedRange seeds, Deposit deposit,
                                    Exec ex) {
  std::vector<TrigField> pre;
  for (const auto& f : fs) pre.push_back(f.apply(g));
  const std::size_t w = fs.size();
  std::vector<double> out(seeds.count * w);
  for_each_index(ex, seeds.count, [&](std::size_t s) {
    const auto noise = sample_noise(spec, lat, seeds.first + s);
    for (std::size_t i = 0; i < w; ++i) out[s * w + i] = noise_pairing(noise, pre[i], deposit);
  });
  return out;
}

std::vector<double> column(const std::vector<double>& rows, std::size_t width, std::size_t col) {
  std::vector<double> c(rows.size() / width);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = rows[i * width + col];
  return c;
}

SchwingerEstimate mean_estimate(const std::vector<double>& x) {
  SchwingerEstimate e;
  e.method = SchwingerEstimate::Method::MonteCarlo;
  e.n_samples = x.size();
  if (x.empty()) return e;
  const double m = sample_mean(x.data(), x.size());
  std::vector<double> dev(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) dev[i] = (x[i] - m) * (x[i] - m);
  const double var = x.size() > 1 ? pairwise_sum(dev.data(), dev.size()) / (x.size() - 1) : 0.0;
  e.value = m;
  e.std_error = std::sqrt(var / x.size());
  return e;
}

SchwingerEstimate charfunc_estimate(const std::vector<double>& x) {
  std::vector<double> c(x.size()), s(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    c[i] = std::cos(x[i]);
    s[i] = std::sin(x[i]);
  }
  const auto ec = mean_estimate(c), es = mean_estimate(s);
  SchwingerEstimate e = ec;
  e.value = cplx(ec.value.real(), es.value.real());
  e.std_error = std::hypot(ec.std_error, es.std_error);
  e.descriptor = "charfunc";
  return e;
}

SchwingerEstimate fourth_cumulant_estimate(const std::vector<double>& x, int batches) {
  if (batches < 2 || x.size() < static_cast<std::size_t>(batches) * 4) fail("too few samples for batch means");
  auto k4 = [](const double* v, std::size_t n) {
    const double m = sample_mean(v, n);
    std::vector<double> d2(n), d4(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = v[i] - m;
      d2[i] = d * d;
      d4[i] = d2[i] * d2[i];
    }
    const double m2 = sample_mean(d2.data(), n), m4 = sample_mean(d4.data(), n);
    return m4 - 3.0 * m2 * m2;
  };
  const std::size_t per = x.size() / batches;
  std::vector<double> bk(batches);
  for (int b = 0; b < batches; ++b) bk[b] = k4(x.data() + b * per, per);
  SchwingerEstimate e = mean_estimate(bk);
  e.value = k4(x.data(), x.size());
  e.n_samples = x.size();
  e.descriptor = "fourth_cumulant";
  return e;
}

SchwingerEstimate npoint_mc(const GreenFunction& g, const NoiseSpec& spec, const Lattice& lat,
                            const std::vector<TrigField>& fs, SeedRange seeds, Deposit deposit, Exec ex) {
  if (fs.size() > 4) fail("moment order above supported range");
  if (fs.empty()) fail("need at least one test function");
  const auto rows = pairing_samples(g, spec, lat, fs, seeds, deposit, ex);
  std::vector<double> prod(seeds.count, 1.0);
  for (std::size_t s = 0; s < seeds.count; ++s)
    for (std::size_t i = 0; i < fs.size(); ++i) prod[s] *= rows[s * fs.size() + i];
  SchwingerEstimate e = mean_estimate(prod);
  e.descriptor = std::to_string(fs.size()) + "-point";
  return e;
}

SchwingerEstimate charfunc_mc(const GreenFunction& g, const NoiseSpec& spec, const Lattice& lat,
                              const TrigField& f, SeedRange seeds, Deposit deposit, Exec ex) {
  return charfunc_estimate(pairing_samples(g, spec, lat, {f}, seeds, deposit, ex));
}

}  // namespace covspde
