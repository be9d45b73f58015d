#include "covspde/cosurface.hpp"

#include "covspde/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace covspde {

namespace {

double loop_separation(const Loop& a, const Loop& b) {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& p : a.pieces())
    for (int i = 0; i <= 64; ++i) s = std::min(s, b.distance(p.point(i / 64.0).data()));
  return s;
}

void check_loops(const GreenFunction& g, const std::vector<Loop>& loops, const ComponentMap& map) {
  for (const auto& l : loops)
    if (l.d() != g.d()) fail("loop dimension does not match the operator");
  if (static_cast<int>(map.comp.size()) != g.d() || map.sign.size() != map.comp.size())
    fail("component map needs one entry per axis");
  for (int c : map.comp)
    if (c < 0 || c >= g.dim()) fail("component map refers to a missing field component");
}

// The closed form truncates at 12 / m_min. Sampling uses 6 / m_min: the
// phase variance from atoms beyond it is O(exp(-12)), far below any
// attainable standard error.
double default_cutoff(const GreenFunction& g, const LoopOptions& opt, double decay_lengths) {
  if (opt.cutoff > 0.0) return opt.cutoff;
  if (!(g.mass_gap() > 0.0)) fail("loop functionals need a strictly positive spectrum");
  return decay_lengths / g.mass_gap();
}

void loops_bounds(const std::vector<Loop>& loops, VecR& lo, VecR& hi) {
  loops.front().bounds(lo, hi);
  for (const auto& l : loops) {
    VecR a, b;
    l.bounds(a, b);
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(b);
  }
}

// Sum of loop responses at x over the loops within the cutoff.
void total_response(const MollifiedKernel& k, const std::vector<Loop>& loops, const ComponentMap& map,
                    double cutoff, const double* x, std::vector<double>& y, std::vector<double>& tmp) {
  std::fill(y.begin(), y.end(), 0.0);
  for (const auto& l : loops) {
    if (l.distance(x) > cutoff) continue;
    loop_response(k, l, map, x, tmp.data());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += tmp[i];
  }
}

// ---------------------------------------------------------------------------
// Genz-Malik degree-7 rule with embedded degree-5 rule on a box.

struct GenzMalik {
  int n;
  double l2 = std::sqrt(9.0 / 70.0), l4 = std::sqrt(9.0 / 10.0), l5 = std::sqrt(9.0 / 19.0);
  double w1, w2, w3, w4, w5, v1, v2, v3, v4;

  explicit GenzMalik(int dim) : n(dim) {
    w1 = (12824.0 - 9120.0 * n + 400.0 * n * n) / 19683.0;
    w2 = 980.0 / 6561.0;
    w3 = (1820.0 - 400.0 * n) / 19683.0;
    w4 = 200.0 / 19683.0;
    w5 = 6859.0 / 19683.0 / std::pow(2.0, n);
    v1 = (729.0 - 950.0 * n + 50.0 * n * n) / 729.0;
    v2 = 245.0 / 486.0;
    v3 = (265.0 - 100.0 * n) / 1458.0;
    v4 = 25.0 / 729.0;
  }
  std::size_t points() const { return 1 + 4 * n + 2 * n * (n - 1) + (std::size_t(1) << n); }

  // Point list for a box (center c, half widths h) in a fixed order.
  std::vector<VecR> nodes(const VecR& c, const VecR& h) const {
    std::vector<VecR> p;
    p.push_back(c);
    for (int i = 0; i < n; ++i)
      for (double lam : {l2, -l2, l4, -l4}) {
        VecR q = c;
        q(i) += lam * h(i);
        p.push_back(q);
      }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (double si : {1.0, -1.0})
          for (double sj : {1.0, -1.0}) {
            VecR q = c;
            q(i) += si * l4 * h(i);
            q(j) += sj * l4 * h(j);
            p.push_back(q);
          }
    for (std::size_t m = 0; m < (std::size_t(1) << n); ++m) {
      VecR q = c;
      for (int i = 0; i < n; ++i) q(i) += ((m >> i) & 1 ? -l5 : l5) * h(i);
      p.push_back(q);
    }
    return p;
  }

  // Combines values in node order into (I7, I5, split axis).
  void combine(const std::vector<double>& f, double vol, double& i7, double& i5, int& axis) const {
    const double f0 = f[0];
    double s2 = 0.0, s3 = 0.0, s4 = 0.0, s5 = 0.0, best = -1.0;
    std::size_t k = 1;
    const double ratio = (l2 * l2) / (l4 * l4);
    axis = 0;
    for (int i = 0; i < n; ++i, k += 4) {
      const double a = f[k] + f[k + 1], b = f[k + 2] + f[k + 3];
      s2 += a;
      s3 += b;
      const double diff = std::fabs(a - 2.0 * f0 - ratio * (b - 2.0 * f0));
      if (diff > best) {
        best = diff;
        axis = i;
      }
    }
    for (int q = 0; q < 2 * n * (n - 1); ++q) s4 += f[k++];
    for (std::size_t q = 0; q < (std::size_t(1) << n); ++q) s5 += f[k++];
    i7 = vol * (w1 * f0 + w2 * s2 + w3 * s3 + w4 * s4 + w5 * s5);
    i5 = vol * (v1 * f0 + v2 * s2 + v3 * s3 + v4 * s4);
  }
};

struct Cell {
  VecR c, h;
  double I = 0.0, J = 0.0, E = 0.0, maxabs = 0.0;  // J: imaginary part
  int axis = 0;
  bool boundary = false;
};

SchwingerEstimate complex_estimate(const std::vector<cplx>& z, const std::string& what) {
  std::vector<double> re(z.size()), im(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    re[i] = z[i].real();
    im[i] = z[i].imag();
  }
  const auto a = mean_estimate(re), b = mean_estimate(im);
  SchwingerEstimate e = a;
  e.value = cplx(a.value.real(), b.value.real());
  e.std_error = std::hypot(a.std_error, b.std_error);
  e.descriptor = what;
  return e;
}

std::string eps_label(double eps) {
  std::ostringstream os;
  os << "loops eps=" << eps;
  return os.str();
}

}  // namespace

LoopClosedResult loop_schwinger_closed(std::shared_ptr<const GreenFunction> g, const LevyMeasure& levy,
                                       const std::vector<Loop>& loops, const ComponentMap& map,
                                       const LoopOptions& opt) {
  LoopClosedResult res;
  check_loops(*g, loops, map);
  if (levy.dim() != g->dim()) fail("Levy measure and operator disagree on the multiplet size");
  if (!(g->mass_gap() > 0.0)) fail("loop hypotheses not certified");
  {
    std::vector<double> radii;
    for (int k = 2; k <= 10; ++k) radii.push_back(k / g->mass_gap());
    if (!decay_profile(*g, radii).pass) fail("loop hypotheses not certified");
  }
  res.decay_certified = true;
  res.growth = cumulant_growth(levy);
  res.certification = res.growth.with_i ? "certified" : "hypotheses unverified";
  if (loops.empty() || levy.total_mass() == 0.0) return res;

  const int d = g->d(), N = g->dim();
  const double cutoff = default_cutoff(*g, opt, 12.0);
  VecR lo, hi;
  loops_bounds(loops, lo, hi);
  lo.array() -= cutoff;
  hi.array() += cutoff;

  const MollifiedKernel bare(g, {0.0});
  auto integrand = [&](const VecR& x, std::vector<double>& y, std::vector<double>& tmp) {
    total_response(bare, loops, map, cutoff, x.data(), y, tmp);
    return levy.cumulant(y.data());
  };
  // The cumulant of a symmetric measure is real; an imaginary part is
  // integrated alongside and enters the error estimate.
  const GenzMalik gm(d);
  double feature = std::numeric_limits<double>::infinity();
  for (const auto& l : loops) feature = std::min(feature, l.min_feature());
  const double near_side = 0.5 * feature;

  auto eval_cells = [&](std::vector<Cell>& cells) {
    for_each_index(opt.exec, cells.size(), [&](std::size_t ci) {
      Cell& cell = cells[ci];
      std::vector<double> y(N), tmp(N);
      const auto pts = gm.nodes(cell.c, cell.h);
      std::vector<double> fr(pts.size()), fi(pts.size());
      double mx = 0.0;
      for (std::size_t p = 0; p < pts.size(); ++p) {
        const cplx v = integrand(pts[p], y, tmp);
        fr[p] = v.real();
        fi[p] = v.imag();
        mx = std::max(mx, std::abs(v));
      }
      double vol = 1.0;
      for (int i = 0; i < d; ++i) vol *= 2.0 * cell.h(i);
      double i7, i5, j7, j5;
      int axis, axis_im;
      gm.combine(fr, vol, i7, i5, axis);
      gm.combine(fi, vol, j7, j5, axis_im);
      cell.I = i7;
      cell.E = std::hypot(i7 - i5, j7 - j5);
      cell.axis = axis;
      cell.maxabs = mx;
      cell.J = j7;
    });
  };

  // Initial grid with cells of about 2 / m_min, then split cells touching a
  // loop until they resolve the smallest loop feature.
  std::vector<Cell> init;
  {
    const double target = 2.0 / g->mass_gap();
    std::array<int, kMaxDim> cnt{};
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) {
      cnt[i] = std::max(1, static_cast<int>(std::ceil((hi(i) - lo(i)) / target)));
      total *= cnt[i];
    }
    for (std::size_t idx = 0; idx < total; ++idx) {
      Cell c;
      c.c.resize(d);
      c.h.resize(d);
      std::size_t r = idx;
      for (int i = 0; i < d; ++i) {
        const int k = static_cast<int>(r % cnt[i]);
        r /= cnt[i];
        const double w = (hi(i) - lo(i)) / cnt[i];
        c.h(i) = 0.5 * w;
        c.c(i) = lo(i) + (k + 0.5) * w;
        if (k == 0 || k == cnt[i] - 1) c.boundary = true;
      }
      init.push_back(c);
    }
    std::vector<Cell> out;
    while (!init.empty()) {
      Cell c = init.back();
      init.pop_back();
      double dist = std::numeric_limits<double>::infinity();
      for (const auto& l : loops) dist = std::min(dist, l.distance(c.c.data()));
      if (dist <= c.h.norm() && 2.0 * c.h.maxCoeff() > near_side) {
        for (std::size_t m = 0; m < (std::size_t(1) << d); ++m) {
          Cell k = c;
          k.h = 0.5 * c.h;
          for (int i = 0; i < d; ++i) k.c(i) += ((m >> i) & 1 ? 0.5 : -0.5) * c.h(i);
          init.push_back(k);
        }
        continue;
      }
      out.push_back(c);
    }
    // Deterministic order independent of the splitting stack.
    std::sort(out.begin(), out.end(), [](const Cell& a, const Cell& b) {
      for (int i = 0; i < a.c.size(); ++i)
        if (a.c(i) != b.c(i)) return a.c(i) < b.c(i);
      return a.h(0) < b.h(0);
    });
    init = std::move(out);
  }

  std::vector<Cell> cells = std::move(init);
  eval_cells(cells);
  std::vector<char> active(cells.size(), 1);
  res.evaluations = cells.size() * gm.points();

  using Entry = std::pair<double, std::size_t>;
  auto cmp = [](const Entry& a, const Entry& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);
  double I = 0.0, E = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    heap.push({cells[i].E, i});
    I += cells[i].I;
    E += cells[i].E;
  }
  const std::size_t batch = 32;
  while (true) {
    const double target = std::max(opt.rel_tol * std::fabs(I), 1e-14);
    if (E <= target) break;
    if (res.evaluations >= opt.max_evaluations) {
      res.converged = false;
      break;
    }
    std::vector<Cell> kids;
    for (std::size_t b = 0; b < batch && !heap.empty(); ++b) {
      const auto [err, id] = heap.top();
      heap.pop();
      active[id] = 0;
      I -= cells[id].I;
      E -= cells[id].E;
      const Cell& p = cells[id];
      for (double s : {-1.0, 1.0}) {
        Cell k = p;
        k.h(p.axis) *= 0.5;
        k.c(p.axis) += 0.5 * s * p.h(p.axis);
        // Only children on the outer face keep the boundary flag.
        k.boundary = false;
        for (int i = 0; i < d; ++i)
          if (k.c(i) - k.h(i) <= lo(i) + 1e-12 || k.c(i) + k.h(i) >= hi(i) - 1e-12) k.boundary = true;
        kids.push_back(k);
      }
    }
    eval_cells(kids);
    res.evaluations += kids.size() * gm.points();
    for (std::size_t i = 0; i < kids.size(); ++i) {
      cells.push_back(kids[i]);
      active.push_back(1);
      heap.push({kids[i].E, cells.size() - 1});
      I += kids[i].I;
      E += kids[i].E;
    }
  }

  std::vector<double> re_terms, im_terms, err_terms;
  double boundary_max = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!active[i]) continue;
    re_terms.push_back(cells[i].I);
    im_terms.push_back(cells[i].J);
    err_terms.push_back(cells[i].E);
    if (cells[i].boundary) boundary_max = std::max(boundary_max, cells[i].maxabs);
  }
  const cplx exponent(pairwise_sum(re_terms.data(), re_terms.size()),
                      pairwise_sum(im_terms.data(), im_terms.size()));
  const double err = pairwise_sum(err_terms.data(), err_terms.size());
  // Outside the box the integrand decays at least like exp(-m_min r).
  double area = 0.0;
  for (int i = 0; i < d; ++i) {
    double face = 2.0;
    for (int j = 0; j < d; ++j)
      if (j != i) face *= hi(j) - lo(j);
    area += face;
  }
  res.tail_bound = boundary_max * area / g->mass_gap();
  res.value = std::exp(exponent);
  res.error_estimate = std::abs(res.value) * (err + res.tail_bound);
  return res;
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace {

void check_schedule(const std::vector<Loop>& loops, const std::vector<double>& eps) {
  if (eps.empty()) fail("eps schedule is empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) fail("eps schedule must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) fail("eps schedule must be decreasing");
  }
  for (const auto& l : loops)
    if (eps.front() >= l.min_feature()) fail("mollifier scale exceeds loop feature size");
  for (std::size_t i = 0; i < loops.size(); ++i)
    for (std::size_t j = i + 1; j < loops.size(); ++j)
      if (loop_separation(loops[i], loops[j]) <= eps.front()) fail("loops closer than the mollifier scale");
}

// Poisson phases sum_j <alpha_j, y_l(x_j)> per level, atoms from the padded
// bounding box of the loops.
void poisson_phases(const MollifiedKernel& k, const LevyMeasure& levy, const std::vector<Loop>& loops,
                    const ComponentMap& map, double cutoff, std::uint64_t seed, double* phase) {
  const int d = k.green().d(), N = k.dim();
  const std::size_t L = k.levels();
  for (std::size_t l = 0; l < L; ++l) phase[l] = 0.0;
  if (loops.empty() || levy.total_mass() == 0.0) return;
  VecR lo, hi;
  loops_bounds(loops, lo, hi);
  const double side = (hi - lo).maxCoeff() + 2.0 * cutoff;
  const auto pc = sample_points(levy, d, lo.array() - cutoff, side, seed);
  std::vector<double> y(L * N), tmp(L * N);
  std::vector<std::vector<double>> terms(L);
  for (std::size_t j = 0; j < pc.size(); ++j) {
    const double* x = pc.pos.data() + j * d;
    const double* alpha = pc.marks.data() + j * N;
    total_response(k, loops, map, cutoff, x, y, tmp);
    for (std::size_t l = 0; l < L; ++l) {
      double s = 0.0;
      for (int a = 0; a < N; ++a) s += alpha[a] * y[l * N + a];
      if (s != 0.0) terms[l].push_back(s);
    }
  }
  for (std::size_t l = 0; l < L; ++l) phase[l] = pairwise_sum(terms[l].data(), terms[l].size());
}

LoopMcResult summarize(const std::vector<double>& eps, const std::vector<double>& phase, std::size_t n) {
  const std::size_t L = eps.size();
  LoopMcResult r;
  r.eps = eps;
  auto sample = [&](std::size_t s, std::size_t l) { return std::polar(1.0, phase[s * L + l]); };
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<cplx> z(n);
    for (std::size_t s = 0; s < n; ++s) z[s] = sample(s, l);
    r.per_eps.push_back(complex_estimate(z, eps_label(eps[l])));
  }
  for (std::size_t l = 0; l + 1 < L; ++l) {
    std::vector<double> c(n);
    for (std::size_t s = 0; s < n; ++s) c[s] = std::norm(sample(s, l) - sample(s, l + 1));
    auto e = mean_estimate(c);
    e.descriptor = "cauchy " + eps_label(eps[l]).substr(6) + " -> " + eps_label(eps[l + 1]).substr(6);
    r.cauchy.push_back(e);
  }
  for (std::size_t l = 0; l + 1 < r.cauchy.size(); ++l) {
    const auto& a = r.cauchy[l];
    const auto& b = r.cauchy[l + 1];
    if (b.value.real() > a.value.real() + std::hypot(a.std_error, b.std_error)) {
      r.cauchy_monotone = false;
      r.warnings.push_back("Cauchy diagnostic not monotone along the eps schedule");
      break;
    }
  }
  // Richardson in eps^2 on the two finest scales, per seed.
  if (L >= 2) {
    const double e1 = eps[L - 2] * eps[L - 2], e2 = eps[L - 1] * eps[L - 1];
    std::vector<cplx> z(n);
    for (std::size_t s = 0; s < n; ++s) z[s] = (e1 * sample(s, L - 1) - e2 * sample(s, L - 2)) / (e1 - e2);
    r.extrapolated = complex_estimate(z, "loops eps->0");
  } else {
    r.extrapolated = r.per_eps.front();
  }
  return r;
}

TrigField loop_trig(const std::vector<Loop>& loops, const ComponentMap& map, const Lattice& lat, int N,
                    double eps) {
  const Mollifier moll(lat.d(), eps);
  LatticeField f(lat, N);
  for (const auto& l : loops) {
    const LatticeField part = loop_testfunction(l, moll, lat, N, map);
    for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] += part.v[i];
  }
  return TrigField::from_lattice(f, 1e-13);
}

}  // namespace

LoopMcResult loop_schwinger_mc(std::shared_ptr<const GreenFunction> g, const LevyMeasure& levy,
                               const std::vector<Loop>& loops, const ComponentMap& map,
                               const std::vector<double>& eps_schedule, SeedRange seeds, const LoopOptions& opt) {
  check_loops(*g, loops, map);
  check_schedule(loops, eps_schedule);
  if (levy.dim() != g->dim()) fail("Levy measure and operator disagree on the multiplet size");
  const double cutoff = default_cutoff(*g, opt, 6.0);
  const MollifiedKernel kern(g, eps_schedule);
  const std::size_t L = eps_schedule.size();
  std::vector<double> phase(seeds.count * L);
  for_each_index(opt.exec, seeds.count, [&](std::size_t s) {
    poisson_phases(kern, levy, loops, map, cutoff, seeds.first + s, phase.data() + s * L);
  });
  return summarize(eps_schedule, phase, seeds.count);
}

LoopMcResult loop_schwinger_mc(std::shared_ptr<const GreenFunction> g, const NoiseSpec& spec, const Lattice& lat,
                               const std::vector<Loop>& loops, const ComponentMap& map,
                               const std::vector<double>& eps_schedule, SeedRange seeds, const LoopOptions& opt) {
  check_loops(*g, loops, map);
  check_schedule(loops, eps_schedule);
  if (spec.dim() != g->dim()) fail("noise and operator disagree on the multiplet size");
  if (lat.d() != g->d()) fail("lattice dimension does not match the operator");
  const std::size_t L = eps_schedule.size();
  const bool poisson = spec.levy && spec.rho() > 0.0 && !loops.empty();
  const bool gauss = spec.has_gaussian() && !loops.empty();
  std::optional<MollifiedKernel> kern;
  double cutoff = 0.0;
  if (poisson) {
    kern.emplace(g, eps_schedule);
    cutoff = default_cutoff(*g, opt, 6.0);
  }
  std::vector<TrigField> pre;
  std::optional<NoiseSpec> gspec;
  if (gauss) {
    for (double e : eps_schedule) pre.push_back(loop_trig(loops, map, lat, g->dim(), e).apply(*g));
    gspec.emplace(spec.rep, spec.A);
  }
  std::vector<double> phase(seeds.count * L, 0.0);
  for_each_index(opt.exec, seeds.count, [&](std::size_t s) {
    const std::uint64_t seed = seeds.first + s;
    double* ph = phase.data() + s * L;
    if (poisson) poisson_phases(*kern, *spec.levy, loops, map, cutoff, seed, ph);
    if (gauss) {
      const auto noise = sample_noise(*gspec, lat, seed);
      for (std::size_t l = 0; l < L; ++l) ph[l] += noise_pairing(noise, pre[l]);
    }
  });
  return summarize(eps_schedule, phase, seeds.count);
}

cplx loop_gaussian_factor(const GreenFunction& g, const NoiseSpec& spec, const Lattice& lat,
                          const std::vector<Loop>& loops, const ComponentMap& map, double eps) {
  check_loops(g, loops, map);
  if (loops.empty() || !spec.has_gaussian()) return 1.0;
  const NoiseSpec gspec(spec.rep, spec.A);
  return charfunc_solution(g, gspec, loop_trig(loops, map, lat, g.dim(), eps), lat);
}

}  // namespace covspde
