#include "acceptance.hpp"

#include "runs.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace covspde::cli {

namespace {

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

LevyMeasure radial_gauss(const Representation& rep, double rho, double scale) {
  LevyMeasure::Params p;
  p.rho = rho;
  p.scale = scale;
  return builtin_levy("radial_gauss", rep, p);
}

NoiseSpec make_spec(const Representation& rep, double gauss, double rho, double scale) {
  std::optional<LevyMeasure> l;
  if (rho > 0.0) l = radial_gauss(rep, rho, scale);
  return NoiseSpec(rep, gauss * MatR::Identity(rep.dim(), rep.dim()), l);
}

VecR normal_vec(CounterRng& r, int d, double s) {
  VecR v(d);
  for (int i = 0; i < d; ++i) v(i) = s * r.normal();
  return v;
}

const Lattice& desk_lattice() {
  static const Lattice lat(3, 16.0, 64);
  return lat;
}

// ---------------------------------------------------------------------------

void covariance_gate(CriterionOutcome& o) {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto rep = check_covariance(op);
  // One flipped entry in each row of the curl blocks: (generator, row, col).
  const int flips[6][3] = {{2, 0, 4}, {2, 1, 3}, {1, 2, 3}, {2, 3, 1}, {2, 4, 0}, {1, 5, 0}};
  double min_bad = std::numeric_limits<double>::infinity();
  bool all_fail = true;
  for (const auto& f : flips) {
    auto B = op.B();
    B[f[0]](f[1], f[2]) = -B[f[0]](f[1], f[2]);
    const auto r = check_covariance(CovariantOperator(op.rep_in(), op.rep_out(), B, op.M(), "perturbed"));
    min_bad = std::min(min_bad, r.residual);
    all_fail = all_fail && !r.pass;
  }
  o.pass = rep.pass && rep.residual < 1e-10 && all_fail && min_bad >= 0.5;
  o.detail = "residual " + fmt("%.2e", rep.residual) + ", min perturbed residual " + fmt("%.3f", min_bad);
  o.data = {{"residual", rep.residual}, {"min_perturbed_residual", min_bad}};
}

void mass_spectrum_oracle(CriterionOutcome& o) {
  CounterRng r(2, Stream::Test, 0);
  double worst_mass = 0.0, worst_det = 0.0;
  bool ok = true;
  for (double m : {0.5, 1.0, 2.0}) {
    const auto op = proca_operator(m, 1.0, -1.0);
    const auto ms = mass_spectrum(op);
    ok = ok && ms.masses.size() == 2 && ms.admissible;
    for (const auto& mk : ms.masses) worst_mass = std::max(worst_mass, std::abs(mk - m) / m);
    worst_mass = std::max(worst_mass, std::abs(ms.prefactor - m * m) / (m * m));
    for (int t = 0; t < 100; ++t) {
      const VecR p = normal_vec(r, 3, 2.0);
      const double pp = p.squaredNorm();
      const double oracle = m * m * (pp + m * m) * (pp + m * m);
      worst_det = std::max(worst_det, std::abs(full_symbol(op, p).determinant() - oracle) / oracle);
      worst_det = std::max(worst_det, std::abs(ms.det_model(pp) - oracle) / oracle);
    }
  }
  o.pass = ok && worst_mass < 1e-8 && worst_det < 1e-8;
  o.detail = "mass/prefactor rel err " + fmt("%.2e", worst_mass) + ", det rel err " + fmt("%.2e", worst_det);
  o.data = {{"mass_rel_error", worst_mass}, {"det_rel_error", worst_det}};
}

void green_inverse(CriterionOutcome& o) {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  CounterRng r(3, Stream::Test, 0);
  double inv = 0.0;
  for (int t = 0; t < 64; ++t) {
    const VecR p = normal_vec(r, 3, 2.0);
    const MatC prod = full_symbol(op, p) * g->momentum(p);
    inv = std::max(inv, max_abs(prod - MatC::Identity(6, 6)));
  }
  const Lattice& lat = desk_lattice();
  const auto k = lattice_kernel(*g, lat);
  const double res = lattice_kernel_residual(*g, *k);
  // Point against lattice kernel at lattice sites with 1 <= |x| <= 4.
  double worst = 0.0;
  const double a = lat.a();
  const int span = static_cast<int>(4.0 / a);
  for (int i = -span; i <= span; ++i)
    for (int j = -span; j <= span; ++j)
      for (int l = -span; l <= span; ++l) {
        VecR x(3);
        x << i * a, j * a, l * a;
        const double rr = x.norm();
        if (rr < 1.0 || rr > 4.0) continue;
        const MatR P = g->point(x);
        const MatR K = k->at(lat.index({i, j, l}));
        worst = std::max(worst, max_abs(P - K) / max_abs(P));
      }
  o.pass = inv < 1e-10 && res < 1e-6 && worst < 1e-3;
  o.detail = "inverse err " + fmt("%.2e", inv) + ", kernel residual " + fmt("%.2e", res) +
             ", point vs lattice rel " + fmt("%.3e", worst);
  o.data = {{"inverse_error", inv}, {"kernel_residual", res}, {"point_lattice_rel", worst}};
}

void fractional_two_point(CriterionOutcome& o) {
  const Lattice& lat = desk_lattice();
  const double L = lat.L();
  const auto rep = builtin_representation("trivial", 3);
  const NoiseSpec spec = make_spec(rep, 1.0, 0.0, 0.0);
  // Five single-mode pairs: equal wavevectors with varying phases, plus one
  // orthogonal pair whose covariance vanishes.
  struct Pair {
    std::array<int, kMaxDim> k, kh;
    cplx c, ch;
  };
  const std::vector<Pair> pairs{{{1, 0, 0}, {1, 0, 0}, {1.0, 0.0}, {0.6, 0.8}},
                                {{0, 2, 1}, {0, 2, 1}, {0.5, -0.5}, {1.0, 0.2}},
                                {{1, 1, 1}, {1, 1, 1}, {0.0, 1.0}, {0.0, 1.0}},
                                {{3, 0, -2}, {3, 0, -2}, {0.7, 0.3}, {-0.2, 0.9}},
                                {{1, 0, 0}, {0, 1, 0}, {1.0, 0.0}, {1.0, 0.0}}};
  const SeedRange seeds{4000, 200};
  double zmax = 0.0;
  json rows = json::array();
  for (double lambda : {0.25, 0.5}) {
    const auto g = GreenFunction::scalar_power(3, 1.0, lambda);
    std::vector<TrigField> fs, hs;
    for (const auto& p : pairs) {
      TrigField f(3, L, 1), h(3, L, 1);
      f.add(p.k, VecC::Constant(1, p.c));
      h.add(p.kh, VecC::Constant(1, p.ch));
      fs.push_back(f);
      hs.push_back(h);
    }
    std::vector<std::vector<double>> prod(pairs.size(), std::vector<double>(seeds.count));
    for (std::uint64_t s = 0; s < seeds.count; ++s) {
      const auto noise = sample_noise(spec, lat, seeds.first + s);
      const auto field = solve_lattice(g, noise);
      for (std::size_t i = 0; i < pairs.size(); ++i)
        prod[i][s] = eval_pairing(field, fs[i]) * eval_pairing(field, hs[i]);
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      double oracle = 0.0;
      if (p.k == p.kh) {
        const double k2 = fs[i].wavevector(fs[i].modes().front()).squaredNorm();
        oracle = std::pow(L, 3) / 2.0 * (p.c * std::conj(p.ch)).real() * std::pow(1.0 + k2, -2.0 * lambda);
      }
      const auto est = mean_estimate(prod[i]);
      const double z = est.z_score(oracle);
      zmax = std::max(zmax, z);
      rows.push_back({{"lambda", lambda}, {"pair", i}, {"mc", est.value.real()}, {"std_error", est.std_error},
                      {"oracle", oracle}, {"z", z}});
    }
  }
  o.pass = zmax < 3.0;
  o.detail = "10 pairings over 200 seeds, max z " + fmt("%.2f", zmax);
  o.data = rows;
}

void charfunc_reproduction(CriterionOutcome& o) {
  const Lattice& lat = desk_lattice();
  const SeedRange seeds{10000, 10000};
  struct Op {
    std::string name;
    std::shared_ptr<const GreenFunction> g;
    Representation rep;
  };
  const auto proca = proca_operator(1.0, 1.0, -1.0);
  const std::vector<Op> ops{{"proca", green_of(proca), proca.rep_in()},
                            {"fractional", GreenFunction::scalar_power(3, 1.0, 0.5),
                             builtin_representation("trivial", 3)}};
  double zmax = 0.0, min_gap = 1.0;
  json rows = json::array();
  for (const auto& op : ops) {
    const std::vector<std::pair<std::string, NoiseSpec>> specs{{"gaussian", make_spec(op.rep, 0.5, 0.0, 1.0)},
                                                               {"poisson", make_spec(op.rep, 0.0, 0.2, 1.0)},
                                                               {"mixed", make_spec(op.rep, 0.25, 0.1, 1.0)}};
    CounterRng rng(5, Stream::Test, 0);
    for (int t = 0; t < 3; ++t) {
      TrigField f = random_trig_field(rng, 3, lat.L(), op.rep.dim(), 3, 2);
      // Normalized so that the mixed-spec variance of (phi, f) is 1.
      f = f * (1.0 / std::sqrt(two_point_closed(*op.g, specs[2].second, f, f, lat)));
      for (const auto& [sname, spec] : specs) {
        const cplx closed = charfunc_solution(*op.g, spec, f, lat);
        const auto mc = charfunc_mc(*op.g, spec, lat, f, seeds);
        const double z = mc.z_score(closed);
        zmax = std::max(zmax, z);
        min_gap = std::min(min_gap, std::abs(1.0 - closed));
        rows.push_back({{"operator", op.name}, {"noise", sname}, {"f", t}, {"closed", complex_json(closed)},
                        {"mc", complex_json(mc.value)}, {"std_error", mc.std_error}, {"z", z}});
      }
    }
  }
  o.pass = zmax < 3.0;
  o.detail = "18 functionals over 1e4 seeds, max z " + fmt("%.2f", zmax) + ", min |1 - closed| " + fmt("%.3f", min_gap);
  o.data = rows;
}

void non_gaussianity(CriterionOutcome& o) {
  const Lattice& lat = desk_lattice();
  const auto g = GreenFunction::scalar_power(3, 1.0, 0.5);
  const auto rep = builtin_representation("trivial", 3);
  // Sparse atoms (about 20 in the box) keep the excess kurtosis visible.
  const NoiseSpec spec = make_spec(rep, 0.0, 0.005, 1.0);
  TrigField f(3, lat.L(), 1);
  f.add({1, 0, 0}, VecC::Constant(1, cplx(1.0, 0.0)));
  const auto x = pairing_samples(*g, spec, lat, {f}, {20000, 100000});
  const auto k4 = fourth_cumulant_estimate(x);
  const double closed = fourth_cumulant_closed(*g, spec, f, lat);
  const double sig = std::abs(k4.value) / k4.std_error;
  const double z = k4.z_score(closed);
  o.pass = sig > 5.0 && z < 3.0;
  o.detail = "k4 " + fmt("%.4g", k4.value.real()) + " +- " + fmt("%.2g", k4.std_error) + " (" + fmt("%.1f", sig) +
             " se from 0), closed " + fmt("%.4g", closed) + ", z " + fmt("%.2f", z);
  o.data = {{"k4", k4.value.real()}, {"std_error", k4.std_error}, {"closed", closed}, {"z", z}};
}

void loop_functionals(CriterionOutcome& o) {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const auto levy = radial_gauss(op.rep_in(), 0.5, 1.0);
  const auto map = ComponentMap::range(3, 0);
  VecR c0 = VecR::Zero(3), c1 = VecR::Zero(3);
  c1(0) = 4.0;
  const std::vector<std::pair<std::string, std::vector<Loop>>> cases{
      {"circle", {Loop::circle(c0, 1.0, 0, 1)}},
      {"pair", {Loop::circle(c0, 1.0, 0, 1), Loop::circle(c1, 1.0, 1, 2)}}};
  const std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
  bool ok = true;
  std::ostringstream det;
  json rows = json::array();
  for (const auto& [name, loops] : cases) {
    const auto cl = loop_schwinger_closed(g, levy, loops, map);
    const auto mc = loop_schwinger_mc(g, levy, loops, map, eps, {30000, 1000});
    const double z = mc.extrapolated.z_score(cl.value);
    ok = ok && cl.converged && z < 3.0 && mc.cauchy_monotone;
    det << name << ": closed " << fmt("%.5f", cl.value.real()) << ", mc " << fmt("%.5f", mc.extrapolated.value.real())
        << ", z " << fmt("%.2f", z) << (mc.cauchy_monotone ? ", cauchy monotone; " : ", cauchy NOT monotone; ");
    json cau = json::array();
    for (const auto& e : mc.cauchy) cau.push_back(e.value.real());
    rows.push_back({{"geometry", name}, {"closed", complex_json(cl.value)}, {"mc", complex_json(mc.extrapolated.value)},
                    {"std_error", mc.extrapolated.std_error}, {"z", z}, {"cauchy", cau}});
  }
  o.pass = ok;
  o.detail = det.str();
  o.detail.resize(o.detail.size() - 2);
  o.data = rows;
}

void stokes_identity(CriterionOutcome& o) {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  std::vector<VecR> verts;
  for (int i = 0; i < 48; ++i) {
    VecR v = VecR::Zero(3);
    v(0) = std::cos(2.0 * kPi * i / 48);
    v(1) = std::sin(2.0 * kPi * i / 48);
    verts.push_back(v);
  }
  const Loop loop = Loop::polyline(verts);
  const Surface surf = Surface::fan(loop);
  const auto map = ComponentMap::range(3, 0);
  CounterRng rng(8, Stream::Test, 0);
  double worst = 0.0, min_gain = std::numeric_limits<double>::infinity();
  for (int n = 0; n < 20;) {
    VecR x(3);
    for (int q = 0; q < 3; ++q) x(q) = -2.0 + 4.0 * rng.uniform();
    if (loop.distance(x.data()) < 0.1 || surf.distance(x.data()) < 0.1) continue;
    const VecR a = normal_vec(rng, 6, 1.0);
    const auto field = atom_field(g, {x}, {a});
    const auto coarse = stokes_check(field, loop, surf, map, 1);
    const auto fine = stokes_check(field, loop, surf, map, 2);
    worst = std::max(worst, fine.residual);
    min_gain = std::min(min_gain, coarse.residual / fine.residual);
    ++n;
  }
  o.pass = worst < 1e-4 && min_gain >= 4.0;
  o.detail = "max residual " + fmt("%.2e", worst) + ", min refinement gain " + fmt("%.1f", min_gain);
  o.data = {{"max_residual", worst}, {"min_gain", min_gain}};
}

void tail_summability(CriterionOutcome& o) {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const auto t = tail_summability_check(*g, radial_gauss(op.rep_in(), 1.0, 1.0), 10, 9);
  o.pass = t.pass;
  o.detail = "shell 10 sum " + fmt("%.2e", t.last) + ", trend " + fmt("%.3f", t.trend);
  o.data = {{"shell_sums", t.shell_sums}, {"trend", t.trend}};
}

json strip_runtime(json j) {
  j.erase("runtime_seconds");
  return j;
}

void determinism(CriterionOutcome& o) {
  std::vector<ExperimentConfig> cfgs;
  {
    ExperimentConfig c;  // Proca, mixed noise, characteristic functional
    c.gaussian = 0.25;
    c.levy_family = "radial_gauss";
    c.rho = 0.1;
    c.kind = "charfunc";
    c.test_functions = json::parse(R"([{"random": {"seed": 3, "count": 3, "kmax": 2}, "scale": 0.5}])");
    c.seed_count = 2000;
    cfgs.push_back(c);
    c.kind = "schwinger";
    c.order = 4;
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.kind = "kernel";
    c.n = 32;
    cfgs.push_back(c);
    c.kind = "solve";
    c.gaussian = 1.0;
    c.levy_family = "radial_gauss";
    c.rho = 0.2;
    cfgs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.kind = "loops";
    c.mode = "mc";
    c.levy_family = "radial_gauss";
    c.rho = 0.5;
    c.geometry = json::parse(R"({"k": 1, "circle": {"radius": 1.0}})");
    c.seed_count = 16;
    cfgs.push_back(c);
    c.kind = "stokes";
    c.geometry = json::parse(R"({"k": 1, "circle": {"radius": 1.0, "sides": 48}})");
    c.random_atoms = 4;
    cfgs.push_back(c);
    c.kind = "decay";
    c.rho = 1.0;
    cfgs.push_back(c);
  }
  const int saved = workers();
  int mismatches = 0;
  json rows = json::array();
  for (const auto& c : cfgs) {
    std::string out[2];
    for (int w = 0; w < 2; ++w) {
      set_workers(w == 0 ? 1 : 4);
      clear_kernel_cache();
      out[w] = strip_runtime(run_experiment(c, "").doc).dump();
    }
    const bool same = out[0] == out[1];
    mismatches += !same;
    rows.push_back({{"kind", c.kind}, {"identical", same}, {"bytes", out[0].size()}});
  }
  set_workers(saved);
  o.pass = mismatches == 0;
  o.detail = std::to_string(cfgs.size()) + " runs at workers 1 and 4, " + std::to_string(mismatches) + " mismatches";
  o.data = rows;
}

void invariance_suite(CriterionOutcome& o) {
  const auto op = proca_operator(1.0, 1.0, -1.0);
  const auto g = green_of(op);
  const Lattice& lat = desk_lattice();
  const auto spec = make_spec(op.rep_in(), 0.3, 0.5, 1.2);
  const auto vec = builtin_representation("vector", 3);
  CounterRng rng(11, Stream::Test, 0);
  double over = 0.0, conj_err = 0.0, rot_err = 0.0;
  for (int t = 0; t < 6; ++t) {
    const TrigField f = random_trig_field(rng, 3, lat.L(), 6, 3, 2) * 0.2;
    const cplx a = charfunc_solution(*g, spec, f, lat);
    over = std::max(over, std::abs(a) - 1.0);
    conj_err = std::max(conj_err, std::abs(charfunc_solution(*g, spec, -f, lat) - std::conj(a)));
    for (int plane = 0; plane < 3; ++plane) {
      std::vector<double> ang(3, 0.0);
      ang[plane] = kPi / 2;
      const TrigField rf = f.rotated(compose_rotations(vec, ang), compose_rotations(op.rep_in(), ang));
      rot_err = std::max(rot_err, std::abs(charfunc_solution(*g, spec, rf, lat) - a));
    }
  }
  // Loop functional of a unit circle against its translate.
  const auto levy = radial_gauss(op.rep_in(), 0.5, 1.0);
  const auto map = ComponentMap::range(3, 0);
  const Loop c = Loop::circle(VecR::Zero(3), 1.0, 0, 1);
  VecR s(3);
  s << 0.37, -1.2, 2.5;
  const cplx l0 = loop_schwinger_closed(g, levy, {c}, map).value;
  const cplx l1 = loop_schwinger_closed(g, levy, {c.translated(s)}, map).value;
  const double trans = std::abs(l0 - l1);
  o.pass = over <= 1e-12 && conj_err < 1e-12 && rot_err < 1e-8 && trans < 1e-6;
  o.detail = "max |G|-1 " + fmt("%.1e", over) + ", conj err " + fmt("%.1e", conj_err) + ", quarter-turn err " +
             fmt("%.1e", rot_err) + ", loop translation err " + fmt("%.1e", trans);
  o.data = {{"modulus_excess", over}, {"conjugation_error", conj_err}, {"rotation_error", rot_err},
            {"loop_translation_error", trans}};
}

struct Entry {
  const char* title;
  void (*fn)(CriterionOutcome&);
};

const Entry kEntries[kCriteria] = {
    {"covariance gate", covariance_gate},
    {"mass spectrum", mass_spectrum_oracle},
    {"green inverse", green_inverse},
    {"fractional two-point function", fractional_two_point},
    {"characteristic functional", charfunc_reproduction},
    {"non-gaussianity", non_gaussianity},
    {"loop functionals", loop_functionals},
    {"stokes identity", stokes_identity},
    {"tail summability", tail_summability},
    {"determinism", determinism},
    {"invariance suite", invariance_suite},
};

}  // namespace

CriterionOutcome run_criterion(int id) {
  if (id < 1 || id > kCriteria) fail("criterion id out of range");
  CriterionOutcome o;
  o.id = id;
  o.title = kEntries[id - 1].title;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    kEntries[id - 1].fn(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("error: ") + e.what();
  }
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

std::string format_outcome(const CriterionOutcome& o) {
  return std::string(o.pass ? "PASS" : "FAIL") + " c" + std::to_string(o.id) + " " + o.title + " | " + o.detail +
         " (" + fmt("%.1f", o.seconds) + " s)";
}

}  // namespace covspde::cli
