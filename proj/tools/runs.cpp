#include "runs.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace covspde::cli {

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json estimate_json(const SchwingerEstimate& e) {
  return {{"descriptor", e.descriptor},
          {"value", complex_json(e.value)},
          {"std_error", e.std_error},
          {"n_samples", e.n_samples},
          {"method", e.method == SchwingerEstimate::Method::MonteCarlo ? "monte_carlo" : "closed_form"}};
}

std::string to_csv(const RunResult& r) {
  std::ostringstream os;
  for (std::size_t i = 0; i < r.csv_header.size(); ++i) os << (i ? "," : "") << r.csv_header[i];
  os << '\n';
  char buf[64];
  for (const auto& row : r.csv_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      os << (i ? "," : "") << buf;
    }
    os << '\n';
  }
  return os.str();
}

namespace {

void check(RunResult& r, const std::string& name, bool ok) {
  r.doc["checks"][name] = ok;
  r.pass = r.pass && ok;
}

SeedRange seeds_of(const ExperimentConfig& c) { return {c.seed_first, c.seed_count}; }

RunResult run_spectrum(const ExperimentConfig& c, const Setup& s) {
  RunResult r;
  const MassSpectrum ms = s.op ? mass_spectrum(*s.op) : s.green->spectrum();
  json masses = json::array(), imag = json::array();
  for (const auto& m : ms.masses) {
    masses.push_back(m.real());
    imag.push_back(m.imag());
  }
  r.doc["masses"] = masses;
  r.doc["masses_imag"] = imag;
  r.doc["prefactor"] = complex_json(ms.prefactor);
  r.doc["admissible"] = ms.admissible;
  r.doc["strictly_positive"] = ms.strictly_positive;
  r.doc["degree_ok"] = ms.degree_ok;
  r.doc["invariance_residual"] = ms.invariance_residual;
  check(r, "admissible", ms.admissible);
  if (s.op) {
    const auto cov = check_covariance(*s.op);
    r.doc["covariance_residual"] = cov.residual;
    check(r, "covariance", cov.pass);
  }
  r.csv_header = {"index", "mass_re", "mass_im"};
  for (std::size_t i = 0; i < ms.masses.size(); ++i)
    r.csv_rows.push_back({double(i), ms.masses[i].real(), ms.masses[i].imag()});
  return r;
}

RunResult run_check_op(const ExperimentConfig& c) {
  const auto op = build_operator(c);
  if (!op) fail("check-op needs a first-order covariant operator");
  RunResult r;
  const auto rep = check_covariance(*op);
  r.doc["covariance"] = {{"residual", rep.residual}, {"finite_residual", rep.finite_residual}, {"pass", rep.pass}};
  check(r, "covariance", rep.pass);
  const MassSpectrum ms = mass_spectrum(*op);
  json masses = json::array();
  for (const auto& m : ms.masses) masses.push_back(complex_json(m));
  r.doc["spectrum"] = {{"masses", masses},
                       {"prefactor", complex_json(ms.prefactor)},
                       {"admissible", ms.admissible},
                       {"strictly_positive", ms.strictly_positive}};
  r.csv_header = {"residual", "finite_residual"};
  r.csv_rows.push_back({rep.residual, rep.finite_residual});
  return r;
}

RunResult run_kernel(const ExperimentConfig& c, const Setup& s) {
  RunResult r;
  const auto k = lattice_kernel(*s.green, s.lat, c.allow_small_box);
  const double res = lattice_kernel_residual(*s.green, *k);
  r.doc["residual"] = res;
  check(r, "kernel_residual", res < c.kernel_residual);
  // Point kernel against lattice kernel at lattice sites with 1 <= |x| <= 4
  // along the axes and diagonals (reported, not checked: the lattice kernel
  // is band limited).
  r.csv_header = {"x0", "x1", "x2", "point_max", "lattice_max", "rel_diff"};
  double worst = 0.0;
  const double a = s.lat.a();
  const int d = s.lat.d();
  const int steps = static_cast<int>(std::floor(4.0 / a));
  for (int dir = 0; dir < 2; ++dir)
    for (int i = 1; i <= steps; ++i) {
      std::array<int, kMaxDim> co{};
      co[0] = i;
      if (dir == 1)
        for (int q = 1; q < d; ++q) co[q] = i;
      VecR x(d);
      for (int q = 0; q < d; ++q) x(q) = co[q] * a;
      const double rr = x.norm();
      if (rr < 1.0 || rr > 4.0) continue;
      std::array<int, kMaxDim> wrapped{};
      for (int q = 0; q < d; ++q) wrapped[q] = co[q];
      const MatR P = s.green->point(x);
      const MatR Lk = k->at(s.lat.index(wrapped));
      const double rel = max_abs(P - Lk) / std::max(max_abs(P), 1e-300);
      worst = std::max(worst, rel);
      std::vector<double> row(3, 0.0);
      for (int q = 0; q < std::min(d, 3); ++q) row[q] = x(q);
      row.push_back(max_abs(P));
      row.push_back(max_abs(Lk));
      row.push_back(rel);
      r.csv_rows.push_back(row);
    }
  r.doc["point_lattice_rel_max"] = worst;
  return r;
}

RunResult run_solve(const ExperimentConfig& c, const Setup& s) {
  RunResult r;
  const auto noise = sample_noise(s.noise, s.lat, c.seed_first);
  const auto field = solve_lattice(s.green, noise);
  const double res = solve_residual(field, noise);
  r.doc["seed"] = c.seed_first;
  r.doc["atoms"] = noise.atoms();
  r.doc["residual"] = res;
  check(r, "solve_residual", res < 1e-10);
  const auto& v = field.lattice_values();
  const int N = v.comps;
  json mean = json::array(), mx = json::array();
  for (int a = 0; a < N; ++a) {
    double m = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < s.lat.sites(); ++i) {
      m += v.v[i * N + a];
      peak = std::max(peak, std::fabs(v.v[i * N + a]));
    }
    mean.push_back(m / s.lat.sites());
    mx.push_back(peak);
  }
  r.doc["component_mean"] = mean;
  r.doc["component_max_abs"] = mx;
  r.csv_header = {"i"};
  for (int a = 0; a < N; ++a) r.csv_header.push_back("phi" + std::to_string(a));
  for (int i = 0; i < s.lat.n(); ++i) {
    std::array<int, kMaxDim> co{};
    co[0] = i;
    const std::size_t site = s.lat.index(co);
    std::vector<double> row{double(i)};
    for (int a = 0; a < N; ++a) row.push_back(v.v[site * N + a]);
    r.csv_rows.push_back(row);
  }
  return r;
}

RunResult run_charfunc(const ExperimentConfig& c, const Setup& s) {
  RunResult r;
  const auto fs = build_test_functions(c, s.green->dim());
  if (fs.empty()) throw ConfigError("config.observable.test_functions: at least one test function required");
  r.csv_header = {"index", "mc_re", "mc_im", "std_error", "closed_re", "closed_im", "z_score"};
  json est = json::array();
  bool ok = true;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const cplx closed = charfunc_solution(*s.green, s.noise, fs[i], s.lat);
    const auto mc = charfunc_mc(*s.green, s.noise, s.lat, fs[i], seeds_of(c));
    const double z = mc.z_score(closed);
    json e = estimate_json(mc);
    e["closed_form"] = complex_json(closed);
    e["z_score"] = z;
    est.push_back(e);
    ok = ok && z < c.z_max;
    r.csv_rows.push_back({double(i), mc.value.real(), mc.value.imag(), mc.std_error, closed.real(), closed.imag(), z});
  }
  r.doc["estimates"] = est;
  check(r, "z_scores", ok);
  return r;
}

RunResult run_schwinger(const ExperimentConfig& c, const Setup& s) {
  if (c.kind == "charfunc") return run_charfunc(c, s);
  RunResult r;
  auto fs = build_test_functions(c, s.green->dim());
  const int n = c.order;
  if (fs.size() == 1)
    fs.assign(n, fs.front());
  else if (static_cast<int>(fs.size()) != n)
    throw ConfigError("config.observable.test_functions: need one or exactly order test functions");
  const auto mc = npoint_mc(*s.green, s.noise, s.lat, fs, seeds_of(c));
  std::optional<double> closed;
  if (n % 2 == 1) {
    closed = 0.0;  // symmetric noise
  } else if (n == 2) {
    closed = two_point_closed(*s.green, s.noise, fs[0], fs[1], s.lat);
  } else {
    bool same = true;
    const double n0 = fs[0].inner(fs[0]);
    for (const auto& f : fs) {
      const double dist2 = f.inner(f) - 2.0 * f.inner(fs[0]) + n0;
      same = same && dist2 <= 1e-12 * std::max(n0, 1e-300);
    }
    const double wick = wick_four_point(*s.green, s.noise, fs, s.lat);
    if (s.noise.rho() == 0.0)
      closed = wick;
    else if (same)
      closed = wick + fourth_cumulant_closed(*s.green, s.noise, fs[0], s.lat);
  }
  json e = estimate_json(mc);
  e["closed_form"] = closed ? json(*closed) : json(nullptr);
  const double z = closed ? mc.z_score(*closed) : 0.0;
  e["z_score"] = closed ? json(z) : json(nullptr);
  r.doc["order"] = n;
  r.doc["estimates"] = json::array({e});
  if (closed) check(r, "z_score", z < c.z_max);
  r.csv_header = {"order", "mc_re", "std_error", "closed", "z_score"};
  r.csv_rows.push_back({double(n), mc.value.real(), mc.std_error, closed.value_or(std::nan("")), z});
  return r;
}

LevyMeasure levy_or_empty(const ExperimentConfig& c, const Representation& rep) {
  if (auto l = build_levy(c, rep)) return *l;
  LevyMeasure::Params p;
  p.rho = 0.0;
  return builtin_levy("radial_gauss", rep, p);
}

RunResult run_loops(const ExperimentConfig& c, const Setup& s) {
  RunResult r;
  const Geometry geo = config_geometry(c);
  if (!geo.surfaces.empty()) throw ConfigError("config.observable.geometry: loop functionals take k = 1 loops");
  const ComponentMap map = build_component_map(c, 1);
  const LevyMeasure levy = levy_or_empty(c, s.green->rep_in());
  LoopOptions opt;
  opt.cutoff = c.loop_cutoff;
  opt.rel_tol = c.loop_rel_tol;
  std::optional<LoopClosedResult> closed;
  if (c.mode != "mc") {
    if (s.noise.has_gaussian()) fail("closed loop functional needs pure Poisson noise");
    closed = loop_schwinger_closed(s.green, levy, geo.loops, map, opt);
    r.doc["closed"] = {{"value", complex_json(closed->value)},
                       {"error_estimate", closed->error_estimate},
                       {"tail_bound", closed->tail_bound},
                       {"evaluations", closed->evaluations},
                       {"converged", closed->converged},
                       {"certification", closed->certification},
                       {"cumulant_growth",
                        {{"with_i", closed->growth.with_i},
                         {"without_i", closed->growth.without_i},
                         {"small_exponent", std::isfinite(closed->growth.small_exponent)
                                                ? json(closed->growth.small_exponent)
                                                : json(nullptr)}}}};
    check(r, "closed_converged", closed->converged);
  }
  r.csv_header = {"eps", "re", "im", "std_error", "cauchy", "cauchy_se"};
  if (c.mode != "closed") {
    const LoopMcResult mc = s.noise.has_gaussian()
                                ? loop_schwinger_mc(s.green, s.noise, s.lat, geo.loops, map, c.eps, seeds_of(c), opt)
                                : loop_schwinger_mc(s.green, levy, geo.loops, map, c.eps, seeds_of(c), opt);
    json per = json::array(), cau = json::array();
    for (std::size_t l = 0; l < mc.per_eps.size(); ++l) {
      json e = estimate_json(mc.per_eps[l]);
      e["eps"] = mc.eps[l];
      per.push_back(e);
      const bool has_c = l < mc.cauchy.size();
      r.csv_rows.push_back({mc.eps[l], mc.per_eps[l].value.real(), mc.per_eps[l].value.imag(),
                            mc.per_eps[l].std_error, has_c ? mc.cauchy[l].value.real() : std::nan(""),
                            has_c ? mc.cauchy[l].std_error : std::nan("")});
    }
    for (const auto& e : mc.cauchy) cau.push_back(estimate_json(e));
    r.doc["mc"] = {{"per_eps", per},
                   {"cauchy", cau},
                   {"cauchy_monotone", mc.cauchy_monotone},
                   {"extrapolated", estimate_json(mc.extrapolated)},
                   {"warnings", mc.warnings}};
    check(r, "cauchy_monotone", mc.cauchy_monotone);
    if (closed) {
      const double z = mc.extrapolated.z_score(closed->value);
      r.doc["z_score"] = z;
      check(r, "z_score", z < c.z_max);
    }
  }
  return r;
}

RunResult run_stokes(const ExperimentConfig& c, const Setup& s) {
  RunResult r;
  const Geometry geo = config_geometry(c);
  if (geo.loops.size() != 1) throw ConfigError("config.observable.geometry: stokes needs exactly one loop");
  const Loop& loop = geo.loops.front();
  const Surface surf = geo.surfaces.empty() ? Surface::fan(loop) : geo.surfaces.front();
  const ComponentMap map = build_component_map(c, 1);
  const int d = s.green->d(), N = s.green->dim();
  if (c.atoms.size() != c.marks.size()) throw ConfigError("config.observable.marks: one mark per atom required");
  std::vector<VecR> pos, marks;
  for (std::size_t i = 0; i < c.atoms.size(); ++i) {
    if (static_cast<int>(c.atoms[i].size()) != d || static_cast<int>(c.marks[i].size()) != N)
      throw ConfigError("config.observable.atoms[" + std::to_string(i) + "]: wrong dimension");
    pos.push_back(Eigen::Map<const VecR>(c.atoms[i].data(), d));
    marks.push_back(Eigen::Map<const VecR>(c.marks[i].data(), N));
  }
  // Random atoms in the loop's bounding box padded by 1, outside a 0.05 tube.
  VecR lo, hi;
  loop.bounds(lo, hi);
  lo.array() -= 1.0;
  hi.array() += 1.0;
  CounterRng rng(c.seed_first, Stream::Test, 0x5709);
  for (int i = 0; i < c.random_atoms;) {
    VecR x(d), a(N);
    for (int q = 0; q < d; ++q) x(q) = lo(q) + (hi(q) - lo(q)) * rng.uniform();
    for (int q = 0; q < N; ++q) a(q) = rng.normal();
    if (surf.distance(x.data()) < 0.05 || loop.distance(x.data()) < 0.05) continue;
    pos.push_back(x);
    marks.push_back(a);
    ++i;
  }
  r.csv_header = {"atom", "loop_value", "surface_value", "residual", "coarse_residual"};
  json items = json::array();
  bool all_small = true, all_drop = true;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const auto f = atom_field(s.green, {pos[i]}, {marks[i]});
    const auto fine = stokes_check(f, loop, surf, map, c.refine);
    json it = {{"position", std::vector<double>(pos[i].data(), pos[i].data() + d)},
               {"loop_value", fine.loop_value},
               {"surface_value", fine.surface_value},
               {"residual", fine.residual}};
    double coarse_res = std::nan("");
    if (c.refine > 1) {
      const auto coarse = stokes_check(f, loop, surf, map, c.refine - 1);
      coarse_res = coarse.residual;
      it["coarse_residual"] = coarse.residual;
      all_drop = all_drop && fine.residual * 4.0 <= coarse.residual;
    }
    all_small = all_small && fine.residual < c.stokes_residual;
    items.push_back(it);
    r.csv_rows.push_back({double(i), fine.loop_value, fine.surface_value, fine.residual, coarse_res});
  }
  r.doc["atoms"] = items;
  check(r, "residual", all_small);
  if (c.refine > 1) check(r, "refinement_gain", all_drop);
  return r;
}

RunResult run_decay(const ExperimentConfig& c, const Setup& s) {
  RunResult r;
  std::vector<double> radii = c.radii;
  if (radii.empty())
    for (int k = 2; k <= 10; ++k) radii.push_back(k / s.green->mass_gap());
  const auto prof = decay_profile(*s.green, radii);
  r.doc["decay"] = {{"radii", prof.radii},
                    {"shell_max", prof.shell_max},
                    {"rate", prof.rate ? json(*prof.rate) : json(nullptr)},
                    {"mass_gap", prof.mass_gap},
                    {"pass", prof.pass}};
  check(r, "decay", prof.pass);
  r.csv_header = {"kind", "x", "value"};
  for (std::size_t i = 0; i < prof.radii.size(); ++i) r.csv_rows.push_back({0.0, prof.radii[i], prof.shell_max[i]});
  if (auto levy = build_levy(c, s.green->rep_in())) {
    const auto t = tail_summability_check(*s.green, *levy, c.n_shells, c.seed_first, c.tail_threshold);
    r.doc["tail"] = {{"shell_sums", t.shell_sums}, {"last", t.last}, {"trend", t.trend}, {"pass", t.pass}};
    check(r, "tail", t.pass);
    for (std::size_t i = 0; i < t.shell_sums.size(); ++i) r.csv_rows.push_back({1.0, double(i + 1), t.shell_sums[i]});
  }
  return r;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& c, const std::string& command) {
  const std::string what = command.empty() ? c.kind : command;
  RunResult r;
  if (what == "check-op") {
    r = run_check_op(c);
  } else {
    const Setup s = build_setup(c);
    if (what == "spectrum") r = run_spectrum(c, s);
    else if (what == "kernel") r = run_kernel(c, s);
    else if (what == "solve") r = run_solve(c, s);
    else if (what == "schwinger" || what == "charfunc") r = run_schwinger(c, s);
    else if (what == "loops") r = run_loops(c, s);
    else if (what == "stokes") r = run_stokes(c, s);
    else if (what == "decay") r = run_decay(c, s);
    else fail("unknown command '" + what + "'");
  }
  json doc;
  doc["command"] = what;
  doc["config"] = c.to_json();
  doc["seed_manifest"] = {{"first", c.seed_first}, {"count", c.seed_count}};
  for (auto& [k, v] : r.doc.items()) doc[k] = v;
  if (!doc.contains("checks")) doc["checks"] = json::object();
  doc["pass"] = r.pass;
  r.doc = std::move(doc);
  return r;
}

}  // namespace covspde::cli
