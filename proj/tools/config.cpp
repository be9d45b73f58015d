#include "config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace covspde::cli {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

// Typed access to one JSON object with unknown-key detection.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_, "expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) bad(path_ + "." + k, "unknown field");
  }

  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k);
  }
  std::string sub(const std::string& k) const { return path_ + "." + k; }
  const json& raw(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }

  void num(const std::string& k, double& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number()) bad(sub(k), "expected a number");
    out = v.get<double>();
  }
  void integer(const std::string& k, int& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_integer()) bad(sub(k), "expected an integer");
    out = v.get<int>();
  }
  void u64(const std::string& k, std::uint64_t& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      bad(sub(k), "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void boolean(const std::string& k, bool& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_boolean()) bad(sub(k), "expected true or false");
    out = v.get<bool>();
  }
  void str(const std::string& k, std::string& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_string()) bad(sub(k), "expected a string");
    out = v.get<std::string>();
  }
  void nums(const std::string& k, std::vector<double>& out) {
    if (!has(k)) return;
    out = numbers(j_.at(k), sub(k));
  }
  void ints(const std::string& k, std::vector<int>& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_array()) bad(sub(k), "expected an array of integers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) bad(sub(k) + "[" + std::to_string(i) + "]", "expected an integer");
      out.push_back(v[i].get<int>());
    }
  }
  void rows(const std::string& k, std::vector<std::vector<double>>& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if (!v.is_array()) bad(sub(k), "expected an array of arrays");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(numbers(v[i], sub(k) + "[" + std::to_string(i) + "]"));
  }

  static std::vector<double> numbers(const json& v, const std::string& path) {
    if (!v.is_array()) bad(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) bad(path + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

bool power_of_two(int n) { return n >= 8 && (n & (n - 1)) == 0; }

json read_json_file(const std::string& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) bad(field, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    bad(field, "'" + path + "' is not valid JSON (" + e.what() + ")");
  }
}

VecR vec_of(const std::vector<double>& v) {
  VecR r(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Eigen::Index>(i)) = v[i];
  return r;
}

MatR matrix_of(const json& j, const std::string& path, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) bad(path, "expected " + std::to_string(rows) + " rows");
  MatR m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const auto r = Reader::numbers(j[i], path + "[" + std::to_string(i) + "]");
    if (static_cast<int>(r.size()) != cols)
      bad(path + "[" + std::to_string(i) + "]", "expected " + std::to_string(cols) + " entries");
    for (int c = 0; c < cols; ++c) m(i, c) = r[c];
  }
  return m;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  Reader top(j, "config");
  if (top.has("operator")) {
    Reader r(top.raw("operator"), "config.operator");
    r.str("name", c.op_name);
    r.integer("d", c.d);
    r.num("mass", c.mass);
    r.num("b", c.b);
    r.num("c", c.c);
    r.num("exponent", c.exponent);
    r.str("file", c.op_file);
  }
  const std::set<std::string> ops{"proca", "klein_gordon", "fractional", "file"};
  if (!ops.count(c.op_name)) bad("config.operator.name", "expected proca, klein_gordon, fractional or file");
  if (c.d < 2 || c.d > kMaxDim) bad("config.operator.d", "dimension must lie in [2, 4]");
  if (c.op_name == "proca" && c.d != 3) bad("config.operator.d", "the Proca operator lives in d = 3");
  if (!(c.mass >= 0.0)) bad("config.operator.mass", "must be non-negative");
  if (c.op_name == "file") {
    if (c.op_file.empty()) bad("config.operator.file", "required for name = file");
    if (!std::filesystem::exists(c.op_file)) bad("config.operator.file", "file '" + c.op_file + "' does not exist");
  }

  if (top.has("lattice")) {
    Reader r(top.raw("lattice"), "config.lattice");
    r.num("L", c.L);
    r.integer("n", c.n);
    r.boolean("allow_small_box", c.allow_small_box);
  }
  if (!(c.L > 0.0)) bad("config.lattice.L", "must be positive");
  if (!power_of_two(c.n)) bad("config.lattice.n", "must be a power of two >= 8");

  if (top.has("noise")) {
    Reader r(top.raw("noise"), "config.noise");
    r.num("gaussian", c.gaussian);
    if (r.has("levy")) {
      Reader l(r.raw("levy"), "config.noise.levy");
      l.str("family", c.levy_family);
      l.num("rho", c.rho);
      l.num("scale", c.scale);
      l.num("rmax", c.rmax);
      l.nums("direction", c.direction);
      if (c.levy_family.empty()) bad("config.noise.levy.family", "required");
    }
  }
  if (!(c.gaussian >= 0.0)) bad("config.noise.gaussian", "must be non-negative");
  if (!c.levy_family.empty()) {
    const std::set<std::string> fams{"radial_gauss", "radial_exponential", "two_point"};
    if (!fams.count(c.levy_family))
      bad("config.noise.levy.family", "expected radial_gauss, radial_exponential or two_point");
    if (!(c.rho >= 0.0)) bad("config.noise.levy.rho", "must be non-negative");
  }

  if (top.has("observable")) {
    Reader r(top.raw("observable"), "config.observable");
    r.str("kind", c.kind);
    r.integer("order", c.order);
    if (r.has("test_functions")) {
      c.test_functions = r.raw("test_functions");
      if (!c.test_functions.is_array()) bad("config.observable.test_functions", "expected an array");
    }
    if (r.has("geometry")) {
      c.geometry = r.raw("geometry");
      if (c.geometry.is_object()) {
        parse_geometry(c.geometry, "config.observable.geometry");
      } else if (c.geometry.is_string()) {
        const std::string path = c.geometry.get<std::string>();
        if (!std::filesystem::exists(path)) bad("config.observable.geometry", "file '" + path + "' does not exist");
      } else if (!c.geometry.is_null()) {
        bad("config.observable.geometry", "expected a file path or a geometry object");
      }
    }
    r.str("mode", c.mode);
    r.nums("eps", c.eps);
    r.ints("components", c.components);
    r.nums("signs", c.signs);
    r.rows("atoms", c.atoms);
    r.rows("marks", c.marks);
    r.integer("random_atoms", c.random_atoms);
    r.integer("refine", c.refine);
    r.integer("n_shells", c.n_shells);
    r.nums("radii", c.radii);
  }
  const std::set<std::string> kinds{"charfunc", "schwinger", "loops", "stokes", "decay", "spectrum", "kernel", "solve"};
  if (!kinds.count(c.kind)) bad("config.observable.kind", "unknown observable '" + c.kind + "'");
  if (c.order < 1 || c.order > 4) bad("config.observable.order", "must lie in [1, 4]");
  if (c.mode != "closed" && c.mode != "mc" && c.mode != "both")
    bad("config.observable.mode", "expected closed, mc or both");
  if (c.signs.size() && c.signs.size() != c.components.size())
    bad("config.observable.signs", "needs one sign per component");
  if (c.refine < 1 || c.refine > 12) bad("config.observable.refine", "must lie in [1, 12]");
  if (c.n_shells < 0) bad("config.observable.n_shells", "must be non-negative");
  if (c.random_atoms < 0) bad("config.observable.random_atoms", "must be non-negative");

  if (top.has("seeds")) {
    Reader r(top.raw("seeds"), "config.seeds");
    r.u64("first", c.seed_first);
    r.u64("count", c.seed_count);
  }
  if (top.has("tolerances")) {
    Reader r(top.raw("tolerances"), "config.tolerances");
    r.num("z_max", c.z_max);
    r.num("kernel_residual", c.kernel_residual);
    r.num("stokes_residual", c.stokes_residual);
    r.num("loop_rel_tol", c.loop_rel_tol);
    r.num("loop_cutoff", c.loop_cutoff);
    r.num("tail_threshold", c.tail_threshold);
  }
  if (!(c.z_max > 0.0)) bad("config.tolerances.z_max", "must be positive");
  if (!(c.loop_rel_tol > 0.0)) bad("config.tolerances.loop_rel_tol", "must be positive");
  if (top.has("output")) {
    Reader r(top.raw("output"), "config.output");
    r.str("json", c.out_json);
    r.str("csv", c.out_csv);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_json(read_json_file(path, "config"));
}

json ExperimentConfig::to_json() const {
  json j;
  j["operator"] = {{"name", op_name}, {"d", d},         {"mass", mass},     {"b", b},
                   {"c", c},          {"exponent", exponent}, {"file", op_file}};
  j["lattice"] = {{"L", L}, {"n", n}, {"allow_small_box", allow_small_box}};
  json noise = {{"gaussian", gaussian}};
  if (!levy_family.empty())
    noise["levy"] = {{"family", levy_family}, {"rho", rho}, {"scale", scale}, {"rmax", rmax}, {"direction", direction}};
  j["noise"] = noise;
  j["observable"] = {{"kind", kind},           {"order", order},   {"test_functions", test_functions},
                     {"geometry", geometry},   {"mode", mode},     {"eps", eps},
                     {"components", components}, {"signs", signs}, {"atoms", atoms},
                     {"marks", marks},         {"random_atoms", random_atoms}, {"refine", refine},
                     {"n_shells", n_shells},   {"radii", radii}};
  j["seeds"] = {{"first", seed_first}, {"count", seed_count}};
  j["tolerances"] = {{"z_max", z_max},
                     {"kernel_residual", kernel_residual},
                     {"stokes_residual", stokes_residual},
                     {"loop_rel_tol", loop_rel_tol},
                     {"loop_cutoff", loop_cutoff},
                     {"tail_threshold", tail_threshold}};
  j["output"] = {{"json", out_json}, {"csv", out_csv}};
  return j;
}

std::optional<CovariantOperator> build_operator(const ExperimentConfig& c) {
  if (c.op_name == "proca") return proca_operator(c.mass, c.b, c.c);
  if (c.op_name == "klein_gordon") return klein_gordon_operator(c.d, c.mass);
  if (c.op_name == "fractional") return std::nullopt;
  // Custom operator file: {"rep_in": name, "rep_out": name, "B": [N x N per axis], "M": N x N}.
  const json j = read_json_file(c.op_file, "config.operator.file");
  Reader r(j, "operator_file");
  std::string rin = "trivial", rout;
  r.str("rep_in", rin);
  r.str("rep_out", rout);
  if (rout.empty()) rout = rin;
  int d = c.d;
  r.integer("d", d);
  std::string name = "custom";
  r.str("name", name);
  const Representation ri = builtin_representation(rin, d), ro = builtin_representation(rout, d);
  const int N = ri.dim();
  if (!r.has("B") || !r.raw("B").is_array() || static_cast<int>(r.raw("B").size()) != d)
    bad("operator_file.B", "expected one matrix per axis");
  std::vector<MatR> B;
  for (int k = 0; k < d; ++k) B.push_back(matrix_of(r.raw("B")[k], "operator_file.B[" + std::to_string(k) + "]", N, N));
  if (!r.has("M")) bad("operator_file.M", "required");
  const MatR M = matrix_of(r.raw("M"), "operator_file.M", N, N);
  return CovariantOperator(ri, ro, std::move(B), M, name);
}

std::shared_ptr<const GreenFunction> build_green(const ExperimentConfig& c,
                                                 const std::optional<CovariantOperator>& op) {
  if (op) return green_of(*op);
  return GreenFunction::scalar_power(c.d, c.mass, c.exponent);
}

std::optional<LevyMeasure> build_levy(const ExperimentConfig& c, const Representation& rep) {
  if (c.levy_family.empty()) return std::nullopt;
  LevyMeasure::Params p;
  p.rho = c.rho;
  p.scale = c.scale;
  p.rmax = c.rmax;
  if (!c.direction.empty()) p.v = vec_of(c.direction);
  return builtin_levy(c.levy_family, rep, p);
}

NoiseSpec build_noise(const ExperimentConfig& c, const Representation& rep) {
  return NoiseSpec(rep, c.gaussian * MatR::Identity(rep.dim(), rep.dim()), build_levy(c, rep));
}

Setup build_setup(const ExperimentConfig& c) {
  Setup s;
  s.op = build_operator(c);
  s.green = build_green(c, s.op);
  s.lat = Lattice(s.green->d(), c.L, c.n);
  s.noise = build_noise(c, s.green->rep_in());
  return s;
}

std::vector<TrigField> build_test_functions(const ExperimentConfig& c, int comps) {
  std::vector<TrigField> out;
  for (std::size_t i = 0; i < c.test_functions.size(); ++i) {
    const std::string path = "config.observable.test_functions[" + std::to_string(i) + "]";
    Reader r(c.test_functions[i], path);
    TrigField f(c.d, c.L, comps);
    if (r.has("modes")) {
      const json& ms = r.raw("modes");
      if (!ms.is_array()) bad(path + ".modes", "expected an array");
      for (std::size_t m = 0; m < ms.size(); ++m) {
        const std::string mp = path + ".modes[" + std::to_string(m) + "]";
        Reader mr(ms[m], mp);
        std::vector<int> k;
        mr.ints("k", k);
        if (static_cast<int>(k.size()) != c.d) bad(mp + ".k", "expected " + std::to_string(c.d) + " integers");
        if (!mr.has("c")) bad(mp + ".c", "required");
        const json& cj = mr.raw("c");
        if (!cj.is_array() || static_cast<int>(cj.size()) != comps)
          bad(mp + ".c", "expected " + std::to_string(comps) + " [re, im] pairs");
        VecC coef(comps);
        for (int a = 0; a < comps; ++a) {
          const auto ri = Reader::numbers(cj[a], mp + ".c[" + std::to_string(a) + "]");
          if (ri.size() != 2) bad(mp + ".c[" + std::to_string(a) + "]", "expected [re, im]");
          coef(a) = cplx(ri[0], ri[1]);
        }
        std::array<int, kMaxDim> kk{};
        for (int q = 0; q < c.d; ++q) kk[q] = k[q];
        f.add(kk, coef);
      }
    }
    if (r.has("random")) {
      Reader rr(r.raw("random"), path + ".random");
      std::uint64_t seed = 0;
      int count = 3, kmax = 2;
      rr.u64("seed", seed);
      rr.integer("count", count);
      rr.integer("kmax", kmax);
      if (count < 0 || kmax < 0) bad(path + ".random", "count and kmax must be non-negative");
      CounterRng rng(seed, Stream::Test, i);
      f = f + random_trig_field(rng, c.d, c.L, comps, count, kmax);
    }
    double scale = 1.0;
    r.num("scale", scale);
    out.push_back(f * scale);
  }
  return out;
}

ComponentMap build_component_map(const ExperimentConfig& c, int k) {
  ComponentMap m;
  if (!c.components.empty()) {
    m.comp = c.components;
    m.sign = c.signs.empty() ? std::vector<double>(m.comp.size(), 1.0) : c.signs;
    return m;
  }
  if (k == 1) {
    if (c.op_name == "proca") return ComponentMap::range(3, 0);
    if (c.op_name == "klein_gordon") return ComponentMap::range(c.d, 1);
    bad("config.observable.components", "required for this operator");
  }
  // k = 2 in d = 3: Hodge dual of the vector slot.
  if (c.op_name == "proca" || (c.op_name == "klein_gordon" && c.d == 3)) {
    const int off = c.op_name == "proca" ? 0 : 1;
    m.comp = {off + 2, off + 1, off + 0};
    m.sign = {1.0, -1.0, 1.0};
    return m;
  }
  bad("config.observable.components", "required for this operator");
}

namespace {

Loop parse_loop(Reader& r, const std::string& path, int d) {
  if (r.has("circle")) {
    Reader cr(r.raw("circle"), path + ".circle");
    std::vector<double> center;
    double radius = 1.0;
    std::vector<int> plane{0, 1};
    cr.nums("center", center);
    cr.num("radius", radius);
    cr.ints("plane", plane);
    int sides = 0;  // > 0: inscribed regular polygon instead of arcs
    cr.integer("sides", sides);
    if (center.empty()) center.assign(d, 0.0);
    if (plane.size() != 2) bad(path + ".circle.plane", "expected two axes");
    if (sides == 0) return Loop::circle(vec_of(center), radius, plane[0], plane[1]);
    if (sides < 3) bad(path + ".circle.sides", "must be at least 3");
    if (plane[0] < 0 || plane[1] < 0 || plane[0] >= int(center.size()) || plane[1] >= int(center.size()))
      bad(path + ".circle.plane", "axis out of range");
    std::vector<VecR> verts;
    for (int i = 0; i < sides; ++i) {
      VecR x = vec_of(center);
      x(plane[0]) += radius * std::cos(2.0 * kPi * i / sides);
      x(plane[1]) += radius * std::sin(2.0 * kPi * i / sides);
      verts.push_back(x);
    }
    return Loop::polyline(verts);
  }
  std::vector<std::vector<double>> v;
  r.rows("vertices", v);
  std::vector<VecR> verts;
  for (const auto& x : v) verts.push_back(vec_of(x));
  return Loop::polyline(verts);
}

}  // namespace

Geometry parse_geometry(const json& j, const std::string& where) {
  Geometry g;
  auto one = [&](const json& item, const std::string& path) {
    Reader r(item, path);
    int k = 1;
    r.integer("k", k);
    int d = 3;
    r.integer("d", d);
    try {
      if (k == 1) {
        g.loops.push_back(parse_loop(r, path, d));
      } else if (k == 2) {
        Surface s;
        std::vector<std::vector<double>> v;
        r.rows("vertices", v);
        if (v.empty()) bad(path + ".vertices", "required");
        s.d = static_cast<int>(v.front().size());
        for (const auto& x : v) s.vertices.push_back(vec_of(x));
        if (!r.has("triangles") || !r.raw("triangles").is_array()) bad(path + ".triangles", "expected an array");
        for (const auto& t : r.raw("triangles")) {
          if (!t.is_array() || t.size() != 3) bad(path + ".triangles", "expected index triples");
          std::array<int, 3> tri{t[0].get<int>(), t[1].get<int>(), t[2].get<int>()};
          for (int q : tri)
            if (q < 0 || q >= static_cast<int>(v.size())) bad(path + ".triangles", "vertex index out of range");
          s.triangles.push_back(tri);
        }
        g.surfaces.push_back(std::move(s));
      } else {
        bad(path + ".k", "only k = 1 loops and k = 2 surfaces are supported");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      bad(path, e.what());
    }
  };
  if (j.is_object() && j.contains("cocycles")) {
    const json& arr = j.at("cocycles");
    if (!arr.is_array()) bad(where + ".cocycles", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) one(arr[i], where + ".cocycles[" + std::to_string(i) + "]");
  } else {
    one(j, where);
  }
  return g;
}

Geometry config_geometry(const ExperimentConfig& c) {
  if (c.geometry.is_string()) return load_geometry(c.geometry.get<std::string>());
  if (c.geometry.is_object()) return parse_geometry(c.geometry, "config.observable.geometry");
  throw ConfigError("config.observable.geometry: required for " + c.kind);
}

Geometry load_geometry(const std::string& path) {
  return parse_geometry(read_json_file(path, "config.observable.geometry"), "geometry");
}

}  // namespace covspde::cli
