#include <doctest.h>

#include "config.hpp"
#include "runs.hpp"

#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

using namespace covspde;
using namespace covspde::cli;

namespace {

const std::string kData = COVSPDE_TEST_DATA;

int exit_code(const std::string& args) {
  const std::string cmd = std::string(COVSPDE_CLI) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string error_of(const json& j) {
  try {
    ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config round-trips through serialization") {
  const json src = json::parse(R"({
    "operator": {"name": "klein_gordon", "d": 3, "mass": 0.30000000000000004},
    "lattice": {"L": 12.5, "n": 32, "allow_small_box": true},
    "noise": {"gaussian": 0.1, "levy": {"family": "radial_exponential", "rho": 0.7, "scale": 1.3}},
    "observable": {"kind": "loops", "geometry": {"k": 1, "circle": {"radius": 0.5}}, "mode": "mc",
                   "eps": [0.3, 0.15], "components": [1, 2, 3], "signs": [1, -1, 1]},
    "seeds": {"first": 18446744073709551000, "count": 7},
    "tolerances": {"z_max": 2.5, "loop_rel_tol": 1e-4}
  })");
  const auto a = ExperimentConfig::from_json(src);
  const std::string once = a.to_json().dump();
  const auto b = ExperimentConfig::from_json(json::parse(once));
  CHECK(b.to_json().dump() == once);
  CHECK(b.mass == 0.30000000000000004);
  CHECK(b.seed_first == 18446744073709551000ull);
  CHECK(b.levy_family == "radial_exponential");
  CHECK(ExperimentConfig::from_json(ExperimentConfig{}.to_json()).to_json() == ExperimentConfig{}.to_json());
}

TEST_CASE("config errors carry the field path") {
  CHECK(error_of(json::parse(R"({"lattice": {"n": 30}})")).rfind("config.lattice.n", 0) == 0);
  CHECK(error_of(json::parse(R"({"lattice": {"spacing": 1}})")) == "config.lattice.spacing: unknown field");
  CHECK(error_of(json::parse(R"({"operator": {"name": "dirac"}})")).rfind("config.operator.name", 0) == 0);
  CHECK(error_of(json::parse(R"({"operator": {"mass": "one"}})")).rfind("config.operator.mass", 0) == 0);
  CHECK(error_of(json::parse(R"({"noise": {"levy": {"family": "cauchy"}}})")).rfind("config.noise.levy.family", 0) == 0);
  CHECK(error_of(json::parse(R"({"observable": {"kind": "loops", "geometry": "/nonexistent.json"}})"))
            .rfind("config.observable.geometry", 0) == 0);
  CHECK(error_of(json::parse(R"({"observable": {"geometry": {"k": 1, "vertices": [[0, 0, 0], [1, 0]]}}})"))
            .rfind("config.observable.geometry", 0) == 0);
  CHECK(error_of(json::parse(R"({"observable": {"components": [0, 1], "signs": [1]}})"))
            .rfind("config.observable.signs", 0) == 0);
  CHECK(error_of(json::parse(R"({"seeds": {"count": -1}})")).rfind("config.seeds.count", 0) == 0);
  CHECK(error_of(json::parse("[]")).rfind("config", 0) == 0);
}

TEST_CASE("characteristic functional of f = 0 is one") {
  const auto cfg = ExperimentConfig::load(kData + "/charfunc_zero.json");
  const auto r = run_experiment(cfg, "");
  CHECK(r.pass);
  const auto& e = r.doc["estimates"][0];
  CHECK(e["value"][0].get<double>() == 1.0);
  CHECK(e["value"][1].get<double>() == 0.0);
  CHECK(e["closed_form"][0].get<double>() == 1.0);
  CHECK(r.doc["seed_manifest"]["count"] == 20);
}

TEST_CASE("proca spectrum run reports masses m, m and covariance") {
  const auto r = run_experiment(ExperimentConfig::load(kData + "/spectrum_proca.json"), "");
  CHECK(r.pass);
  REQUIRE(r.doc["masses"].size() == 2);
  for (const auto& m : r.doc["masses"]) CHECK(m.get<double>() == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(r.doc["checks"]["covariance"].get<bool>());
  CHECK(r.doc["prefactor"][0].get<double>() == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("small box is refused unless overridden") {
  auto cfg = ExperimentConfig::load(kData + "/small_box.json");
  CHECK_THROWS_WITH_AS(run_experiment(cfg, ""), doctest::Contains("box too small"), Error);
  cfg.allow_small_box = true;
  CHECK_NOTHROW(run_experiment(cfg, ""));
}

TEST_CASE("inline and file geometry agree") {
  ExperimentConfig a;
  a.kind = "loops";
  a.mode = "closed";
  a.levy_family = "radial_gauss";
  a.rho = 0.5;
  a.loop_cutoff = 3.0;
  a.loop_rel_tol = 1e-2;
  a.geometry = kData + "/unit_circle.json";
  ExperimentConfig b = a;
  b.geometry = json::parse(R"({"k": 1, "circle": {"radius": 1.0}})");
  const auto ra = run_experiment(a, ""), rb = run_experiment(b, "");
  CHECK(ra.doc["closed"]["value"] == rb.doc["closed"]["value"]);
  CHECK(ra.pass);
}

TEST_CASE("csv companion") {
  const auto r = run_experiment(ExperimentConfig::load(kData + "/spectrum_proca.json"), "");
  const std::string csv = to_csv(r);
  CHECK(csv.rfind("index,mass_re,mass_im\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("command-line exit codes") {
  CHECK(exit_code("spectrum " + kData + "/spectrum_proca.json") == 0);
  CHECK(exit_code("schwinger " + kData + "/charfunc_zero.json --seeds 5..9") == 0);
  CHECK(exit_code("kernel " + kData + "/small_box.json") == 1);
  CHECK(exit_code("kernel " + kData + "/small_box.json --allow-small-box") == 0);
  CHECK(exit_code("kernel " + kData + "/missing.json") == 2);
  CHECK(exit_code("schwinger " + kData + "/charfunc_zero.json --seeds 9..5") == 2);
  CHECK(exit_code("frobnicate") == 2);
}
