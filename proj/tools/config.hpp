#pragma once

#include "covspde/cosurface.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace covspde::cli {

using json = nlohmann::ordered_json;

/// Raised for malformed configurations; the message starts with the field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ExperimentConfig {
  // operator
  std::string op_name = "proca";  // proca | klein_gordon | fractional | file
  int d = 3;
  double mass = 1.0;
  double b = 1.0, c = -1.0;  // proca signs
  double exponent = 0.5;     // fractional lambda
  std::string op_file;

  // lattice
  double L = 16.0;
  int n = 64;
  bool allow_small_box = false;

  // noise: A = gaussian * I plus an optional Levy family
  double gaussian = 0.0;
  std::string levy_family;  // empty: no Poisson part
  double rho = 0.0, scale = 1.0, rmax = 0.0;
  std::vector<double> direction;

  // observable
  std::string kind = "charfunc";  // charfunc | schwinger | loops | stokes | decay | spectrum | kernel | solve
  int order = 2;
  json test_functions = json::array();
  json geometry;  // null, a file path, or an inline geometry document
  std::string mode = "both";  // loops: closed | mc | both
  std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
  std::vector<int> components;  // cocycle component map (default by operator)
  std::vector<double> signs;
  std::vector<std::vector<double>> atoms, marks;  // stokes
  int random_atoms = 0;
  int refine = 2;
  int n_shells = 10;
  std::vector<double> radii;

  // seeds
  std::uint64_t seed_first = 1, seed_count = 100;

  // tolerances
  double z_max = 3.0;
  double kernel_residual = 1e-6;
  double stokes_residual = 1e-4;
  double loop_rel_tol = 1e-3;
  double loop_cutoff = 0.0;
  double tail_threshold = 1e-3;

  // outputs
  std::string out_json, out_csv;

  static ExperimentConfig from_json(const json& j);
  static ExperimentConfig load(const std::string& path);
  json to_json() const;
};

/// Objects built from a configuration.
struct Setup {
  std::optional<CovariantOperator> op;
  std::shared_ptr<const GreenFunction> green;
  Lattice lat{3, 16.0, 64};
  NoiseSpec noise{builtin_representation("trivial", 3), MatR::Zero(1, 1)};
};

Setup build_setup(const ExperimentConfig& cfg);
std::optional<CovariantOperator> build_operator(const ExperimentConfig& cfg);
std::shared_ptr<const GreenFunction> build_green(const ExperimentConfig& cfg,
                                                 const std::optional<CovariantOperator>& op);
NoiseSpec build_noise(const ExperimentConfig& cfg, const Representation& rep);
std::optional<LevyMeasure> build_levy(const ExperimentConfig& cfg, const Representation& rep);
std::vector<TrigField> build_test_functions(const ExperimentConfig& cfg, int comps);
ComponentMap build_component_map(const ExperimentConfig& cfg, int k);

/// Geometry documents: a single cocycle object or {"cocycles": [...]}.
/// Loops: {"k":1, "vertices":[...]} (closed implicitly) or
/// {"k":1, "circle":{"center":[...], "radius":r, "plane":[i,j], "sides":n}}
/// (arcs, or an inscribed n-gon when sides > 0).
/// Surfaces: {"k":2, "vertices":[...], "triangles":[[i,j,k],...]}.
struct Geometry {
  std::vector<Loop> loops;
  std::vector<Surface> surfaces;
};
Geometry load_geometry(const std::string& path);
Geometry parse_geometry(const json& j, const std::string& where = "geometry");
/// The configured geometry (file or inline); throws ConfigError when absent.
Geometry config_geometry(const ExperimentConfig& cfg);

}  // namespace covspde::cli
