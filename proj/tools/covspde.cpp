#include "acceptance.hpp"
#include "runs.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

using namespace covspde;
using namespace covspde::cli;

namespace {

constexpr const char* kCsvHelp = R"(CSV columns (one header row, values with 17 significant digits):
  spectrum   index, mass_re, mass_im
  check-op   residual, finite_residual
  kernel     x0, x1, x2, point_max, lattice_max, rel_diff   (axis and diagonal sites, 1 <= |x| <= 4)
  solve      i, phi0 .. phi{N-1}                             (field along the first lattice axis)
  charfunc   index, mc_re, mc_im, std_error, closed_re, closed_im, z_score
  schwinger  order, mc_re, std_error, closed, z_score
  loops      eps, re, im, std_error, cauchy, cauchy_se      (Monte Carlo schedule; empty for closed mode)
  stokes     atom, loop_value, surface_value, residual, coarse_residual
  decay      kind, x, value                                  (kind 0: shell max at radius x; 1: tail shell sum at shell x)

Exit status: 0 when every enabled check passes, 1 on a failed check or a
numerical error, 2 on an invalid configuration or command line.)";

struct Common {
  std::string config;
  std::string seeds;
  std::int64_t seed = -1;
  bool allow_small_box = false;
  std::string out_json, out_csv;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("output: cannot write '" + path + "'");
  os << text;
}

// "a..b" inclusive.
void parse_seed_range(const std::string& s, ExperimentConfig& cfg) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) throw std::invalid_argument("");
    const std::uint64_t a = std::stoull(s.substr(0, dots)), b = std::stoull(s.substr(dots + 2));
    if (b < a) throw std::invalid_argument("");
    cfg.seed_first = a;
    cfg.seed_count = b - a + 1;
  } catch (const std::logic_error&) {
    throw ConfigError("--seeds: expected a..b with a <= b");
  }
}

int run_command(const std::string& command, const Common& opt, ExperimentConfig cfg) {
  if (!opt.seeds.empty()) parse_seed_range(opt.seeds, cfg);
  if (opt.seed >= 0) {
    cfg.seed_first = static_cast<std::uint64_t>(opt.seed);
    if (opt.seeds.empty()) cfg.seed_count = 1;
  }
  if (opt.allow_small_box) cfg.allow_small_box = true;
  if (!opt.out_json.empty()) cfg.out_json = opt.out_json;
  if (!opt.out_csv.empty()) cfg.out_csv = opt.out_csv;

  const auto t0 = std::chrono::steady_clock::now();
  RunResult r = run_experiment(cfg, command);
  r.doc["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string text = r.doc.dump(2) + "\n";
  if (cfg.out_json.empty())
    std::cout << text;
  else
    write_file(cfg.out_json, text);
  if (!cfg.out_csv.empty()) write_file(cfg.out_csv, to_csv(r));
  if (!cfg.out_json.empty()) std::cout << (r.pass ? "pass" : "FAIL") << ": " << command << " -> " << cfg.out_json << "\n";
  return r.pass ? 0 : 1;
}

int selftest(const std::vector<int>& only) {
  std::vector<int> ids = only;
  if (ids.empty())
    for (int i = 1; i <= kCriteria; ++i) ids.push_back(i);
  int failed = 0;
  for (int id : ids) {
    if (id < 1 || id > kCriteria) throw ConfigError("--only: criterion ids lie in [1, " + std::to_string(kCriteria) + "]");
    const auto o = run_criterion(id);
    std::cout << format_outcome(o) << std::endl;
    failed += !o.pass;
  }
  std::cout << ids.size() - failed << "/" << ids.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariant SPDE solver and Schwinger-function estimator"};
  app.footer(kCsvHelp);
  app.require_subcommand(1);
  int n_workers = 0;
  app.add_option("--workers", n_workers, "Worker threads (default: COVSPDE_WORKERS or all cores)")->check(CLI::NonNegativeNumber);

  Common opt;
  int order = 0;
  std::string geometry, mode;
  std::vector<int> only;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", opt.config, "Experiment configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seeds", opt.seeds, "Inclusive seed range a..b");
    sub->add_option("--seed", opt.seed, "Single seed (first seed of the range)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--allow-small-box", opt.allow_small_box, "Permit m_min L < 5 (wrap-around bias)");
    sub->add_option("-o,--out", opt.out_json, "Result JSON path (default: stdout)");
    sub->add_option("--csv", opt.out_csv, "CSV companion path");
  };

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {{"check-op", "Covariance check and mass spectrum of a first-order operator"},
                      {"spectrum", "Mass spectrum and admissibility"},
                      {"kernel", "Lattice Green kernel residual and point-kernel comparison"},
                      {"solve", "Solve one noise realization on the lattice"},
                      {"schwinger", "Monte Carlo Schwinger functions or characteristic functional"},
                      {"loops", "Loop functionals: closed form, Monte Carlo, or both"},
                      {"stokes", "Stokes identity for explicit or random single atoms"},
                      {"decay", "Kernel decay rate and tail summability"}};
  std::vector<CLI::App*> subapps;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    subapps.push_back(sub);
  }
  app.get_subcommand("schwinger")->add_option("--order", order, "Order n in [1, 4]; 0 evaluates the characteristic functional")
      ->check(CLI::Range(0, 4));
  app.get_subcommand("loops")->add_option("--geometry", geometry, "Loop geometry (JSON)")->check(CLI::ExistingFile);
  app.get_subcommand("loops")->add_option("--mode", mode, "closed | mc | both")
      ->check(CLI::IsMember({"closed", "mc", "both"}));
  app.get_subcommand("stokes")->add_option("--geometry", geometry, "Loop and surface geometry (JSON)")
      ->check(CLI::ExistingFile);
  auto* st = app.add_subcommand("selftest", "Run the acceptance criteria");
  st->add_option("--only", only, "Criterion ids to run (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (n_workers > 0) set_workers(n_workers);

  try {
    if (st->parsed()) return selftest(only);
    for (auto* sub : subapps) {
      if (!sub->parsed()) continue;
      ExperimentConfig cfg = opt.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(opt.config);
      const std::string name = sub->get_name();
      if (name == "schwinger") {
        if (order > 0) {
          cfg.kind = "schwinger";
          cfg.order = order;
        } else if (sub->count("--order")) {
          cfg.kind = "charfunc";
        } else if (cfg.kind != "schwinger") {
          cfg.kind = "charfunc";
        }
      }
      if (!geometry.empty()) cfg.geometry = geometry;
      if (!mode.empty()) cfg.mode = mode;
      return run_command(name == "schwinger" ? cfg.kind : name, opt, cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
