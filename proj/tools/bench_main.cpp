#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qitt/bench.hpp"
#include "qitt/calibration.hpp"

namespace {

using nlohmann::json;
using namespace qitt;

Method parse_method(const std::string& s) {
  if (s == "euler") return Method::euler;
  if (s == "heun") return Method::heun;
  if (s == "rk4") return Method::rk4;
  if (s == "rkf45") return Method::rkf45;
  if (s == "gradient") return Method::gradient;
  if (s == "improved" || s == "improved_gradient") return Method::improved_gradient;
  if (s == "arnoldi") return Method::arnoldi;
  if (s == "dmrg") return Method::dmrg;
  throw CLI::ValidationError("--solver", "unknown solver " + s);
}

// "6", "4,6,8", or "4..8"
std::vector<int> parse_qubits(const std::string& s) {
  std::vector<int> out;
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    const int lo = std::stoi(s.substr(0, dots));
    const int hi = std::stoi(s.substr(dots + 2));
    for (int n = lo; n <= hi; ++n) out.push_back(n);
    return out;
  }
  size_t pos = 0;
  while (pos < s.size()) {
    const auto comma = s.find(',', pos);
    const std::string tok = s.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (!tok.empty()) out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void apply_config_json(const std::string& path, BenchmarkConfig& cfg, json* extra) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  json j = json::parse(in);
  if (j.contains("problem")) {
    const auto& p = j["problem"];
    if (p.contains("name")) cfg.problem.name = p["name"].get<std::string>();
    if (p.contains("omega")) cfg.problem.omega = p["omega"].get<double>();
    if (p.contains("theta")) cfg.problem.theta = p["theta"].get<double>();
    if (p.contains("sigma_max")) cfg.problem.sigma_max = p["sigma_max"].get<double>();
    if (p.contains("sigma_min")) cfg.problem.sigma_min = p["sigma_min"].get<double>();
  }
  if (j.contains("L")) cfg.L = j["L"].get<double>();
  if (j.contains("qubits")) {
    if (j["qubits"].is_array())
      cfg.qubits = j["qubits"].get<std::vector<int>>();
    else
      cfg.qubits = parse_qubits(j["qubits"].get<std::string>());
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    if (s.contains("method")) cfg.solver.method = parse_method(s["method"].get<std::string>());
    if (s.contains("delta_beta")) cfg.solver.delta_beta = s["delta_beta"].get<double>();
    if (s.contains("n_v")) cfg.solver.n_v = s["n_v"].get<int>();
    if (s.contains("max_steps")) cfg.solver.max_steps = s["max_steps"].get<int>();
    if (s.contains("energy_tolerance"))
      cfg.solver.energy_tolerance = s["energy_tolerance"].get<double>();
    if (s.contains("truncation")) {
      const auto& t = s["truncation"];
      if (t.contains("mode"))
        cfg.solver.trunc.mode = t["mode"].get<std::string>() == "machine"
                                    ? Truncation::Mode::machine_exact
                                    : Truncation::Mode::relative_singular_values;
      if (t.contains("tolerance")) cfg.solver.trunc.tolerance = t["tolerance"].get<double>();
      if (t.contains("max_bond") && !t["max_bond"].is_null())
        cfg.solver.trunc.max_bond = t["max_bond"].get<int>();
    }
    if (s.contains("rkf")) {
      const auto& r = s["rkf"];
      if (r.contains("abs_tol")) cfg.solver.rkf.abs_tol = r["abs_tol"].get<double>();
      if (r.contains("rel_tol")) cfg.solver.rkf.rel_tol = r["rel_tol"].get<double>();
      if (r.contains("initial_step")) cfg.solver.rkf.initial_step = r["initial_step"].get<double>();
      if (r.contains("min_step")) cfg.solver.rkf.min_step = r["min_step"].get<double>();
      if (r.contains("max_step")) cfg.solver.rkf.max_step = r["max_step"].get<double>();
    }
  }
  if (j.contains("warm_start")) cfg.warm_start = j["warm_start"].get<bool>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("epsilon_target")) cfg.epsilon_target = j["epsilon_target"].get<double>();
  if (j.contains("output")) cfg.output = j["output"].get<std::string>();
  if (j.contains("fixtures")) cfg.fixtures = j["fixtures"].get<std::string>();
  if (extra && j.contains("calibrate")) *extra = j["calibrate"];
}

// flag storage shared by every subcommand
struct Flags {
  std::string config, problem, solver, qubits, trunc_tol, out;
  double L = 10.0, delta_beta = 1e-2, tol = 1e-10;
  int nv = 3, max_bond = 0, steps = 1000;
  bool warm = false;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file mirroring the run options");
  sub->add_option("--problem", f.problem, "ho1d | squeezed2d | constant");
  sub->add_option("--qubits", f.qubits, "qubits per dimension: n, a,b,c or a..b");
  sub->add_option("--L", f.L, "box side length, domain [-L/2, L/2]");
  sub->add_option("--solver", f.solver,
                  "euler|heun|rk4|rkf45|gradient|improved_gradient|arnoldi|dmrg");
  sub->add_option("--nv", f.nv, "Krylov basis cap (arnoldi)");
  sub->add_option("--delta-beta", f.delta_beta, "imaginary-time step");
  sub->add_option("--tol", f.tol, "energy convergence tolerance");
  sub->add_option("--trunc-tol", f.trunc_tol, "truncation tolerance, or 'machine'");
  sub->add_option("--max-bond", f.max_bond, "bond-dimension cap (0 = none)");
  sub->add_option("--steps", f.steps, "step budget");
  sub->add_flag("--warm-start", f.warm, "interpolation warm start (renormalize)");
  sub->add_option("--seed", f.seed, "random product start when nonzero");
  sub->add_option("--out", f.out, "output path");
}

BenchmarkConfig build_config(CLI::App* sub, const Flags& f, json* extra) {
  BenchmarkConfig cfg;
  if (sub->count("--config")) apply_config_json(f.config, cfg, extra);
  if (sub->count("--problem")) cfg.problem.name = f.problem;
  if (sub->count("--qubits")) cfg.qubits = parse_qubits(f.qubits);
  if (sub->count("--L")) cfg.L = f.L;
  if (sub->count("--solver")) cfg.solver.method = parse_method(f.solver);
  if (sub->count("--nv")) cfg.solver.n_v = f.nv;
  if (sub->count("--delta-beta")) cfg.solver.delta_beta = f.delta_beta;
  if (sub->count("--tol")) cfg.solver.energy_tolerance = f.tol;
  if (sub->count("--trunc-tol")) {
    if (f.trunc_tol == "machine")
      cfg.solver.trunc = Truncation::exact();
    else
      cfg.solver.trunc.tolerance = std::stod(f.trunc_tol);
  }
  if (sub->count("--max-bond") && f.max_bond > 0) cfg.solver.trunc.max_bond = f.max_bond;
  if (sub->count("--steps")) cfg.solver.max_steps = f.steps;
  if (sub->count("--warm-start")) cfg.warm_start = f.warm;
  if (sub->count("--seed")) cfg.seed = f.seed;
  if (sub->count("--out")) cfg.output = f.out;
  if (cfg.qubits.empty()) cfg.qubits = {6};
  return cfg;
}

std::string with_qubits_suffix(const std::string& path, int n) {
  const auto dot = path.rfind('.');
  const std::string suffix = "_n" + std::to_string(n);
  if (dot == std::string::npos || path.find('/', dot) != std::string::npos)
    return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

void print_summary(const BenchmarkConfig& cfg, int n, const BenchResult& r) {
  const auto& last = r.rows.back();
  std::printf("%s n=%d %s: status=%s steps=%d energy=%.12g epsilon=%.3g sigma=%.3g "
              "cost=%.6g max_bond=%d params=%ld\n",
              cfg.problem.name.c_str(), n, r.epsilon_reference.c_str(), r.status.c_str(),
              last.step, last.energy, last.epsilon.value_or(std::nan("")), last.sigma,
              last.rescaled_cost, last.max_bond, last.mps_parameter_count);
}

int cmd_solve(CLI::App* sub, const Flags& f) {
  BenchmarkConfig cfg = build_config(sub, f, nullptr);
  cfg.qubits = {cfg.qubits.front()};
  BenchResult r = run_benchmark(cfg);
  print_summary(cfg, cfg.qubits.front(), r);
  return r.status == "unstable" ? 2 : 0;
}

int cmd_sweep(CLI::App* sub, const Flags& f) {
  BenchmarkConfig cfg = build_config(sub, f, nullptr);
  int rc = 0;
  for (int n : cfg.qubits) {
    BenchmarkConfig one = cfg;
    one.qubits = {n};
    if (!cfg.output.empty()) one.output = with_qubits_suffix(cfg.output, n);
    BenchResult r = run_benchmark(one);
    print_summary(one, n, r);
    if (r.status == "unstable") rc = 2;
  }
  return rc;
}

int cmd_renormalize(CLI::App* sub, const Flags& f) {
  BenchmarkConfig cfg = build_config(sub, f, nullptr);
  auto rows = run_renormalized(cfg);
  std::printf("qubits cold_steps warm_steps cold_ms warm_ms cold_eps warm_eps\n");
  for (const auto& r : rows)
    std::printf("%6d %10d %10d %7.1f %7.1f %8.2g %8.2g\n", r.qubits, r.cold_steps,
                r.warm_steps, r.cold_ms, r.warm_ms, r.cold_epsilon, r.warm_epsilon);
  return 0;
}

int cmd_calibrate(CLI::App* sub, const Flags& f) {
  json extra;
  BenchmarkConfig cfg = build_config(sub, f, &extra);
  cfg.qubits = {cfg.qubits.front()};
  double lo = extra.contains("lo") ? extra["lo"].get<double>() : 1e-3;
  double hi = extra.contains("hi") ? extra["hi"].get<double>() : 1.0;
  int budget = extra.contains("budget") ? extra["budget"].get<int>() : 25;

  const GridSpec grid = make_grid(cfg.problem, cfg.qubits.front(), cfg.L);
  const Mpo H = make_operator(cfg.problem, grid);
  BenchmarkConfig probe = cfg;
  probe.output.clear();
  const double e0 = reference_energy(cfg, grid, nullptr);
  const double cost_c = cost_constant(cfg.solver.method, cfg.solver.n_v);

  json samples = json::array();
  auto merit = [&](double db) {
    BenchmarkConfig run = probe;
    run.solver.delta_beta = db;
    BenchResult r = run_benchmark(run);
    int hit = -1;
    for (const auto& row : r.rows)
      if (row.epsilon && *row.epsilon < cfg.epsilon_target) {
        hit = row.step;
        break;
      }
    const double m = hit < 0 ? std::numeric_limits<double>::infinity() : cost_c * hit;
    samples.push_back({{"delta_beta", db}, {"merit", m}, {"status", r.status}});
    return m;
  };
  bool warning = false;
  const double best = calibrate_step(merit, lo, hi, budget, &warning);
  json out = {{"delta_beta", best},
              {"epsilon_target", cfg.epsilon_target},
              {"warning", warning},
              {"samples", samples}};
  std::printf("%s\n", out.dump(2).c_str());
  if (!cfg.output.empty()) {
    std::ofstream o(cfg.output);
    o << out.dump(2) << "\n";
  }
  return 0;
}

int cmd_oracle(CLI::App* sub, const Flags& f) {
  BenchmarkConfig cfg = build_config(sub, f, nullptr);
  std::vector<FixtureEntry> entries;
  if (!cfg.output.empty()) {
    std::ifstream probe(cfg.output);
    if (probe) entries = load_fixtures(cfg.output);
  }
  for (int n : cfg.qubits) {
    const GridSpec grid = make_grid(cfg.problem, n, cfg.L);
    if (grid.total_sites() > 12) {
      std::fprintf(stderr, "oracle: skipping n=%d (beyond dense cap)\n", n);
      continue;
    }
    const DenseProblem& dp = dense_problem(grid, cfg.problem.coupling());
    FixtureEntry e{cfg.problem.name, grid.dims(), n, grid.lower[0], grid.length[0],
                   dp.ground_energy};
    bool replaced = false;
    for (auto& old : entries)
      if (old.problem == e.problem && old.dims == e.dims && old.qubits == e.qubits &&
          std::abs(old.lower - e.lower) < 1e-12 && std::abs(old.length - e.length) < 1e-12) {
        old = e;
        replaced = true;
        break;
      }
    if (!replaced) entries.push_back(e);
    std::printf("%s dims=%d n=%d e0=%.15g\n", e.problem.c_str(), e.dims, n, e.e0);
  }
  if (!cfg.output.empty()) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.problem != b.problem) return a.problem < b.problem;
      if (a.dims != b.dims) return a.dims < b.dims;
      return a.qubits < b.qubits;
    });
    write_fixtures(cfg.output, entries);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qitt-bench: tensor-train PDE eigensolver benchmarks"};
  app.require_subcommand(1);
  Flags f;
  CLI::App* solve = app.add_subcommand("solve", "run one solver configuration");
  CLI::App* sweep = app.add_subcommand("sweep", "run a configuration across qubit counts");
  CLI::App* renorm =
      app.add_subcommand("renormalize", "warm-start chain versus cold starts across sizes");
  CLI::App* calib = app.add_subcommand("calibrate", "golden-section step-size calibration");
  CLI::App* oracle = app.add_subcommand("oracle", "compute/refresh frozen dense references");
  for (CLI::App* sub : {solve, sweep, renorm, calib, oracle}) add_common(sub, f);
  CLI11_PARSE(app, argc, argv);
  try {
    if (solve->parsed()) return cmd_solve(solve, f);
    if (sweep->parsed()) return cmd_sweep(sweep, f);
    if (renorm->parsed()) return cmd_renormalize(renorm, f);
    if (calib->parsed()) return cmd_calibrate(calib, f);
    if (oracle->parsed()) return cmd_oracle(oracle, f);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
