#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "fbgs/driver.hpp"
#include "fbgs/error.hpp"
#include "fbgs/problem.hpp"

using namespace fbgs;

namespace {

RunConfig read(const std::string& path) {
  RunConfig cfg = load_config(path);
  apply_environment(cfg);
  return cfg;
}

int cmd_solve(const std::string& path) {
  const RunConfig cfg = read(path);
  const RunResult r = run(cfg, true);
  for (const LevelSummary& l : r.levels)
    std::printf("level %d: %d vertices, %d marked, %d Newton iterations, mean FGMRES %.1f, %s\n", l.level,
                l.num_vertices, l.marked, l.newton_iters, l.mean_fgmres, l.converged ? "converged" : "not converged");
  if (!r.error.empty()) std::fprintf(stderr, "error: %s\n", r.error.c_str());
  std::printf("residual %.3e, |C - Ip|/|Ip| %.3e, alpha %.6g\n", r.residual_norm, r.constraint_error, r.state.alpha);
  std::printf("outputs in %s\n", cfg.output_dir.c_str());
  return r.converged ? 0 : 1;
}

int cmd_sweep(const std::string& path, const std::vector<std::string>& kinds, const std::vector<std::string>& cycles,
              const std::vector<int>& iters) {
  const RunConfig cfg = read(path);
  const std::vector<SweepCell> cells = sweep(cfg, kinds, cycles, iters);
  const std::string out = cfg.output_dir + "/sweep.csv";
  write_sweep_csv(out, cells);
  for (const SweepCell& c : cells)
    std::printf("%-4s %s-cycle x%-2d  %s\n", c.kind.c_str(), c.cycle.c_str(), c.iterations, c.summary().c_str());
  std::printf("table written to %s\n", out.c_str());
  return 0;
}

int cmd_check_jacobian(const std::string& path) {
  const RunConfig cfg = read(path);
  const JacobianCheck j = check_jacobian(cfg);
  std::printf("model %s, %d directions\n", j.model.c_str(), j.directions);
  for (std::size_t k = 0; k < j.steps.size(); ++k) std::printf("  step %.0e  max rel error %.3e\n", j.steps[k], j.errors[k]);
  std::printf("max relative error %.3e\n", j.max_rel_error);
  return j.max_rel_error <= 1e-5 ? 0 : 1;
}

int cmd_vacuum(const std::string& path) {
  const RunConfig cfg = read(path);
  const VacuumBenchmark b = vacuum_benchmark(cfg);
  std::printf("loop at (%g, %g), %g A, %zu probes\n", cfg.loop.r, cfg.loop.z, cfg.loop.current, b.probes.size());
  std::printf("mesh %d vertices: max rel error %.3e\n", b.vertices_coarse, b.max_rel_coarse);
  std::printf("mesh %d vertices: max rel error %.3e\n", b.vertices_fine, b.max_rel_fine);
  return b.max_rel_coarse <= 0.02 && b.max_rel_fine < b.max_rel_coarse ? 0 : 1;
}

int cmd_controls(const std::string& path, const std::string& out, int num) {
  const RunConfig cfg = read(path);
  RunConfig seed_cfg = cfg;
  seed_cfg.control_points.clear();
  const GsProblem problem = make_problem(seed_cfg);
  const SolverState s = initial_state(problem, seed_cfg);
  const std::vector<Point> pts = separatrix_points(problem, s.y, num);
  if (const auto parent = std::filesystem::path(out).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  std::ofstream f(out);
  if (!f) throw Error("cannot write " + out);
  f << "# control points on the seed separatrix: r z\n" << std::setprecision(12);
  for (const Point& p : pts) f << p.r << ' ' << p.z << '\n';
  std::printf("%zu control points written to %s\n", pts.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-boundary Grad-Shafranov equilibrium solver"};
  app.require_subcommand(1);
  std::string config;

  auto* solve = app.add_subcommand("solve", "Run Newton and the AMR levels for a config");
  solve->add_option("config", config, "INI config file")->required();

  std::vector<std::string> kinds{"BD", "BUT", "BLT"}, cycles{"V", "W"};
  std::vector<int> iters{1, 3, 5, 10};
  auto* sw = app.add_subcommand("sweep", "Preconditioner study over kinds, cycles and AMG iterations");
  sw->add_option("config", config, "INI config file")->required();
  sw->add_option("--kinds", kinds, "Block preconditioners (BD, BUT, BLT)");
  sw->add_option("--cycles", cycles, "AMG cycles (V, W)");
  sw->add_option("--iters", iters, "AMG iterations per application");

  auto* jac = app.add_subcommand("check-jacobian", "Finite-difference check of the frozen-topology Jacobian");
  jac->add_option("config", config, "INI config file")->required();

  auto* vac = app.add_subcommand("vacuum-benchmark", "Current-loop test of the far-field operator");
  vac->add_option("config", config, "INI config file")->required();

  std::string out = "control_points.txt";
  int num = 100;
  auto* ctl = app.add_subcommand("control-points", "Sample control points on the seed separatrix");
  ctl->add_option("config", config, "INI config file")->required();
  ctl->add_option("-o,--out", out, "Output file");
  ctl->add_option("-n,--num", num, "Number of points");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(config);
    if (*sw) return cmd_sweep(config, kinds, cycles, iters);
    if (*jac) return cmd_check_jacobian(config);
    if (*vac) return cmd_vacuum(config);
    if (*ctl) return cmd_controls(config, out, num);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
