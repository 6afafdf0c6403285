#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbgs/config.hpp"
#include "fbgs/kkt.hpp"
#include "fbgs/output.hpp"

namespace fbgs {

struct LevelSummary {
  int level = 0;
  int num_vertices = 0;
  int newton_iters = 0;
  double mean_fgmres = 0.0;
  bool converged = false;
  int marked = 0;
};

struct RunResult {
  bool converged = false;
  std::string error;  // set when a module error stopped the run
  std::vector<LevelSummary> levels;
  ConvergenceLog log;
  std::optional<GsProblem> problem;
  SolverState state;
  double residual_norm = 0.0;
  double constraint_error = 0.0;
  std::vector<int> fgmres_iters;  // every Newton step of every level
  std::size_t amg_calls = 0;
  std::size_t preconditioner_applications = 0;
};

/// Uniform refinements, Newton on the initial mesh, then the AMR levels.
/// Module errors are caught and reported in RunResult::error.
RunResult run(const RunConfig& cfg, bool write_outputs = true);

SweepCell summarize(const RunResult& r, const RunConfig& cfg);

/// One run per (kind, cycle, iterations) combination; failures become "--".
std::vector<SweepCell> sweep(const RunConfig& base, const std::vector<std::string>& kinds,
                             const std::vector<std::string>& cycles, const std::vector<int>& iterations,
                             bool write_outputs = false);

struct JacobianCheck {
  std::string model;
  double max_rel_error = 0.0;  // at the reference step
  std::vector<double> steps;
  std::vector<double> errors;  // max over directions, per step
  int directions = 0;
};

/// Frozen-topology Jacobian-vector products against forward differences of
/// the equation residual at the initial state.
JacobianCheck check_jacobian(const RunConfig& cfg, int directions = 10, unsigned seed = 12345,
                             std::vector<double> steps = {1e-5, 1e-6, 1e-7, 1e-8}, double reference_step = 1e-7);

/// Analytic flux of a filament loop, mu I sqrt(a r) ((2 - k^2) K - 2 E) / (2 pi k).
double loop_flux(double mu, double current, Point loop, Point x);

struct VacuumBenchmark {
  std::vector<Point> probes;
  std::vector<double> exact;
  std::vector<double> coarse, fine;
  double max_rel_coarse = 0.0;
  double max_rel_fine = 0.0;
  int vertices_coarse = 0, vertices_fine = 0;
};

VacuumBenchmark vacuum_benchmark(const RunConfig& cfg);

}  // namespace fbgs
