#include "fbgs/driver.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <random>

#include "fbgs/amr.hpp"
#include "fbgs/error.hpp"
#include "fbgs/farfield.hpp"
#include "fbgs/kernels.hpp"
#include "fbgs/problem.hpp"

namespace fbgs {

namespace {

double mean(const std::vector<int>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void write_level(const std::string& dir, int level, const GsProblem& problem, const SolverState& s,
                 const ErrorEstimate* est) {
  std::vector<VtkField> cells;
  if (est) cells.push_back({"eta", est->eta});
  std::vector<double> region(problem.mesh().num_triangles());
  for (int t = 0; t < problem.mesh().num_triangles(); ++t) {
    const Region& r = problem.mesh().element_region[t];
    region[t] = r.kind == RegionKind::coil ? 10 + r.coil : (r.kind == RegionKind::limiter ? 2 : 1);
  }
  cells.push_back({"region", region});
  write_vtk(dir + "/level_" + std::to_string(level) + ".vtk", problem.mesh(), {{"psi", s.y}}, cells);
}

void write_final(const std::string& dir, const GsProblem& problem, const SolverState& s) {
  const FrozenTopology topo = problem.topology(s.y);
  const PlasmaTerms t = problem.plasma(s, topo, false);
  std::vector<double> mask(s.y.size());
  for (std::size_t v = 0; v < mask.size(); ++v) mask[v] = static_cast<double>(topo.mask.vertex[v]);
  std::vector<double> integrated(t.integrated.begin(), t.integrated.end());
  write_vtk(dir + "/psi.vtk", problem.mesh(), {{"psi", s.y}, {"plasma_mask", mask}}, {{"plasma", integrated}});
  write_separatrix_vtk(dir + "/separatrix.vtk", t.separatrix);
  write_separatrix_csv(dir + "/separatrix.csv", t.separatrix);
  write_currents_csv(dir + "/coil_currents.csv", s.u);
}

}  // namespace

RunResult run(const RunConfig& cfg, bool write_outputs) {
  RunResult res;
  const std::string& dir = cfg.output_dir;
  try {
    res.problem.emplace(make_problem(cfg));
    SolverState state = initial_state(*res.problem, cfg);
    int level = 0;
    NewtonResult nr = newton_solve(*res.problem, state, cfg.newton, cfg.linsolve, &res.log, level);
    auto record = [&](const NewtonResult& n, int marked) {
      res.levels.push_back({level, res.problem->num_dofs(), n.iterations, mean(n.fgmres_iters), n.converged, marked});
      res.fgmres_iters.insert(res.fgmres_iters.end(), n.fgmres_iters.begin(), n.fgmres_iters.end());
      res.amg_calls += n.amg_calls;
      res.preconditioner_applications += n.preconditioner_applications;
      res.converged = n.converged;
      res.residual_norm = n.residual_norm;
      res.constraint_error = n.constraint_error;
      res.state = n.state;
    };
    record(nr, 0);
    const bool vtk = write_outputs && cfg.write_vtk;
    for (level = 1; level <= cfg.amr.levels && res.converged; ++level) {
      AmrStepResult step = amr_step(*res.problem, res.state, cfg.amr, cfg.newton, cfg.linsolve, &res.log, level);
      // the estimate lives on the mesh it was computed on
      if (vtk) write_level(dir, level - 1, *res.problem, res.state, &step.estimate);
      if (step.problem) res.problem.emplace(std::move(*step.problem));
      record(step.newton, static_cast<int>(step.marked.size()));
    }
    if (vtk) write_level(dir, static_cast<int>(res.levels.size()) - 1, *res.problem, res.state, nullptr);
  } catch (const Error& e) {
    res.converged = false;
    res.error = e.what();
  }
  if (write_outputs) {
    write_log_csv(dir + "/convergence.csv", res.log);
    if (res.problem && !res.state.y.empty()) {
      try {
        write_final(dir, *res.problem, res.state);
      } catch (const TopologyError& e) {
        if (res.error.empty()) res.error = e.what();
        res.converged = false;
      }
    }
  }
  return res;
}

SweepCell summarize(const RunResult& r, const RunConfig& cfg) {
  SweepCell c;
  c.kind = to_string(cfg.linsolve.kind);
  c.cycle = to_string(cfg.linsolve.amg.cycle);
  c.iterations = cfg.linsolve.amg.iterations;
  c.ok = r.converged;
  c.error = r.error;
  if (!r.converged && c.error.empty()) c.error = "Newton did not converge";
  if (!r.levels.empty()) c.newton_initial = r.levels.front().newton_iters;
  c.mean_fgmres = mean(r.fgmres_iters);
  if (r.levels.size() > 1) {
    double s = 0.0;
    for (std::size_t l = 1; l < r.levels.size(); ++l) s += r.levels[l].newton_iters;
    c.mean_newton_amr = s / static_cast<double>(r.levels.size() - 1);
    c.has_amr = true;
  }
  return c;
}

std::vector<SweepCell> sweep(const RunConfig& base, const std::vector<std::string>& kinds,
                             const std::vector<std::string>& cycles, const std::vector<int>& iterations,
                             bool write_outputs) {
  std::vector<SweepCell> cells;
  for (const std::string& k : kinds)
    for (const std::string& c : cycles)
      for (int it : iterations) {
        RunConfig cfg = base;
        cfg.linsolve.kind = parse_block_kind(k);
        cfg.linsolve.amg.cycle = parse_cycle(c);
        cfg.linsolve.amg.iterations = it;
        cfg.output_dir = base.output_dir + "/" + k + "_" + c + "_" + std::to_string(it);
        cells.push_back(summarize(run(cfg, write_outputs), cfg));
      }
  return cells;
}

JacobianCheck check_jacobian(const RunConfig& cfg, int directions, unsigned seed, std::vector<double> steps,
                             double reference_step) {
  const GsProblem problem = make_problem(cfg);
  const SolverState s0 = initial_state(problem, cfg);
  const FrozenTopology frozen = problem.topology(s0.y);
  const KktBlocks k = problem.evaluate(s0, frozen);
  const Vector r0 = problem.equation_residual(s0, frozen);
  const int n = problem.num_dofs();
  const Mesh& mesh = problem.mesh();

  JacobianCheck out;
  out.model = problem.model().name();
  out.directions = directions;
  if (std::find(steps.begin(), steps.end(), reference_step) == steps.end()) steps.push_back(reference_step);
  out.steps = steps;
  out.errors.assign(steps.size(), 0.0);

  double ymax = 0.0;
  for (double v : s0.y) ymax = std::max(ymax, std::abs(v));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int d = 0; d < directions; ++d) {
    Vector phi(n, 0.0);
    for (int i = 0; i < n; ++i)
      if (!mesh.axis_vertex[i]) phi[i] = uni(rng);
    // alpha moves by the same relative amount as the flux
    const double dalpha = std::abs(s0.alpha) / ymax * uni(rng);
    // J v
    Vector jv(n + 1, 0.0);
    k.B_y.multiply(phi, std::span<double>(jv.data(), n));
    for (int i = 0; i < n; ++i) jv[i] += k.B_alpha[i] * dalpha;
    jv[n] = kernels::dot(k.C_y, phi) + k.C_alpha * dalpha;
    const double jn = kernels::norm2(std::span<const double>(jv.data(), n));
    for (std::size_t si = 0; si < steps.size(); ++si) {
      const double h = steps[si];
      SolverState s = s0;
      for (int i = 0; i < n; ++i) s.y[i] += h * phi[i];
      s.alpha += h * dalpha;
      const Vector r1 = problem.equation_residual(s, frozen);
      double num = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = (r1[i] - r0[i]) / h - jv[i];
        num += e * e;
      }
      const double flux_err = std::sqrt(num) / jn;
      const double cur_err = std::abs((r1[n] - r0[n]) / h - jv[n]) / std::abs(jv[n]);
      out.errors[si] = std::max({out.errors[si], flux_err, cur_err});
    }
  }
  const auto it = std::find(steps.begin(), steps.end(), reference_step);
  out.max_rel_error = out.errors[static_cast<std::size_t>(it - steps.begin())];
  return out;
}

double loop_flux(double mu, double current, Point loop, Point x) {
  const double a = loop.r, r = x.r, dz = x.z - loop.z;
  const double denom = (a + r) * (a + r) + dz * dz;
  const double m = 4.0 * a * r / denom;
  const double mc = ((a - r) * (a - r) + dz * dz) / denom;
  const EllipticKE ke = ellip_KE_parameter(m, mc);
  const double k = std::sqrt(m);
  return mu * current * std::sqrt(a * r) * ((2.0 - m) * ke.K - 2.0 * ke.E) / (2.0 * std::numbers::pi * k);
}

namespace {

Vector solve_loop(const Mesh& mesh, const RunConfig& cfg, const std::vector<Point>& probes) {
  const CsrMatrix e = assemble_system_matrix(mesh, cfg.mu, cfg.farfield);
  const PointLocator locator(mesh);
  const PointLocation src = locator.locate({cfg.loop.r, cfg.loop.z});
  Vector b(mesh.num_vertices(), 0.0);
  for (int k = 0; k < 3; ++k) b[src.vertices[k]] += cfg.mu * cfg.loop.current * src.weights[k];
  CsrMatrix a = e;
  for (double& v : a.values) v *= cfg.mu;
  const AmgHierarchy amg(a, AmgConfig{});
  FgmresConfig fc;
  fc.tol = 1e-12;
  fc.max_iters = 2000;
  const FgmresResult r = fgmres([&](std::span<const double> x, std::span<double> y) { a.multiply(x, y); },
                                [&](std::span<const double> x, std::span<double> y) { amg.apply(x, y); }, b, fc);
  if (!r.converged) throw SolverError("vacuum benchmark: linear solve did not converge");
  Vector vals;
  for (const Point& p : probes) vals.push_back(eval_at_point(locator, r.x, p).value);
  return vals;
}

}  // namespace

VacuumBenchmark vacuum_benchmark(const RunConfig& cfg) {
  VacuumBenchmark out;
  const Point loop{cfg.loop.r, cfg.loop.z};
  for (int k = 0; k < cfg.loop.probes; ++k) {
    const double th = 2.0 * std::numbers::pi * (k + 0.5) / cfg.loop.probes;
    const Point p{loop.r + cfg.loop.probe_radius * std::cos(th), loop.z + cfg.loop.probe_radius * std::sin(th)};
    out.probes.push_back(p);
    out.exact.push_back(loop_flux(cfg.mu, cfg.loop.current, loop, p));
  }
  const Mesh coarse = load_run_mesh(cfg);
  const Mesh fine = refine_uniform(coarse).mesh;
  out.vertices_coarse = coarse.num_vertices();
  out.vertices_fine = fine.num_vertices();
  out.coarse = solve_loop(coarse, cfg, out.probes);
  out.fine = solve_loop(fine, cfg, out.probes);
  for (std::size_t k = 0; k < out.probes.size(); ++k) {
    out.max_rel_coarse = std::max(out.max_rel_coarse, std::abs(out.coarse[k] - out.exact[k]) / std::abs(out.exact[k]));
    out.max_rel_fine = std::max(out.max_rel_fine, std::abs(out.fine[k] - out.exact[k]) / std::abs(out.exact[k]));
  }
  return out;
}

}  // namespace fbgs
