#include "fbgs/problem.hpp"

#include <cmath>
#include <numbers>

#include "fbgs/error.hpp"
#include "fbgs/fem.hpp"
#include "fbgs/quadrature.hpp"

namespace fbgs {

Mesh load_run_mesh(const RunConfig& cfg) {
  Mesh mesh = load_mesh(cfg.mesh_path, cfg.regions);
  for (int i = 0; i < cfg.uniform_refinements; ++i) mesh = refine_uniform(mesh).mesh;
  return mesh;
}

ProfileModel make_profile_model(const RunConfig& cfg) {
  if (cfg.profile == "luxon_brown") return ProfileModel(cfg.luxon_brown, cfg.mu);
  if (cfg.profile == "taylor") return ProfileModel(TaylorState{cfg.fx}, cfg.mu);
  return ProfileModel(make_spline_table(read_table(cfg.pprime_table), read_table(cfg.f_table), cfg.fx), cfg.mu);
}

GsProblem make_problem(const RunConfig& cfg, Mesh mesh) {
  std::vector<Point> controls;
  if (!cfg.control_points.empty()) controls = read_control_points(cfg.control_points);
  Regularizer reg{cfg.epsilon, cfg.coil_weights};
  GsProblem p(std::move(mesh), make_profile_model(cfg), cfg.mu, cfg.plasma_current, std::move(controls), reg,
              cfg.farfield);
  p.set_hessian(cfg.newton.hessian);
  return p;
}

GsProblem make_problem(const RunConfig& cfg) { return make_problem(cfg, load_run_mesh(cfg)); }

Vector seed_source(const Mesh& mesh, const SeedConfig& seed, double current) {
  if (!(seed.a > 0.0 && seed.kappa > 0.0)) throw Error("seed ellipse needs positive a and kappa");
  const auto& rule = quad::triangle_order5();
  Vector s(mesh.num_vertices(), 0.0);
  double total = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.signed_area(t);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const auto& l = rule.points[q];
      Point x{0.0, 0.0};
      for (int k = 0; k < 3; ++k) x = x + l[k] * mesh.vertices[tri[k]];
      const double dr = (x.r - seed.r) / seed.a, dz = (x.z - seed.z) / (seed.a * seed.kappa);
      if (dr * dr + dz * dz >= 1.0) continue;
      for (int k = 0; k < 3; ++k) s[tri[k]] += rule.weights[q] * area * l[k];
      total += rule.weights[q] * area;
    }
  }
  if (total == 0.0) throw Error("seed ellipse contains no quadrature points");
  for (double& v : s) v *= current / total;
  return s;
}

double fit_alpha(const GsProblem& problem, std::span<const double> y) {
  const FrozenTopology topo = problem.topology(y);
  SolverState s;
  s.y.assign(y.begin(), y.end());
  auto current = [&](double a) {
    s.alpha = a;
    return problem.plasma(s, topo, false).current;
  };
  const double c0 = current(0.0), cp = current(1.0), cm = current(-1.0);
  const double c1 = 0.5 * (cp - cm), c2 = 0.5 * (cp + cm) - c0;
  const double target = problem.ip();
  if (c1 == 0.0 && c2 == 0.0) throw SingularError("plasma current does not depend on alpha");
  const double linear = c1 != 0.0 ? (target - c0) / c1 : 0.0;
  if (std::abs(c2) <= 1e-12 * std::abs(c1)) return linear;
  const double disc = c1 * c1 - 4.0 * c2 * (c0 - target);
  if (disc < 0.0) throw SingularError("no alpha reaches the target plasma current on the seed field");
  const double sq = std::sqrt(disc);
  // stable roots of c2 a^2 + c1 a + (c0 - target)
  const double qq = -0.5 * (c1 + (c1 >= 0.0 ? sq : -sq));
  const double r1 = qq / c2, r2 = qq != 0.0 ? (c0 - target) / qq : r1;
  return std::abs(r1 - linear) < std::abs(r2 - linear) ? r1 : r2;
}

SolverState initial_state(const GsProblem& problem, const RunConfig& cfg) {
  SolverState s;
  s.u = cfg.currents;
  if (static_cast<int>(s.u.size()) != problem.num_coils())
    throw Error(cfg.source + ": " + std::to_string(s.u.size()) + " coil currents given but the mesh has " +
                std::to_string(problem.num_coils()) + " coils");
  Vector rhs = problem.coil_source(s.u);
  const Vector seed = seed_source(problem.mesh(), cfg.seed, problem.ip());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += seed[i];
  s.y = problem.solve_vacuum(rhs);
  s.alpha = fit_alpha(problem, s.y);
  s.p.assign(s.y.size(), 0.0);
  s.lambda = 0.0;
  return s;
}

std::vector<Point> separatrix_points(const GsProblem& problem, std::span<const double> y, int num) {
  if (num < 1) throw Error("separatrix_points: need at least one point");
  const FrozenTopology topo = problem.topology(y);
  const PointLocator locator(problem.mesh());
  const Point c = topo.topo.x_ma;
  const double psi_x = topo.topo.psi_x;
  auto value = [&](Point x, bool& ok) {
    try {
      ok = true;
      return eval_at_point(locator, y, x).value;
    } catch (const DomainError&) {
      ok = false;
      return 0.0;
    }
  };
  // ray march from the axis, then bisect the first crossing of psi_x
  const int nray = 720;
  const double step = 0.02, max_len = 8.0;
  std::vector<Point> poly;
  for (int k = 0; k < nray; ++k) {
    const double th = 2.0 * std::numbers::pi * k / nray;
    const Point d{std::cos(th), std::sin(th)};
    double lo = 0.0, hi = -1.0;
    for (double t = step; t <= max_len; t += step) {
      bool ok = false;
      const double v = value(c + t * d, ok);
      if (!ok) break;
      if (v >= psi_x) {
        hi = t;
        break;
      }
      lo = t;
    }
    if (hi < 0.0) continue;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      bool ok = false;
      (value(c + mid * d, ok) < psi_x ? lo : hi) = mid;
    }
    poly.push_back(c + (0.5 * (lo + hi)) * d);
  }
  if (poly.size() < 3) throw TopologyError("separatrix_points: contour not found around the axis");
  std::vector<double> arc{0.0};
  for (std::size_t i = 1; i <= poly.size(); ++i) {
    const Point a = poly[i - 1], b = poly[i % poly.size()];
    arc.push_back(arc.back() + std::hypot(b.r - a.r, b.z - a.z));
  }
  std::vector<Point> out;
  std::size_t seg = 0;
  for (int k = 0; k < num; ++k) {
    const double s = arc.back() * k / num;
    while (arc[seg + 1] < s) ++seg;
    const double w = (s - arc[seg]) / (arc[seg + 1] - arc[seg]);
    const Point a = poly[seg], b = poly[(seg + 1) % poly.size()];
    out.push_back((1.0 - w) * a + w * b);
  }
  return out;
}

}  // namespace fbgs
