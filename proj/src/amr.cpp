#include "fbgs/amr.hpp"

#include <algorithm>
#include <cmath>

#include "fbgs/error.hpp"
#include "fbgs/fem.hpp"
#include "fbgs/quadrature.hpp"

namespace fbgs {

EstimatorVariant parse_estimator(const std::string& s) {
  if (s == "psi_flux" || s == "flux") return EstimatorVariant::psi_flux;
  if (s == "toroidal_field" || s == "toroidal") return EstimatorVariant::toroidal_field;
  throw Error("unknown estimator '" + s + "' (expected psi_flux or toroidal_field)");
}

std::string to_string(EstimatorVariant v) {
  return v == EstimatorVariant::psi_flux ? "psi_flux" : "toroidal_field";
}

double ErrorEstimate::total_squared() const {
  double s = 0.0;
  for (double e : eta) s += e * e;
  return s;
}

namespace {

using Vec2 = std::array<double, 2>;

// Elementwise field sampled at a point with barycentric coordinates l.
struct FieldSampler {
  const Mesh& mesh;
  std::span<const double> y;
  EstimatorVariant variant;
  double mu;
  const ProfileModel* model;
  const FrozenTopology* topo;
  double alpha;
  std::vector<char> plasma_elem;

  Vec2 operator()(int t, const P1Gradients& g, const std::array<double, 3>& l) const {
    const auto& tri = mesh.triangles[t];
    Point x{0.0, 0.0};
    double psi = 0.0;
    Vec2 grad{0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
      x = x + l[k] * mesh.vertices[tri[k]];
      psi += l[k] * y[tri[k]];
      grad[0] += g.dr[k] * y[tri[k]];
      grad[1] += g.dz[k] * y[tri[k]];
    }
    if (!(x.r > 0.0)) throw DomainError("ZZ estimate: sample point on the axis in element " + std::to_string(t));
    if (variant == EstimatorVariant::psi_flux) {
      const double w = 1.0 / (mu * x.r);
      return {w * grad[0], w * grad[1]};
    }
    if (!plasma_elem[t] || !(psi < topo->topo.psi_x)) return {0.0, 0.0};
    const FluxBounds b = topo->topo.bounds();
    const double span = b.psi_x - b.psi_ma;
    const double h = 1e-6 * span;
    const double fx = model->fx();
    const double f = model->f(psi, b, alpha) - fx;
    const double df = (model->f(psi + h, b, alpha) - model->f(psi - h, b, alpha)) / (2.0 * h);
    // grad((f - f_x)/r)
    return {df * grad[0] / x.r - f / (x.r * x.r), df * grad[1] / x.r};
  }
};

}  // namespace

ErrorEstimate zz_estimate(const Mesh& mesh, std::span<const double> y, EstimatorVariant variant, double mu,
                          const ProfileModel* model, const FrozenTopology* topo, double alpha) {
  const int nv = mesh.num_vertices(), nt = mesh.num_triangles();
  if (static_cast<int>(y.size()) != nv) throw Error("ZZ estimate: field length does not match the mesh");
  FieldSampler sample{mesh, y, variant, mu, model, topo, alpha, {}};
  if (variant == EstimatorVariant::toroidal_field) {
    if (!topo) throw TopologyError("toroidal-field estimator needs a plasma topology");
    if (!model || model->name() == "luxon_brown")
      throw Error("toroidal-field estimator needs a profile model with an explicit f");
    sample.plasma_elem.assign(nt, 0);
    for (int t = 0; t < nt; ++t) {
      if (mesh.element_region[t].kind != RegionKind::limiter) continue;
      for (int v : mesh.triangles[t])
        if (topo->mask.vertex[v] == VertexStatus::inside) sample.plasma_elem[t] = 1;
    }
  }

  const auto& rule = quad::triangle_order5();
  std::vector<P1Gradients> grads(nt);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    grads[t] = p1_gradients(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
  }

  // lumped projection: G_v = sum_K int_K g lambda_v / sum_K |K|/3
  ErrorEstimate est;
  est.variant = variant;
  est.recovered.assign(nv, {0.0, 0.0});
  Vector mass(nv, 0.0);
  std::vector<std::vector<Vec2>> samples(nt);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = grads[t].area;
    samples[t].resize(rule.points.size());
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec2 g = sample(t, grads[t], rule.points[q]);
      samples[t][q] = g;
      for (int k = 0; k < 3; ++k) {
        const double w = rule.weights[q] * area * rule.points[q][k];
        est.recovered[tri[k]][0] += w * g[0];
        est.recovered[tri[k]][1] += w * g[1];
      }
    }
    for (int k = 0; k < 3; ++k) mass[tri[k]] += area / 3.0;
  }
  for (int v = 0; v < nv; ++v) {
    if (mass[v] == 0.0) continue;
    est.recovered[v][0] /= mass[v];
    est.recovered[v][1] /= mass[v];
  }

  est.eta.assign(nt, 0.0);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[t];
    double s = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      Vec2 gr{0.0, 0.0};
      for (int k = 0; k < 3; ++k) {
        gr[0] += rule.points[q][k] * est.recovered[tri[k]][0];
        gr[1] += rule.points[q][k] * est.recovered[tri[k]][1];
      }
      const double d0 = gr[0] - samples[t][q][0], d1 = gr[1] - samples[t][q][1];
      s += rule.weights[q] * (d0 * d0 + d1 * d1);
    }
    est.eta[t] = std::sqrt(s * grads[t].area);
  }
  return est;
}

std::set<int> mark(const ErrorEstimate& est, const MarkingPolicy& policy, const Mesh& mesh) {
  const int nt = mesh.num_triangles();
  if (static_cast<int>(est.eta.size()) != nt) throw Error("marking: estimate does not match the mesh");
  for (double th : {policy.theta_limiter, policy.theta_outside})
    if (!(th > 0.0 && th < 1.0)) throw Error("marking thresholds must lie in (0, 1)");
  auto region = [&](int t) { return mesh.element_region[t].kind == RegionKind::limiter ? 0 : 1; };
  std::array<double, 2> ref{0.0, 0.0};
  for (int t = 0; t < nt; ++t) {
    const double e = est.eta[t];
    if (policy.rule == MarkRule::max_fraction) ref[region(t)] = std::max(ref[region(t)], e);
    else ref[region(t)] += e * e;
  }
  const std::array<double, 2> theta{policy.theta_limiter, policy.theta_outside};
  std::set<int> marked;
  for (int t = 0; t < nt; ++t) {
    const int r = region(t);
    const double e = est.eta[t];
    const bool hit = policy.rule == MarkRule::max_fraction ? e > theta[r] * ref[r] : e * e > theta[r] * ref[r];
    if (hit) marked.insert(t);
  }
  return marked;
}

AmrStepResult amr_step(const GsProblem& problem, const SolverState& state, const AmrConfig& amr,
                       const NewtonConfig& newton, const LinearSolverConfig& lin, ConvergenceLog* log, int level) {
  AmrStepResult out;
  std::optional<FrozenTopology> topo;
  if (amr.estimator == EstimatorVariant::toroidal_field) topo = problem.topology(state.y);
  out.estimate = zz_estimate(problem.mesh(), state.y, amr.estimator, problem.mu(), &problem.model(),
                             topo ? &*topo : nullptr, state.alpha);
  out.marked = mark(out.estimate, amr.policy, problem.mesh());
  if (out.marked.empty()) {
    out.state = state;
    out.newton = newton_solve(problem, state, newton, lin, log, level);
    out.state = out.newton.state;
    return out;
  }
  RefinementResult ref = refine(problem.mesh(), out.marked);
  SolverState s;
  s.y = ref.prolongation.apply(state.y);
  s.p = ref.prolongation.apply(state.p);
  s.u = state.u;
  s.alpha = state.alpha;
  s.lambda = state.lambda;
  // axis midpoints keep the Dirichlet value exactly
  for (std::size_t k = 0; k < ref.prolongation.parents.size(); ++k) {
    const int v = ref.prolongation.old_vertices + static_cast<int>(k);
    if (ref.mesh.axis_vertex[v]) s.y[v] = s.p[v] = 0.0;
  }
  out.problem.emplace(problem.with_mesh(std::move(ref.mesh)));
  out.newton = newton_solve(*out.problem, s, newton, lin, log, level);
  out.state = out.newton.state;
  return out;
}

}  // namespace fbgs
