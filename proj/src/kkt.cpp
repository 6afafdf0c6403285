#include "fbgs/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <filesystem>

#include "fbgs/error.hpp"
#include "fbgs/kernels.hpp"

namespace fbgs {

namespace {

double dot(std::span<const double> a, std::span<const double> b) { return kernels::dot(a, b); }

CsrMatrix scaled(const CsrMatrix& a, double s) {
  CsrMatrix out = a;
  for (double& v : out.values) v *= s;
  return out;
}

Vector scaled(std::span<const double> a, double s) {
  Vector out(a.begin(), a.end());
  for (double& v : out) v *= s;
  return out;
}

}  // namespace

double KktResidual::norm() const {
  double s = 0.0;
  for (double v : b1) s += v * v;
  for (double v : b2) s += v * v;
  for (double v : b3) s += v * v;
  return std::sqrt(s + b4 * b4 + b5 * b5);
}

KktResidual kkt_residual(const KktBlocks& k, const SolverState& s) {
  const int n = k.num_dofs(), m = k.num_controls();
  KktResidual b;
  b.b1.assign(n, 0.0);
  k.B_y.multiply_transpose(s.p, b.b1);
  for (int i = 0; i < n; ++i) b.b1[i] = -(b.b1[i] + k.G_y[i] + k.C_y[i] * s.lambda);
  b.b2.assign(m, 0.0);
  k.F.multiply_transpose(s.p, b.b2);
  for (int j = 0; j < m; ++j) b.b2[j] = b.b2[j] - k.H[j] * s.u[j];
  b.b3.assign(n, 0.0);
  k.F.multiply(s.u, b.b3);
  for (int i = 0; i < n; ++i) b.b3[i] -= k.B[i];
  b.b4 = -(dot(k.B_alpha, s.p) + k.C_alpha * s.lambda);
  b.b5 = -(k.C - k.target);
  return b;
}

KktBlocks scale_blocks(const KktBlocks& k, const Scaling& s) {
  KktBlocks o;
  o.B_y = scaled(k.B_y, s.flux);
  o.amg_matrix = scaled(k.amg_matrix, s.flux);
  o.G_yy = k.G_yy;
  o.F = scaled(k.F, s.flux * s.i_ref);
  o.H = scaled(k.H, s.i_ref * s.i_ref);
  o.B_alpha = scaled(k.B_alpha, s.flux * s.alpha_ref);
  o.C_y = scaled(k.C_y, 1.0 / s.current);
  o.C_alpha = k.C_alpha * s.alpha_ref / s.current;
  // function values are not part of the scaled linear system
  o.G = k.G;
  o.C = k.C;
  o.target = k.target;
  return o;
}

KktResidual scale_residual(const KktResidual& b, const Scaling& s) {
  KktResidual o;
  o.b1 = b.b1;
  o.b2 = scaled(b.b2, s.i_ref);
  o.b3 = scaled(b.b3, s.flux);
  o.b4 = b.b4 * s.alpha_ref;
  o.b5 = b.b5 / s.current;
  return o;
}

Step unscale_step(const Step& d, const Scaling& s) {
  Step o;
  o.dy = d.dy;
  o.du = scaled(d.du, s.i_ref);
  o.dp = scaled(d.dp, s.flux);
  o.dalpha = d.dalpha * s.alpha_ref;
  o.dlambda = d.dlambda / s.current;
  return o;
}

void ReducedSystem::apply_B(std::span<const double> dp, std::span<double> out) const {
  k->B_y.multiply_transpose(dp, out);
  const double c = dot(k->B_alpha, dp) / k->C_alpha;
  for (int i = 0; i < size(); ++i) out[i] -= k->C_y[i] * c;
}

void ReducedSystem::apply_BT(std::span<const double> dy, std::span<double> out) const {
  k->B_y.multiply(dy, out);
  const double c = dot(k->C_y, dy) / k->C_alpha;
  for (int i = 0; i < size(); ++i) out[i] -= k->B_alpha[i] * c;
}

void ReducedSystem::apply_A(std::span<const double> dy, std::span<double> out) const {
  k->G_yy.multiply(dy, out);
}

void ReducedSystem::apply_C(std::span<const double> dp, std::span<double> out) const {
  Vector w(k->num_controls());
  k->F.multiply_transpose(dp, w);
  for (int j = 0; j < k->num_controls(); ++j) w[j] /= k->H[j];
  k->F.multiply(w, out);
  for (int i = 0; i < size(); ++i) out[i] = -out[i];
}

void ReducedSystem::apply(std::span<const double> x, std::span<double> out) const {
  const int n = size();
  const auto dp = x.subspan(0, n), dy = x.subspan(n, n);
  auto o1 = out.subspan(0, n), o2 = out.subspan(n, n);
  Vector t(n);
  apply_B(dp, o1);
  apply_A(dy, t);
  for (int i = 0; i < n; ++i) o1[i] += t[i];
  apply_C(dp, o2);
  apply_BT(dy, t);
  for (int i = 0; i < n; ++i) o2[i] += t[i];
}

Vector ReducedSystem::rhs() const {
  Vector r(c1);
  r.insert(r.end(), c2.begin(), c2.end());
  return r;
}

ReducedSystem reduce(const KktBlocks& k, const KktResidual& b, double c_min) {
  if (!(std::abs(k.C_alpha) >= c_min))
    throw SingularError("elimination singular: |C_alpha| = " + std::to_string(std::abs(k.C_alpha)));
  for (double h : k.H)
    if (!(h > 0.0)) throw SingularError("elimination singular: regularizer Hessian is not positive");
  const int n = k.num_dofs(), m = k.num_controls();
  ReducedSystem r;
  r.k = &k;
  r.c1.resize(n);
  for (int i = 0; i < n; ++i) r.c1[i] = b.b1[i] - k.C_y[i] * b.b4 / k.C_alpha;
  Vector w(m);
  for (int j = 0; j < m; ++j) w[j] = b.b2[j] / k.H[j];
  r.c2.assign(n, 0.0);
  k.F.multiply(w, r.c2);
  for (int i = 0; i < n; ++i) r.c2[i] += b.b3[i] - k.B_alpha[i] * b.b5 / k.C_alpha;
  return r;
}

Step back_substitute(std::span<const double> dy, std::span<const double> dp, const KktResidual& b,
                     const KktBlocks& k, double c_min) {
  if (!(std::abs(k.C_alpha) >= c_min))
    throw SingularError("elimination singular: |C_alpha| = " + std::to_string(std::abs(k.C_alpha)));
  const int m = k.num_controls();
  Step s;
  s.dy.assign(dy.begin(), dy.end());
  s.dp.assign(dp.begin(), dp.end());
  s.du.assign(m, 0.0);
  k.F.multiply_transpose(dp, s.du);
  for (int j = 0; j < m; ++j) s.du[j] = (b.b2[j] + s.du[j]) / k.H[j];
  s.dalpha = (b.b5 - dot(k.C_y, dy)) / k.C_alpha;
  s.dlambda = (b.b4 - dot(k.B_alpha, dp)) / k.C_alpha;
  return s;
}

HessianKind parse_hessian(const std::string& s) {
  if (s == "gauss_newton") return HessianKind::gauss_newton;
  if (s == "lagrangian") return HessianKind::lagrangian;
  throw Error("unknown Hessian '" + s + "' (expected gauss_newton or lagrangian)");
}

std::string to_string(HessianKind k) { return k == HessianKind::lagrangian ? "lagrangian" : "gauss_newton"; }

double forcing_term(double e_n, double e_prev, const NewtonConfig& cfg) {
  if (!(e_prev > 0.0)) throw DomainError("forcing term: previous residual must be positive");
  return std::min(cfg.gamma * std::pow(e_n / e_prev, cfg.theta), cfg.eta_max);
}

Scaling make_scaling(const KktSystem& sys, const SolverState& s0, double target) {
  Scaling s;
  s.flux = sys.flux_scale();
  double umax = 0.0;
  for (double v : s0.u) umax = std::max(umax, std::abs(v));
  s.i_ref = std::max(1.0, umax);
  s.alpha_ref = s0.alpha != 0.0 ? std::abs(s0.alpha) : 1.0;
  s.current = target != 0.0 ? std::abs(target) : 1.0;
  return s;
}

namespace {

bool is_symmetric(const CsrMatrix& a) {
  const double tol = 1e-13 * a.max_abs();
  for (int i = 0; i < a.rows; ++i)
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      if (std::abs(a.values[k] - a.at(a.col_idx[k], i)) > tol) return false;
  return true;
}

void dump_blocks(const KktBlocks& k, const std::string& dir, int amr_level, int iter) {
  std::filesystem::create_directories(dir);
  const std::string stem = dir + "/L" + std::to_string(amr_level) + "_it" + std::to_string(iter) + "_";
  write_matrix_market(k.B_y, stem + "B_y.mtx");
  write_matrix_market(k.G_yy, stem + "G_yy.mtx");
  write_matrix_market(k.F, stem + "F.mtx");
}

}  // namespace

NewtonResult newton_solve(const KktSystem& sys, SolverState s0, const NewtonConfig& cfg,
                          const LinearSolverConfig& lin, ConvergenceLog* log, int amr_level) {
  NewtonResult res;
  res.state = std::move(s0);
  SolverState& s = res.state;
  std::optional<Scaling> scaling;
  std::optional<KktBlocks> accepted;  // blocks already evaluated by the line search
  double e_prev = 0.0;

  for (int it = 0;; ++it) {
    KktBlocks raw;
    if (accepted) {
      raw = std::move(*accepted);
      accepted.reset();
    } else {
      try {
        raw = sys.evaluate(s);
      } catch (const Error& e) {
        throw Error("Newton iteration " + std::to_string(it) + ": " + e.what());
      }
    }
    if (!scaling) scaling = make_scaling(sys, s, raw.target);
    const KktBlocks k = scale_blocks(raw, *scaling);
    const KktResidual b = scale_residual(kkt_residual(raw, s), *scaling);
    const double e_n = b.norm();
    if (!std::isfinite(e_n)) throw SolverError("Newton iteration " + std::to_string(it) + ": non-finite residual");
    const double cerr = std::abs(raw.C - raw.target) / (raw.target != 0.0 ? std::abs(raw.target) : 1.0);
    res.iterations = it;
    res.residual_norm = e_n;
    res.constraint_error = cerr;

    LogRow row;
    row.amr_level = amr_level;
    row.newton_iter = it;
    row.residual_norm = e_n;
    row.G_value = raw.G;
    row.C_minus_Ip = raw.C - raw.target;
    row.alpha = s.alpha;

    if (e_n <= cfg.abs_tol && cerr <= cfg.constraint_tol) {
      res.converged = true;
      if (log) log->rows.push_back(row);
      break;
    }
    if (it >= cfg.max_iters) {
      if (log) log->rows.push_back(row);
      break;
    }

    const double eta = it == 0 ? cfg.eta_max : forcing_term(e_n, e_prev, cfg);
    e_prev = e_n;
    if (!lin.dump_dir.empty()) dump_blocks(raw, lin.dump_dir, amr_level, it);

    Step d;
    try {
      const ReducedSystem rs = reduce(k, b, cfg.c_min);
      const int n = rs.size();
      AmgHierarchy amg_b(k.amg_matrix, lin.amg);
      std::optional<AmgHierarchy> amg_bt;
      if (!is_symmetric(k.amg_matrix)) amg_bt.emplace(k.amg_matrix.transpose(), lin.amg);
      const AmgHierarchy& bt = amg_bt ? *amg_bt : amg_b;
      BlockPreconditioner pc(
          lin.kind, [&](std::span<const double> r, std::span<double> z) { bt.apply(r, z); },
          [&](std::span<const double> r, std::span<double> z) { amg_b.apply(r, z); },
          [&](std::span<const double> x, std::span<double> y) { rs.apply_A(x, y); },
          [&](std::span<const double> x, std::span<double> y) { rs.apply_C(x, y); }, n);
      FgmresConfig fc;
      fc.tol = eta;
      fc.max_iters = lin.max_iters;
      fc.restart = lin.restart;
      const Vector rhs = rs.rhs();
      const FgmresResult fr = fgmres([&](std::span<const double> x, std::span<double> y) { rs.apply(x, y); },
                                     pc.as_operator(), rhs, fc);
      res.amg_calls += pc.amg_calls();
      res.preconditioner_applications += pc.applications();
      if (!fr.converged)
        throw SolverError("FGMRES stagnated after " + std::to_string(fr.iterations) + " iterations (relative residual " +
                          std::to_string(fr.relative_residual) + ", tolerance " + std::to_string(eta) + ")");
      res.fgmres_iters.push_back(fr.iterations);
      row.eta_n = eta;
      row.fgmres_iters = fr.iterations;
      const std::span<const double> x(fr.x);
      d = unscale_step(back_substitute(x.subspan(n, n), x.subspan(0, n), b, k, cfg.c_min), *scaling);
    } catch (const Error& e) {
      throw SolverError("Newton iteration " + std::to_string(it) + ": " + e.what());
    }
    if (log) log->rows.push_back(row);

    double step_scale = 1.0;
    if (cfg.step_clamp > 0.0) {
      const double ny = kernels::norm2(s.y), nd = kernels::norm2(d.dy);
      if (nd > cfg.step_clamp * ny && nd > 0.0) step_scale = cfg.step_clamp * ny / nd;
    }
    auto advance = [&](double t) {
      SolverState n = s;
      kernels::axpby(t, d.dy, 1.0, n.y);
      kernels::axpby(t, d.du, 1.0, n.u);
      kernels::axpby(t, d.dp, 1.0, n.p);
      n.alpha += t * d.dalpha;
      n.lambda += t * d.dlambda;
      return n;
    };
    if (cfg.line_search <= 0) {
      s = advance(step_scale);
      continue;
    }
    // backtrack until the scaled residual decreases; a trial that loses the
    // topology counts as a failed decrease
    for (int ls = 0;; ++ls) {
      SolverState trial = advance(step_scale);
      double e_trial = std::numeric_limits<double>::infinity();
      std::optional<KktBlocks> kt;
      try {
        kt.emplace(sys.evaluate(trial));
        e_trial = scale_residual(kkt_residual(*kt, trial), *scaling).norm();
      } catch (const Error&) {
        kt.reset();
      }
      if ((std::isfinite(e_trial) && e_trial < (1.0 - 1e-4 * step_scale) * e_n) || (ls == cfg.line_search && kt)) {
        s = std::move(trial);
        accepted = std::move(kt);
        break;
      }
      if (ls == cfg.line_search)
        throw SolverError("Newton iteration " + std::to_string(it) + ": line search found no admissible step");
      step_scale *= 0.5;
    }
  }
  return res;
}

// ---------------------------------------------------------------- problem

void refresh_topology(PlasmaTopology& topo, std::span<const double> y) {
  topo.psi_ma = y[topo.ma_vertex];
  topo.psi_x = y[topo.x_vertex];
}

CsrMatrix assemble_system_matrix(const Mesh& mesh, double mu, const FarfieldQuadrature& ffq) {
  const int n = mesh.num_vertices();
  const CsrMatrix k = assemble_stiffness(mesh, mu);
  const CsrMatrix e = add(k, assemble_farfield(mesh, mu, ffq).to_csr(n));
  TripletBuilder tb(n, n);
  tb.reserve(e.nnz());
  for (int i = 0; i < n; ++i) {
    if (mesh.axis_vertex[i]) {
      tb.add(i, i, 1.0 / mu);
      continue;
    }
    for (int p = e.row_ptr[i]; p < e.row_ptr[i + 1]; ++p)
      if (!mesh.axis_vertex[e.col_idx[p]]) tb.add(i, e.col_idx[p], e.values[p]);
  }
  return tb.build();
}

GsProblem::GsProblem(Mesh mesh, ProfileModel model, double mu, double ip, std::vector<Point> control_points,
                     Regularizer reg, FarfieldQuadrature ffq)
    : mesh_(std::move(mesh)), model_(std::move(model)), mu_(mu), ip_(ip), reg_(std::move(reg)), ffq_(ffq) {
  if (!(mu_ > 0.0)) throw DomainError("permeability must be positive");
  adj_ = build_adjacency(mesh_);
  E_ = assemble_system_matrix(mesh_, mu_, ffq_);
  coils_ = assemble_coil_operator(mesh_);
  // axis rows carry the Dirichlet condition
  for (int i = 0; i < coils_.F.rows; ++i)
    if (mesh_.axis_vertex[i])
      for (int p = coils_.F.row_ptr[i]; p < coils_.F.row_ptr[i + 1]; ++p) coils_.F.values[p] = 0.0;
  if (!reg_.weights.empty() && static_cast<int>(reg_.weights.size()) != mesh_.num_coils)
    throw Error("regularizer weight count does not match the number of coils");
  controls_ = locate_controls(mesh_, control_points);
}

FrozenTopology GsProblem::topology(std::span<const double> y) const {
  FrozenTopology f;
  f.topo = find_topology(mesh_, adj_, y);
  f.mask = flood_fill(mesh_, adj_, y, f.topo);
  return f;
}

PlasmaTerms GsProblem::plasma(const SolverState& s, const FrozenTopology& frozen, bool jacobian) const {
  PlasmaOptions opt;
  opt.jacobian = jacobian;
  return assemble_plasma(mesh_, s.y, frozen.mask, frozen.topo, model_, s.alpha, opt);
}

KktBlocks GsProblem::evaluate(const SolverState& s) const { return evaluate(s, topology(s.y)); }

KktBlocks GsProblem::evaluate(const SolverState& s, const FrozenTopology& frozen) const {
  const int n = num_dofs(), m = num_coils();
  if (static_cast<int>(s.y.size()) != n || static_cast<int>(s.u.size()) != m || static_cast<int>(s.p.size()) != n)
    throw Error("solver state dimensions do not match the problem");
  FrozenTopology fz = frozen;
  refresh_topology(fz.topo, s.y);
  const PlasmaTerms t = plasma(s, fz, true);
  const ObjectiveValue obj = objective_eval(mesh_, controls_, s.y, fz.topo, true);

  KktBlocks k;
  k.B.assign(n, 0.0);
  E_.multiply(s.y, k.B);
  for (int i = 0; i < n; ++i) k.B[i] += t.residual[i];
  // a uniform shift leaves the normalized flux alone, so the axis and
  // X-point columns cancel each local row sum; lump them onto the diagonal
  CsrMatrix lumped = t.local;
  for (int i = 0; i < lumped.rows; ++i) {
    double sum = 0.0;
    for (int q = lumped.row_ptr[i]; q < lumped.row_ptr[i + 1]; ++q) sum += lumped.values[q];
    for (int q = lumped.row_ptr[i]; q < lumped.row_ptr[i + 1]; ++q)
      if (lumped.col_idx[q] == i) lumped.values[q] -= sum;
  }
  k.amg_matrix = add(E_, lumped);
  k.B_y = add(E_, plasma_jacobian_matrix(t, fz.topo));
  if (hessian_ == HessianKind::lagrangian) {
    CsrMatrix w = plasma_lagrangian_hessian(mesh_, s.y, fz.mask, fz.topo, model_, s.alpha, s.p, s.lambda);
    // axis values are fixed
    for (int i = 0; i < n; ++i)
      for (int q = w.row_ptr[i]; q < w.row_ptr[i + 1]; ++q)
        if (mesh_.axis_vertex[i] || mesh_.axis_vertex[w.col_idx[q]]) w.values[q] = 0.0;
    k.G_yy = add(obj.G_yy, w);
  } else {
    k.G_yy = obj.G_yy;
  }
  k.G_y = obj.G_y;
  k.G = obj.G;
  k.F = coils_.F;
  k.H.resize(m);
  for (int j = 0; j < m; ++j) k.H[j] = reg_.h(j);
  k.B_alpha = t.b_alpha;
  k.C_y = t.c_y;
  k.C_alpha = t.c_alpha;
  k.C = t.current;
  k.target = ip_;
  return k;
}

Vector GsProblem::equation_residual(const SolverState& s, const FrozenTopology& frozen) const {
  FrozenTopology fz = frozen;
  refresh_topology(fz.topo, s.y);
  const PlasmaTerms t = plasma(s, fz, false);
  const int n = num_dofs();
  Vector r(n + 1, 0.0);
  E_.multiply(s.y, std::span<double>(r.data(), n));
  Vector fu = coil_source(s.u);
  for (int i = 0; i < n; ++i) r[i] += t.residual[i] - fu[i];
  r[n] = t.current - ip_;
  return r;
}

Vector GsProblem::coil_source(std::span<const double> u) const {
  Vector f(num_dofs(), 0.0);
  coils_.F.multiply(u, f);
  return f;
}

Vector GsProblem::solve_vacuum(std::span<const double> rhs, double tol) const {
  const CsrMatrix a = scaled(E_, mu_);
  const Vector b = scaled(rhs, mu_);
  AmgConfig cfg;
  const AmgHierarchy amg(a, cfg);
  FgmresConfig fc;
  fc.tol = tol;
  fc.max_iters = 2000;
  const FgmresResult r = fgmres([&](std::span<const double> x, std::span<double> y) { a.multiply(x, y); },
                                [&](std::span<const double> x, std::span<double> y) { amg.apply(x, y); }, b, fc);
  if (!r.converged)
    throw SolverError("vacuum solve did not converge (relative residual " + std::to_string(r.relative_residual) + ")");
  return r.x;
}

}  // namespace fbgs
