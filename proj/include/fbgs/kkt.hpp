#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbgs/farfield.hpp"
#include "fbgs/fem.hpp"
#include "fbgs/linsolve.hpp"
#include "fbgs/mesh.hpp"
#include "fbgs/objective.hpp"
#include "fbgs/plasma.hpp"
#include "fbgs/profiles.hpp"
#include "fbgs/sparse.hpp"

namespace fbgs {

struct SolverState {
  Vector y;
  Vector u;
  double alpha = 0.0;
  Vector p;
  double lambda = 0.0;
};

/// Derivative blocks and function values at one state. Everything the Newton
/// step needs; B_y includes the axis/x-point coupling columns, amg_matrix is
/// the sparse elliptic part handed to multigrid.
struct KktBlocks {
  CsrMatrix B_y;
  CsrMatrix amg_matrix;
  CsrMatrix G_yy;
  CsrMatrix F;
  Vector H;  // diagonal of the regularizer Hessian
  Vector B_alpha;
  Vector C_y;
  double C_alpha = 0.0;

  Vector B;         // B(y, alpha)
  Vector G_y;
  double G = 0.0;
  double C = 0.0;   // C(y, alpha)
  double target = 0.0;  // I_p

  int num_dofs() const { return B_y.rows; }
  int num_controls() const { return F.cols; }
};

/// Negated residuals of the optimality system.
struct KktResidual {
  Vector b1, b2, b3;
  double b4 = 0.0, b5 = 0.0;

  double norm() const;
};

KktResidual kkt_residual(const KktBlocks& k, const SolverState& s);

/// Diagonal variable scaling: y by 1, u by i_ref, p by flux, alpha by
/// alpha_ref, lambda by 1/current. Blocks become S K S and residuals S b.
struct Scaling {
  double flux = 1.0;
  double i_ref = 1.0;
  double alpha_ref = 1.0;
  double current = 1.0;
};

KktBlocks scale_blocks(const KktBlocks& k, const Scaling& s);
KktResidual scale_residual(const KktResidual& b, const Scaling& s);

struct Step {
  Vector dy, du, dp;
  double dalpha = 0.0, dlambda = 0.0;
};

/// Undo the scaling of a step computed in scaled variables.
Step unscale_step(const Step& d, const Scaling& s);

/// The reduced 2x2 system [B A; C B^T][dp; dy] = [c1; c2] with
/// A = G_yy, B = B_y^T - C_y B_alpha^T / C_alpha, C = -F H^{-1} F^T.
struct ReducedSystem {
  const KktBlocks* k = nullptr;
  Vector c1, c2;

  int size() const { return k->num_dofs(); }
  /// out = [B dp + A dy; C dp + B^T dy] on the stacked vector (dp, dy).
  void apply(std::span<const double> x, std::span<double> out) const;
  void apply_B(std::span<const double> dp, std::span<double> out) const;
  void apply_BT(std::span<const double> dy, std::span<double> out) const;
  void apply_A(std::span<const double> dy, std::span<double> out) const;
  void apply_C(std::span<const double> dp, std::span<double> out) const;
  Vector rhs() const;
};

/// Throws SingularError when |C_alpha| < c_min.
ReducedSystem reduce(const KktBlocks& k, const KktResidual& b, double c_min = 1e-14);
Step back_substitute(std::span<const double> dy, std::span<const double> dp, const KktResidual& b,
                     const KktBlocks& k, double c_min = 1e-14);

/// (1,1) block of the Newton matrix: the objective Hessian alone, or with the
/// curvature of the plasma terms weighted by the multipliers.
enum class HessianKind { gauss_newton, lagrangian };

HessianKind parse_hessian(const std::string& s);
std::string to_string(HessianKind k);

struct NewtonConfig {
  double abs_tol = 1e-6;
  double constraint_tol = 1e-8;  // on |C - I_p| / |I_p|
  int max_iters = 30;
  double gamma = 0.9;
  double theta = 1.6180339887498949;
  double eta_max = 1e-6;
  double step_clamp = 0.0;  // 0 disables ||dy|| <= clamp ||y||
  int line_search = 0;      // max step halvings on the scaled residual norm, 0 disables
  HessianKind hessian = HessianKind::gauss_newton;  // read by GsProblem
  double c_min = 1e-14;
};

double forcing_term(double e_n, double e_prev, const NewtonConfig& cfg);

struct LinearSolverConfig {
  BlockKind kind = BlockKind::BUT;
  AmgConfig amg;
  int max_iters = 1000;
  int restart = 200;
  std::string dump_dir;  // write Matrix Market blocks per iteration if set
};

struct LogRow {
  int amr_level = 0;
  int newton_iter = 0;
  double residual_norm = 0.0;
  double eta_n = 0.0;
  int fgmres_iters = 0;
  double G_value = 0.0;
  double C_minus_Ip = 0.0;
  double alpha = 0.0;
};

struct ConvergenceLog {
  std::vector<LogRow> rows;
};

/// Anything that can produce KKT blocks at a state.
class KktSystem {
 public:
  virtual ~KktSystem() = default;
  virtual KktBlocks evaluate(const SolverState& s) const = 0;
  /// Row scale of the flux equations (mu for the Grad-Shafranov problem).
  virtual double flux_scale() const { return 1.0; }
};

struct NewtonResult {
  SolverState state;
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  double constraint_error = 0.0;  // |C - I_p| / |I_p|
  std::vector<int> fgmres_iters;
  std::size_t amg_calls = 0;
  std::size_t preconditioner_applications = 0;
};

Scaling make_scaling(const KktSystem& sys, const SolverState& s0, double target);

/// Inexact Newton; full steps unless cfg.line_search allows halving.
/// Throws SolverError when a linear solve misses its tolerance; other errors
/// propagate with the iteration number prefixed.
NewtonResult newton_solve(const KktSystem& sys, SolverState s0, const NewtonConfig& cfg,
                          const LinearSolverConfig& lin, ConvergenceLog* log = nullptr, int amr_level = 0);

// ---------------------------------------------------------------- problem

/// Frozen plasma topology: vertex identities and mask held fixed.
struct FrozenTopology {
  PlasmaTopology topo;
  PlasmaMask mask;
};

/// Same vertices, flux values re-read from y.
void refresh_topology(PlasmaTopology& topo, std::span<const double> y);

/// Discrete free-boundary problem on one mesh.
class GsProblem : public KktSystem {
 public:
  GsProblem(Mesh mesh, ProfileModel model, double mu, double ip, std::vector<Point> control_points,
            Regularizer reg, FarfieldQuadrature ffq = {});

  /// Same settings on another mesh; control points are located again.
  GsProblem with_mesh(Mesh mesh) const {
    GsProblem p(std::move(mesh), model_, mu_, ip_, controls_.points, reg_, ffq_);
    p.set_hessian(hessian_);
    return p;
  }

  void set_hessian(HessianKind k) { hessian_ = k; }
  HessianKind hessian() const { return hessian_; }

  KktBlocks evaluate(const SolverState& s) const override;
  KktBlocks evaluate(const SolverState& s, const FrozenTopology& frozen) const;
  double flux_scale() const override { return mu_; }

  FrozenTopology topology(std::span<const double> y) const;
  PlasmaTerms plasma(const SolverState& s, const FrozenTopology& frozen, bool jacobian = true) const;
  /// B(y, alpha) - F u and C - I_p without derivatives, for finite differences.
  Vector equation_residual(const SolverState& s, const FrozenTopology& frozen) const;

  /// Solve E y = rhs (axis rows forced to zero) by AMG-preconditioned FGMRES.
  Vector solve_vacuum(std::span<const double> rhs, double tol = 1e-12) const;
  Vector coil_source(std::span<const double> u) const;

  const Mesh& mesh() const { return mesh_; }
  const AdjacencyMap& adjacency() const { return adj_; }
  const CsrMatrix& E() const { return E_; }
  const CoilOperator& coils() const { return coils_; }
  const ControlPointSet& controls() const { return controls_; }
  const ProfileModel& model() const { return model_; }
  const Regularizer& regularizer() const { return reg_; }
  const FarfieldQuadrature& farfield_quadrature() const { return ffq_; }
  double mu() const { return mu_; }
  double ip() const { return ip_; }
  int num_dofs() const { return mesh_.num_vertices(); }
  int num_coils() const { return mesh_.num_coils; }

 private:
  Mesh mesh_;
  ProfileModel model_;
  double mu_, ip_;
  Regularizer reg_;
  FarfieldQuadrature ffq_;
  AdjacencyMap adj_;
  CsrMatrix E_;
  CoilOperator coils_;
  ControlPointSet controls_;
  HessianKind hessian_ = HessianKind::gauss_newton;
};

/// E = stiffness + far field, with rows and columns of axis vertices replaced
/// by a diagonal 1/mu.
CsrMatrix assemble_system_matrix(const Mesh& mesh, double mu, const FarfieldQuadrature& ffq);

}  // namespace fbgs
