#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fbgs/sparse.hpp"

namespace fbgs {

/// y = Op x
using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

enum class Cycle { V, W };
Cycle parse_cycle(const std::string& s);
std::string to_string(Cycle c);

struct AmgConfig {
  Cycle cycle = Cycle::V;
  int iterations = 1;         // cycles per application
  double strength = 0.08;     // |a_ij| >= strength * sqrt(|a_ii a_jj|)
  int max_levels = 25;
  int coarse_size = 100;      // stop coarsening at or below this size
  int max_direct = 4000;      // largest coarsest level solved by LU
  int pre_sweeps = 1;
  int post_sweeps = 1;
  int smoother_block = 256;   // rows per Gauss-Seidel block, fixed for determinism
};

/// Smoothed-aggregation multigrid hierarchy with hybrid l1 Gauss-Seidel smoothing and a
/// dense LU solve on the coarsest level.
class AmgHierarchy {
 public:
  AmgHierarchy(const CsrMatrix& a, const AmgConfig& cfg);
  ~AmgHierarchy();
  AmgHierarchy(AmgHierarchy&&) noexcept;
  AmgHierarchy& operator=(AmgHierarchy&&) noexcept;

  /// z = (iterations cycles from a zero initial guess) applied to r.
  void apply(std::span<const double> r, std::span<double> z) const;
  Vector apply(std::span<const double> r) const;
  /// One cycle improving x in place for A x = b.
  void cycle(std::span<const double> b, std::span<double> x) const;

  int num_levels() const;
  std::vector<int> level_sizes() const;
  int size() const;
  const AmgConfig& config() const { return cfg_; }

 private:
  struct Level;
  struct Coarse;
  void cycle_level(int l, std::span<const double> b, std::span<double> x) const;

  AmgConfig cfg_;
  std::vector<Level> levels_;
  std::unique_ptr<Coarse> coarse_;
};

struct FgmresConfig {
  double tol = 1e-6;  // relative to the right-hand side norm
  int max_iters = 1000;
  int restart = 200;
};

struct FgmresResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
};

/// Right-preconditioned flexible GMRES; the preconditioner may change between
/// iterations. A null preconditioner means identity. Throws SolverError on a
/// numerical breakdown.
FgmresResult fgmres(const LinearOperator& op, const LinearOperator& precond, std::span<const double> rhs,
                    const FgmresConfig& cfg, std::span<const double> x0 = {});

enum class BlockKind { BD, BUT, BLT };
BlockKind parse_block_kind(const std::string& s);
std::string to_string(BlockKind k);

/// Block preconditioner for the (dp, dy) system [B A; C B^T]. amg_bt
/// approximates the inverse of B (built on B_y^T), amg_b that of B^T (built
/// on B_y). Every application uses exactly one call of each.
class BlockPreconditioner {
 public:
  BlockPreconditioner(BlockKind kind, LinearOperator amg_bt, LinearOperator amg_b, LinearOperator a_block,
                      LinearOperator c_block, int n);

  void apply(std::span<const double> r, std::span<double> z) const;
  LinearOperator as_operator() const;
  std::size_t amg_calls() const { return calls_; }
  std::size_t applications() const { return applications_; }
  BlockKind kind() const { return kind_; }

 private:
  BlockKind kind_;
  LinearOperator amg_bt_, amg_b_, a_, c_;
  int n_;
  mutable std::size_t calls_ = 0;
  mutable std::size_t applications_ = 0;
};

}  // namespace fbgs
