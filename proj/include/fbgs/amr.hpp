#pragma once

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fbgs/kkt.hpp"
#include "fbgs/mesh.hpp"

namespace fbgs {

enum class EstimatorVariant { psi_flux, toroidal_field };
EstimatorVariant parse_estimator(const std::string& s);
std::string to_string(EstimatorVariant v);

struct ErrorEstimate {
  EstimatorVariant variant = EstimatorVariant::psi_flux;
  Vector eta;  // per element, >= 0
  std::vector<std::array<double, 2>> recovered;  // recovered field per vertex

  double total_squared() const;
};

/// Zienkiewicz-Zhu indicator. The elementwise field is sampled at quadrature
/// points and recovered by a lumped L2 projection onto continuous P1.
///
/// psi_flux: the weighted flux grad(psi)/(mu r).
/// toroidal_field: grad of the plasma part of the toroidal field,
/// (f(psi) - f_x)/r, which is zero outside the plasma and kinks at the
/// separatrix. Needs a model with an explicit f and a topology.
ErrorEstimate zz_estimate(const Mesh& mesh, std::span<const double> y, EstimatorVariant variant, double mu,
                          const ProfileModel* model = nullptr, const FrozenTopology* topo = nullptr,
                          double alpha = 0.0);

enum class MarkRule { max_fraction, sum_fraction };

struct MarkingPolicy {
  double theta_limiter = 0.3;
  double theta_outside = 0.7;
  MarkRule rule = MarkRule::max_fraction;
};

/// max_fraction: eta_K > theta * max of eta over the element's region.
/// sum_fraction: eta_K^2 > theta * sum of eta^2 over the region.
/// Regions are the limiter elements and everything else.
std::set<int> mark(const ErrorEstimate& est, const MarkingPolicy& policy, const Mesh& mesh);

struct AmrConfig {
  int levels = 0;
  EstimatorVariant estimator = EstimatorVariant::psi_flux;
  MarkingPolicy policy;
};

struct AmrStepResult {
  std::optional<GsProblem> problem;  // empty when nothing was marked
  SolverState state;
  ErrorEstimate estimate;
  std::set<int> marked;
  NewtonResult newton;
};

/// Estimate, mark, refine, transfer the state and re-solve warm started.
/// y and p are interpolated; u, alpha and lambda are carried over.
AmrStepResult amr_step(const GsProblem& problem, const SolverState& state, const AmrConfig& amr,
                       const NewtonConfig& newton, const LinearSolverConfig& lin, ConvergenceLog* log, int level);

}  // namespace fbgs
