#pragma once

#include <vector>

#include "fbgs/config.hpp"
#include "fbgs/kkt.hpp"

namespace fbgs {

/// Loads the mesh and applies the configured uniform refinements.
Mesh load_run_mesh(const RunConfig& cfg);
ProfileModel make_profile_model(const RunConfig& cfg);
GsProblem make_problem(const RunConfig& cfg, Mesh mesh);
GsProblem make_problem(const RunConfig& cfg);

/// Load vector of a uniform current density on the seed ellipse, scaled so
/// that its entries sum to `current`.
Vector seed_source(const Mesh& mesh, const SeedConfig& seed, double current);

/// alpha with C(y, alpha) = I_p on the topology of y. C is at most
/// quadratic in alpha, so three evaluations determine it; the root nearest
/// the linear estimate is returned.
double fit_alpha(const GsProblem& problem, std::span<const double> y);

/// Vacuum flux of the coils plus the seed current, alpha from the current
/// constraint, zero multipliers.
SolverState initial_state(const GsProblem& problem, const RunConfig& cfg);

/// num points equally spaced by arc length on the psi = psi_x contour
/// around the magnetic axis of y.
std::vector<Point> separatrix_points(const GsProblem& problem, std::span<const double> y, int num);

}  // namespace fbgs
