#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fbgs/fem.hpp"
#include "fbgs/mesh.hpp"
#include "fbgs/plasma.hpp"
#include "fbgs/sparse.hpp"

namespace fbgs {

/// Control points located on one mesh version.
struct ControlPointSet {
  std::vector<Point> points;
  std::vector<PointLocation> location;
  std::uint64_t mesh_version = 0;
};

ControlPointSet locate_controls(const Mesh& mesh, std::span<const Point> points);
std::vector<Point> read_control_points(const std::string& path);

struct ObjectiveValue {
  double G = 0.0;
  Vector G_y;
  CsrMatrix G_yy;
  Vector ybar;
};

/// G(y) = 1/2 sum (ybar_i - 1)^2 with ybar_i = (interp_i(y) - y_ma)/(y_x - y_ma),
/// with gradient and Hessian for fixed axis and x-point vertices.
/// Throws Error if the control set was located on another mesh version.
ObjectiveValue objective_eval(const Mesh& mesh, const ControlPointSet& controls, std::span<const double> y,
                              const PlasmaTopology& topo, bool hessian = true);

/// Tikhonov regularizer R(u) = 1/2 u^T H u, H = eps diag(w).
struct Regularizer {
  double eps = 1e-12;
  std::vector<double> weights;

  double h(int j) const { return eps * (weights.empty() ? 1.0 : weights[j]); }
};

}  // namespace fbgs
