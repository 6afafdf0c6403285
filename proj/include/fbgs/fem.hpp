#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "fbgs/kernels.hpp"
#include "fbgs/mesh.hpp"
#include "fbgs/sparse.hpp"

namespace fbgs {

/// P1 gradients of the three hat functions of a triangle (constant).
struct P1Gradients {
  std::array<double, 3> dr{};
  std::array<double, 3> dz{};
  double area = 0.0;
};

P1Gradients p1_gradients(Point a, Point b, Point c);

/// Local P1 stiffness for a general scalar coefficient, 3-point rule.
kernels::LocalMatrix local_stiffness(Point a, Point b, Point c, const std::function<double(Point)>& coefficient);

/// Global stiffness for the form integral (1/(mu r)) grad psi . grad v.
/// Throws DomainError naming the element when a centroid or quadrature point
/// lies at r <= 0.
CsrMatrix assemble_stiffness(const Mesh& mesh, double mu);

/// Coil load operator: column j holds integral(v_n)/|Omega_Cj| over coil j.
struct CoilOperator {
  CsrMatrix F;  // num_vertices x num_coils
  std::vector<double> areas;
  std::vector<double> weights;  // regularization weights w_j (default 1)
};

CoilOperator assemble_coil_operator(const Mesh& mesh);

/// Location of a point inside the mesh.
struct PointLocation {
  int element = -1;
  std::array<int, 3> vertices{};
  std::array<double, 3> weights{};
};

/// Walks across element neighbors starting from the previous hit, with a
/// brute-force scan as fallback.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);
  /// Throws DomainError when x is outside the mesh.
  PointLocation locate(Point x) const;
  const Mesh& mesh() const { return *mesh_; }

 private:
  bool try_element(int t, Point x, PointLocation& out) const;

  const Mesh* mesh_;
  std::vector<std::array<int, 3>> neighbor_;  // neighbor across edge opposite vertex k
  mutable int last_ = 0;
};

std::array<double, 3> barycentric(Point a, Point b, Point c, Point x);

struct PointValue {
  double value = 0.0;
  PointLocation location;
};

PointValue eval_at_point(const PointLocator& locator, std::span<const double> y, Point x);

}  // namespace fbgs
