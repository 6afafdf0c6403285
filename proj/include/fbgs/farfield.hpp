#pragma once

#include <span>
#include <vector>

#include "fbgs/mesh.hpp"
#include "fbgs/sparse.hpp"

namespace fbgs {

struct EllipticKE {
  double K = 0.0;
  double E = 0.0;
};

/// Complete elliptic integrals of the first and second kind for modulus k,
/// 0 <= k < 1. Throws DomainError otherwise.
EllipticKE ellip_KE(double k);

/// Same, from the parameter m = k^2 and its complement mc = 1 - m supplied
/// separately so that mc keeps full relative precision near k = 1.
EllipticKE ellip_KE_parameter(double m, double mc);

/// Single-layer kernel of the far-field form; x on the circle of radius R.
double kernel_N(Point x, double radius);

/// Double-layer kernel of the far-field form. Throws SingularError for
/// coincident points and DomainError for r <= 0.
double kernel_M(Point x, Point y);

/// Quadrature controls for the boundary double integral.
struct FarfieldQuadrature {
  int gauss_points = 4;
  int singular_levels = 3;
};

/// Dense symmetric block over the far-field vertices.
struct FarfieldOperator {
  std::vector<int> dofs;       // boundary dof -> global vertex index
  std::vector<double> block;   // row-major dofs.size() squared
  double radius = 0.0;

  int size() const { return static_cast<int>(dofs.size()); }
  double operator()(int i, int j) const { return block[static_cast<std::size_t>(i) * dofs.size() + j]; }
  /// y += A x on global vectors.
  void apply_add(std::span<const double> x, std::span<double> y) const;
  /// Scatter into a global sparse matrix of dimension n.
  CsrMatrix to_csr(int n) const;
};

/// Assembles (1/mu) int psi N v + (1/(2 mu)) int int (psi(x) - psi(y)) M
/// (v(x) - v(y)) over the straight boundary edges.
FarfieldOperator assemble_farfield(std::span<const Point> vertices, std::span<const Edge> edges, double radius,
                                   double mu, const FarfieldQuadrature& quad = {});
FarfieldOperator assemble_farfield(const Mesh& mesh, double mu, const FarfieldQuadrature& quad = {});

}  // namespace fbgs
