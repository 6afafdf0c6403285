#pragma once

#include <array>
#include <span>
#include <vector>

namespace fbgs::quad {

/// Rule on the reference triangle in barycentric coordinates. Weights sum to
/// 1 (multiply by the element area).
struct TriangleRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int order = 0;
};

/// Rule on [0, 1]; weights sum to 1.
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// 3-point, exact for quadratics.
const TriangleRule& triangle_order2();
/// 7-point, exact for quintics.
const TriangleRule& triangle_order5();
/// Gauss-Legendre with n points on [0, 1], n in 1..6.
const LineRule& gauss(int n);

}  // namespace fbgs::quad
