#include "fbgs/fem.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "fbgs/error.hpp"
#include "fbgs/quadrature.hpp"

namespace fbgs {

P1Gradients p1_gradients(Point a, Point b, Point c) {
  P1Gradients g;
  const double area2 = (b.r - a.r) * (c.z - a.z) - (c.r - a.r) * (b.z - a.z);
  g.dr = {(b.z - c.z) / area2, (c.z - a.z) / area2, (a.z - b.z) / area2};
  g.dz = {(c.r - b.r) / area2, (a.r - c.r) / area2, (b.r - a.r) / area2};
  g.area = 0.5 * area2;
  return g;
}

kernels::LocalMatrix local_stiffness(Point a, Point b, Point c, const std::function<double(Point)>& coefficient) {
  const P1Gradients g = p1_gradients(a, b, c);
  const auto& rule = quad::triangle_order2();
  double w = 0.0;
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const auto& l = rule.points[q];
    w += rule.weights[q] * coefficient(l[0] * a + l[1] * b + l[2] * c);
  }
  w *= g.area;
  kernels::LocalMatrix k{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k[3 * i + j] = w * (g.dr[i] * g.dr[j] + g.dz[i] * g.dz[j]);
  return k;
}

CsrMatrix assemble_stiffness(const Mesh& mesh, double mu) {
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!(mesh.centroid(t).r > 0.0))
      throw DomainError("stiffness: element " + std::to_string(t) + " has centroid at r <= 0");
  }
  const auto local = kernels::element_stiffness(mesh, mu);
  TripletBuilder tb(mesh.num_vertices(), mesh.num_vertices());
  tb.reserve(9 * local.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) tb.add(tri[i], tri[j], local[t][3 * i + j]);
  }
  return tb.build();
}

CoilOperator assemble_coil_operator(const Mesh& mesh) {
  if (mesh.num_coils < 1) throw DomainError("coil operator: no coil regions configured");
  CoilOperator op;
  op.areas.assign(mesh.num_coils, 0.0);
  op.weights.assign(mesh.num_coils, 1.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Region& reg = mesh.element_region[t];
    if (reg.kind == RegionKind::coil) op.areas[reg.coil] += mesh.signed_area(t);
  }
  for (int j = 0; j < mesh.num_coils; ++j) {
    if (!(op.areas[j] > 0.0)) throw DomainError("coil operator: coil " + std::to_string(j + 1) + " has zero area");
  }
  TripletBuilder tb(mesh.num_vertices(), mesh.num_coils);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Region& reg = mesh.element_region[t];
    if (reg.kind != RegionKind::coil) continue;
    const double v = mesh.signed_area(t) / (3.0 * op.areas[reg.coil]);
    for (int n : mesh.triangles[t]) tb.add(n, reg.coil, v);
  }
  op.F = tb.build();
  return op;
}

std::array<double, 3> barycentric(Point a, Point b, Point c, Point x) {
  const double area = signed_area(a, b, c);
  return {signed_area(x, b, c) / area, signed_area(a, x, c) / area, signed_area(a, b, x) / area};
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
  neighbor_.assign(mesh.num_triangles(), {-1, -1, -1});
  std::unordered_map<std::uint64_t, std::pair<int, int>> open;
  open.reserve(3 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int a = tri[(k + 1) % 3], b = tri[(k + 2) % 3];
      if (a > b) std::swap(a, b);
      const auto key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
      const auto it = open.find(key);
      if (it == open.end()) {
        open.emplace(key, std::make_pair(t, k));
      } else {
        neighbor_[t][k] = it->second.first;
        neighbor_[it->second.first][it->second.second] = t;
        open.erase(it);
      }
    }
  }
}

bool PointLocator::try_element(int t, Point x, PointLocation& out) const {
  const auto& tri = mesh_->triangles[t];
  const auto w = barycentric(mesh_->vertices[tri[0]], mesh_->vertices[tri[1]], mesh_->vertices[tri[2]], x);
  if (w[0] < -1e-12 || w[1] < -1e-12 || w[2] < -1e-12) return false;
  out.element = t;
  out.vertices = tri;
  out.weights = w;
  return true;
}

PointLocation PointLocator::locate(Point x) const {
  PointLocation loc;
  int t = (last_ >= 0 && last_ < mesh_->num_triangles()) ? last_ : 0;
  // straight-line walk: step across the edge with the most negative weight
  for (int step = 0; step < mesh_->num_triangles(); ++step) {
    const auto& tri = mesh_->triangles[t];
    const auto w = barycentric(mesh_->vertices[tri[0]], mesh_->vertices[tri[1]], mesh_->vertices[tri[2]], x);
    int worst = 0;
    for (int k = 1; k < 3; ++k)
      if (w[k] < w[worst]) worst = k;
    if (w[worst] >= -1e-12) {
      loc = {t, tri, w};
      last_ = t;
      return loc;
    }
    const int next = neighbor_[t][worst];
    if (next < 0) break;
    t = next;
  }
  for (int s = 0; s < mesh_->num_triangles(); ++s) {
    if (try_element(s, x, loc)) {
      last_ = s;
      return loc;
    }
  }
  throw DomainError("point (" + std::to_string(x.r) + ", " + std::to_string(x.z) + ") is outside the mesh");
}

PointValue eval_at_point(const PointLocator& locator, std::span<const double> y, Point x) {
  PointValue pv;
  pv.location = locator.locate(x);
  for (int k = 0; k < 3; ++k) pv.value += pv.location.weights[k] * y[pv.location.vertices[k]];
  return pv;
}

}  // namespace fbgs
