#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fbgs {

/// Point in the poloidal (r, z) half plane, meters.
struct Point {
  double r = 0.0;
  double z = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.r + b.r, a.z + b.z}; }
inline Point operator-(Point a, Point b) { return {a.r - b.r, a.z - b.z}; }
inline Point operator*(double s, Point a) { return {s * a.r, s * a.z}; }

enum class RegionKind { vacuum, limiter, coil };

struct Region {
  RegionKind kind = RegionKind::vacuum;
  int coil = -1;  // 0-based coil index when kind == coil

  static Region vacuum() { return {RegionKind::vacuum, -1}; }
  static Region limiter() { return {RegionKind::limiter, -1}; }
  static Region coil_region(int i) { return {RegionKind::coil, i}; }
  bool operator==(const Region&) const = default;
};

/// Physical-group id -> region tag. Parsed from strings "vacuum", "limiter",
/// "coil:<i>" with 1-based i.
using RegionMap = std::map<int, Region>;
Region parse_region_tag(const std::string& tag);

using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;

/// Conforming triangle mesh of the semicircle r^2 + z^2 <= R^2, r >= 0.
///
/// Triangles are counterclockwise. Vertex 0 of each triangle is its newest
/// vertex; edge (1, 2) is its refinement edge.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<Triangle> triangles;
  std::vector<Region> element_region;
  std::vector<Edge> farfield_edges;
  double radius = 0.0;
  int num_coils = 0;
  /// Unique stamp; a new value is issued for every constructed mesh.
  std::uint64_t version = 0;

  // Derived data, filled by finalize().
  std::vector<char> limiter_vertex;  // vertex of a limiter element
  std::vector<char> limiter_boundary_vertex;  // limiter vertex also touching a non-limiter element
  std::vector<char> axis_vertex;  // r == 0, carries the Dirichlet condition

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double signed_area(int t) const;
  Point centroid(int t) const;
  std::vector<int> limiter_vertex_list() const;

  /// Recompute derived flags, stamp a new version and check invariants.
  /// Throws DomainError naming the offending element or vertex.
  void finalize();
};

double signed_area(Point a, Point b, Point c);

/// Reads the supported Gmsh ASCII 2.2 subset. Triangles whose physical id is
/// missing from `regions` become vacuum. Line elements become far-field edges
/// when both end points lie on the circle of radius R (R is the largest
/// vertex distance from the origin).
Mesh load_mesh(const std::string& path, const RegionMap& regions);

/// Writes the mesh back in the same subset (tags as physical ids: vacuum 1,
/// limiter 2, coil i -> 10 + i, far-field line 100).
void save_mesh(const Mesh& mesh, const std::string& path);

/// Per-vertex ring of neighbors in clockwise angular order. Boundary vertices
/// have open rings which start right after the angular gap.
struct AdjacencyMap {
  std::vector<std::vector<int>> ring;
  std::vector<char> closed;
};

AdjacencyMap build_adjacency(const Mesh& mesh);

/// New vertex n_old + k is the midpoint of edge parents[k]; weights are 1/2.
struct ProlongationMap {
  int old_vertices = 0;
  std::vector<Edge> parents;

  /// Linear transfer of a nodal field.
  std::vector<double> apply(std::span<const double> coarse) const;
  bool is_identity() const { return parents.empty(); }
};

struct RefinementResult {
  Mesh mesh;
  ProlongationMap prolongation;
  /// Parent element of each new triangle.
  std::vector<int> parent;
};

/// Newest-vertex bisection of the marked elements with conforming closure.
/// Far-field midpoints are projected onto the circle of radius R.
RefinementResult refine(const Mesh& mesh, const std::set<int>& marked);
/// Every edge bisected: each triangle is split into four.
RefinementResult refine_uniform(const Mesh& mesh);

/// Rotates triangle vertex order so that the refinement edge (1, 2) is the
/// longest edge. Used once on freshly loaded meshes.
void assign_longest_edge_refinement(Mesh& mesh);

}  // namespace fbgs
