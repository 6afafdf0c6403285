#pragma once

#include <span>
#include <vector>

#include "fbgs/mesh.hpp"
#include "fbgs/profiles.hpp"
#include "fbgs/sparse.hpp"

namespace fbgs {

struct PlasmaTopology {
  int ma_vertex = -1;
  int x_vertex = -1;
  Point x_ma;
  Point x_x;
  double psi_ma = 0.0;
  double psi_x = 0.0;
  bool x_is_saddle = false;

  FluxBounds bounds() const { return {psi_ma, psi_x}; }
};

/// True when the cyclic sign sequence of ring - center has four or more
/// changes. A value equal to the center takes its clockwise predecessor's
/// sign.
bool is_saddle(double center, std::span<const double> ring);

/// Axis: minimum of y over limiter vertices. X-point: the saddle (closed-ring
/// limiter vertex) whose value is closest above psi_ma; otherwise the maximum
/// over limiter-boundary vertices. Throws TopologyError for an empty limiter
/// set or a degenerate result.
PlasmaTopology find_topology(std::span<const double> y, const AdjacencyMap& adj, std::span<const Point> coords,
                             const std::vector<char>& limiter, const std::vector<char>& limiter_boundary);
PlasmaTopology find_topology(const Mesh& mesh, const AdjacencyMap& adj, std::span<const double> y);

enum class VertexStatus : char { outside = 0, adjacent = 1, inside = 2 };

struct PlasmaMask {
  std::vector<VertexStatus> vertex;
  /// Element has an inside or adjacent vertex.
  std::vector<char> element;
  int num_inside = 0;
};

/// Breadth-first fill from the axis through allowed vertices with
/// psi_ma < y < psi_x. Neighbors that fail the test are marked adjacent.
PlasmaMask flood_fill(std::span<const double> y, const PlasmaTopology& topo, const AdjacencyMap& adj,
                      const std::vector<char>& allowed, const Mesh* mesh = nullptr);
PlasmaMask flood_fill(const Mesh& mesh, const AdjacencyMap& adj, std::span<const double> y,
                      const PlasmaTopology& topo);

/// Separatrix segment inside one element.
struct SeparatrixSegment {
  int element;
  Point a, b;
};

/// Plasma contribution to the residual and its derivatives under a frozen
/// topology (vertex identities and mask fixed).
///
/// The plasma region inside each element is the exact sublevel set
/// {psi_h < psi_x} of the P1 field, taken over limiter elements that contain
/// an inside vertex.
struct PlasmaTerms {
  Vector residual;        // -integral J v_i
  CsrMatrix local;        // d residual / d y, without the axis/x-point columns
  Vector col_ma, col_x;   // columns at topo.ma_vertex and topo.x_vertex
  Vector b_alpha;         // d residual / d alpha
  double current = 0.0;   // integral J
  Vector c_y;             // d current / d y (full, including axis/x-point entries)
  double c_alpha = 0.0;
  std::vector<SeparatrixSegment> separatrix;
  std::vector<char> integrated;  // elements that contribute
};

struct PlasmaOptions {
  bool jacobian = true;
  /// Smallest admissible |grad psi| on separatrix segments.
  double grad_min = 1e-10;
};

PlasmaTerms assemble_plasma(const Mesh& mesh, std::span<const double> y, const PlasmaMask& mask,
                            const PlasmaTopology& topo, const ProfileModel& model, double alpha,
                            const PlasmaOptions& opt = {});

/// local + the two coupling columns as one sparse matrix.
CsrMatrix plasma_jacobian_matrix(const PlasmaTerms& t, const PlasmaTopology& topo);

/// Second derivative in y of p^T residual + lambda current, the plasma part
/// of the Lagrangian, under the same frozen topology. Element Hessians come
/// from central differences of the exact element gradients; the result is
/// symmetric.
CsrMatrix plasma_lagrangian_hessian(const Mesh& mesh, std::span<const double> y, const PlasmaMask& mask,
                                    const PlasmaTopology& topo, const ProfileModel& model, double alpha,
                                    std::span<const double> p, double lambda, const PlasmaOptions& opt = {});

}  // namespace fbgs
