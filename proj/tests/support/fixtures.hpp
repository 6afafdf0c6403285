#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "fbgs/kkt.hpp"
#include "fbgs/mesh.hpp"
#include "fbgs/plasma.hpp"

namespace fbgs::test {

/// Structured triangulation of [r0, r0 + w] x [z0, z0 + h] with n x n cells,
/// each split along its rising diagonal. Elements whose centroid lies closer
/// than limiter_radius to `center` are limiter, the rest vacuum.
inline Mesh grid_mesh(int n, double r0, double z0, double w, double h, Point center, double limiter_radius) {
  Mesh m;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) m.vertices.push_back({r0 + w * i / n, z0 + h * j / n});
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  for (int t = 0; t < m.num_triangles(); ++t) {
    const Point c = m.centroid(t);
    const double d = std::hypot(c.r - center.r, c.z - center.z);
    m.element_region.push_back(d < limiter_radius ? Region::limiter() : Region::vacuum());
  }
  m.radius = 100.0;
  m.finalize();
  return m;
}

inline std::vector<double> sample(const Mesh& m, const std::function<double(Point)>& f) {
  std::vector<double> y;
  for (const Point& p : m.vertices) y.push_back(f(p));
  return y;
}

inline int nearest_vertex(const Mesh& m, Point x) {
  int best = 0;
  double bd = 1e300;
  for (int v = 0; v < m.num_vertices(); ++v) {
    const double d = std::hypot(m.vertices[v].r - x.r, m.vertices[v].z - x.z);
    if (d < bd) bd = d, best = v;
  }
  return best;
}

// ------------------------------------------------------------ elliptic oracle

/// K and E of modulus k by the arithmetic-geometric mean, written from the
/// textbook recurrences independently of the library.
inline std::pair<double, double> agm_KE(double k) {
  long double a = 1.0L, b = std::sqrt(1.0L - static_cast<long double>(k) * k), c = k;
  long double sum = 0.5L * c * c, pow2 = 0.5L;
  for (int it = 0; it < 60 && std::fabs(c) > 1e-22L; ++it) {
    const long double an = 0.5L * (a + b);
    c = 0.5L * (a - b);
    b = std::sqrt(a * b);
    a = an;
    pow2 *= 2.0L;
    sum += pow2 * c * c;
  }
  const long double K = std::numbers::pi_v<long double> / (2.0L * a);
  return {static_cast<double>(K), static_cast<double>(K * (1.0L - sum))};
}

// ------------------------------------------------------------ dense KKT oracle

struct DenseKkt {
  int n = 0, m = 0;
  Eigen::MatrixXd Gyy, By, F;
  Eigen::VectorXd H, Ba, Cy;
  double Ca = 0.0;
  KktBlocks blocks;
  SolverState state;
};

/// Random instance with symmetric positive semidefinite G_yy, positive H and
/// |C_alpha| bounded away from zero.
inline DenseKkt random_kkt(std::mt19937_64& rng, int n, int m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseKkt d;
  d.n = n;
  d.m = m;
  auto rnd = [&](int r, int c) {
    Eigen::MatrixXd a(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) a(i, j) = u(rng);
    return a;
  };
  const Eigen::MatrixXd q = rnd(n, n);
  d.Gyy = q * q.transpose() / n;
  d.By = rnd(n, n) + 3.0 * Eigen::MatrixXd::Identity(n, n);
  d.F = rnd(n, m);
  d.H = (rnd(m, 1).array().abs() + 0.1).matrix();
  d.Ba = rnd(n, 1);
  d.Cy = rnd(n, 1);
  d.Ca = (u(rng) > 0 ? 1.0 : -1.0) * (0.5 + std::abs(u(rng)));

  auto csr = [](const Eigen::MatrixXd& a) {
    std::vector<double> v(static_cast<std::size_t>(a.rows() * a.cols()));
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j) v[static_cast<std::size_t>(i) * a.cols() + j] = a(i, j);
    return CsrMatrix::from_dense(static_cast<int>(a.rows()), static_cast<int>(a.cols()), v);
  };
  auto vec = [](const Eigen::VectorXd& a) { return Vector(a.data(), a.data() + a.size()); };
  KktBlocks& k = d.blocks;
  k.B_y = csr(d.By);
  k.amg_matrix = k.B_y;
  k.G_yy = csr(d.Gyy);
  k.F = csr(d.F);
  k.H = vec(d.H);
  k.B_alpha = vec(d.Ba);
  k.C_y = vec(d.Cy);
  k.C_alpha = d.Ca;
  k.B = vec(rnd(n, 1));
  k.G_y = vec(rnd(n, 1));
  k.C = u(rng);
  k.target = u(rng);
  SolverState& s = d.state;
  s.y = vec(rnd(n, 1));
  s.u = vec(rnd(m, 1));
  s.p = vec(rnd(n, 1));
  s.alpha = u(rng);
  s.lambda = u(rng);
  return d;
}

/// The symmetric Newton matrix in the unknown order (y, u, p, alpha, lambda).
inline Eigen::MatrixXd kkt_matrix(const DenseKkt& d) {
  const int n = d.n, m = d.m, N = 2 * n + m + 2;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N, N);
  const int iu = n, ip = n + m, ia = 2 * n + m, il = ia + 1;
  K.block(0, 0, n, n) = d.Gyy;
  K.block(0, ip, n, n) = d.By.transpose();
  K.block(0, il, n, 1) = d.Cy;
  K.block(iu, iu, m, m) = d.H.asDiagonal();
  K.block(iu, ip, m, n) = -d.F.transpose();
  K.block(ip, 0, n, n) = d.By;
  K.block(ip, iu, n, m) = -d.F;
  K.block(ip, ia, n, 1) = d.Ba;
  K.block(ia, ip, 1, n) = d.Ba.transpose();
  K(ia, il) = d.Ca;
  K.block(il, 0, 1, n) = d.Cy.transpose();
  K(il, ia) = d.Ca;
  return K;
}

inline Eigen::VectorXd stack(const KktResidual& b) {
  const int n = static_cast<int>(b.b1.size()), m = static_cast<int>(b.b2.size());
  Eigen::VectorXd r(2 * n + m + 2);
  for (int i = 0; i < n; ++i) r(i) = b.b1[i];
  for (int j = 0; j < m; ++j) r(n + j) = b.b2[j];
  for (int i = 0; i < n; ++i) r(n + m + i) = b.b3[i];
  r(2 * n + m) = b.b4;
  r(2 * n + m + 1) = b.b5;
  return r;
}

inline Eigen::VectorXd stack(const Step& s) {
  const int n = static_cast<int>(s.dy.size()), m = static_cast<int>(s.du.size());
  Eigen::VectorXd r(2 * n + m + 2);
  for (int i = 0; i < n; ++i) r(i) = s.dy[i];
  for (int j = 0; j < m; ++j) r(n + j) = s.du[j];
  for (int i = 0; i < n; ++i) r(n + m + i) = s.dp[i];
  r(2 * n + m) = s.dalpha;
  r(2 * n + m + 1) = s.dlambda;
  return r;
}

/// Reduced solve: the 2n system assembled column by column from the
/// operator, solved densely, then back-substituted.
inline Step reduced_step(const DenseKkt& d) {
  const KktResidual b = kkt_residual(d.blocks, d.state);
  const ReducedSystem rs = reduce(d.blocks, b);
  const int n = d.n;
  Eigen::MatrixXd R(2 * n, 2 * n);
  Vector e(2 * n, 0.0), col(2 * n);
  for (int j = 0; j < 2 * n; ++j) {
    e[j] = 1.0;
    rs.apply(e, col);
    for (int i = 0; i < 2 * n; ++i) R(i, j) = col[i];
    e[j] = 0.0;
  }
  const Vector rhs = rs.rhs();
  const Eigen::VectorXd x = R.fullPivLu().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), 2 * n));
  const Vector dp(x.data(), x.data() + n), dy(x.data() + n, x.data() + 2 * n);
  return back_substitute(dy, dp, b, d.blocks);
}

struct KktOracleResult {
  double max_rel_error = 0.0;
  double max_asymmetry = 0.0;
};

inline KktOracleResult kkt_oracle(int instances, unsigned seed) {
  std::mt19937_64 rng(seed);
  KktOracleResult out;
  for (int t = 0; t < instances; ++t) {
    const int n = 2 + t % 7, m = 1 + t % 3;
    const DenseKkt d = random_kkt(rng, n, m);
    const Eigen::MatrixXd K = kkt_matrix(d);
    out.max_asymmetry = std::max(out.max_asymmetry, (K - K.transpose()).cwiseAbs().maxCoeff() / K.cwiseAbs().maxCoeff());
    const Eigen::VectorXd direct = K.fullPivLu().solve(stack(kkt_residual(d.blocks, d.state)));
    const Eigen::VectorXd reduced = stack(reduced_step(d));
    out.max_rel_error = std::max(out.max_rel_error, (reduced - direct).norm() / direct.norm());
  }
  return out;
}

// ------------------------------------------------------------ topology suite

struct TopologySuite {
  int checks = 0;
  int failures = 0;
  std::vector<std::string> failed;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) ++failures, failed.push_back(what);
  }
};

/// Quadric saddle classification and flood-fill region recovery on analytic
/// fields over a structured grid with spacing 0.1 around (6, 0).
inline TopologySuite topology_suite() {
  TopologySuite s;
  const Point c{6.0, 0.0};

  // ring samples of quadrics around the origin, clockwise from +r
  std::vector<double> saddle_ring, bowl_ring;
  for (int k = 0; k < 8; ++k) {
    const double th = -2.0 * std::numbers::pi * k / 8.0 + 0.1;
    const double r = std::cos(th), z = std::sin(th);
    saddle_ring.push_back(r * r - z * z);
    bowl_ring.push_back(r * r + z * z);
  }
  s.expect(is_saddle(0.0, saddle_ring), "r^2 - z^2 is a saddle");
  s.expect(!is_saddle(0.0, bowl_ring), "r^2 + z^2 is not a saddle");
  std::vector<double> shifted = saddle_ring;
  for (double& v : shifted) v = 3.0 * v + 7.0;
  s.expect(is_saddle(7.0, shifted), "saddle invariant under shift and scale");
  s.expect(is_saddle(0.0, std::vector<double>{1, -1, 1, -1, 1, -1}), "alternating ring");
  s.expect(!is_saddle(0.0, std::vector<double>{1, 1, 1, 1, 1, 1}), "constant ring");

  const Mesh disc = grid_mesh(40, 4.0, -2.0, 4.0, 4.0, c, 1.5);
  const AdjacencyMap adj = build_adjacency(disc);

  // paraboloid: axis at the center, no saddle, x-point from the fallback
  {
    const auto y = sample(disc, [&](Point p) { return (p.r - c.r) * (p.r - c.r) + p.z * p.z; });
    const PlasmaTopology t = find_topology(disc, adj, y);
    s.expect(t.ma_vertex == nearest_vertex(disc, c), "paraboloid axis vertex");
    s.expect(!t.x_is_saddle, "paraboloid has no saddle");
    s.expect(disc.limiter_boundary_vertex[t.x_vertex] != 0, "paraboloid fallback on the limiter boundary");
    double bmax = -1e300;
    for (int v = 0; v < disc.num_vertices(); ++v)
      if (disc.limiter_boundary_vertex[v]) bmax = std::max(bmax, y[v]);
    s.expect(t.psi_x == bmax, "fallback is the boundary maximum");

    // flood fill recovers the disc of radius rho
    const double rho = 1.0;
    PlasmaTopology ft = t;
    ft.psi_x = rho * rho;
    const PlasmaMask mask = flood_fill(disc, adj, y, ft);
    bool exact = true, adjacent_ok = true;
    for (int v = 0; v < disc.num_vertices(); ++v) {
      const double d = std::hypot(disc.vertices[v].r - c.r, disc.vertices[v].z);
      const bool inside = mask.vertex[v] == VertexStatus::inside;
      if (inside != (d < rho) && std::abs(d - rho) > 0.1 + 1e-12) exact = false;
      if (mask.vertex[v] == VertexStatus::adjacent) {
        bool nb = false;
        for (int w : adj.ring[v]) nb |= mask.vertex[w] == VertexStatus::inside;
        adjacent_ok &= nb;
      }
    }
    s.expect(exact, "flood fill recovers the disc up to one layer");
    s.expect(adjacent_ok, "adjacent vertices border the inside set");
    s.expect(mask.vertex[t.ma_vertex] == VertexStatus::inside, "axis is inside");

    // order-preserving rescaling leaves membership alone
    std::vector<double> y2 = y;
    for (double& v : y2) v = 5.0 * v - 2.0;
    PlasmaTopology ft2 = ft;
    ft2.psi_ma = 5.0 * ft.psi_ma - 2.0;
    ft2.psi_x = 5.0 * ft.psi_x - 2.0;
    const PlasmaMask mask2 = flood_fill(disc, adj, y2, ft2);
    s.expect(mask2.vertex == mask.vertex, "flood fill invariant under rescaling");

    // psi_x barely above the axis value: only the axis is inside
    PlasmaTopology tiny = t;
    tiny.psi_x = t.psi_ma + 1e-14;
    const PlasmaMask m1 = flood_fill(disc, adj, y, tiny);
    bool ring_adjacent = true;
    for (int w : adj.ring[t.ma_vertex]) ring_adjacent &= m1.vertex[w] == VertexStatus::adjacent;
    s.expect(m1.num_inside == 1 && ring_adjacent, "degenerate region is the axis alone");
  }

  // two basins: the far one is below psi_x but not connected to the axis
  {
    const Point far{7.2, 0.0};
    auto f = [&](Point p) {
      const double a = (p.r - 5.4) * (p.r - 5.4) + p.z * p.z;
      const double b = (p.r - far.r) * (p.r - far.r) + p.z * p.z + 0.05;
      return std::min(a, b);
    };
    const Mesh wide = grid_mesh(40, 4.0, -2.0, 4.0, 4.0, c, 3.0);
    const AdjacencyMap wadj = build_adjacency(wide);
    const auto y = sample(wide, f);
    PlasmaTopology t = find_topology(wide, wadj, y);
    s.expect(t.ma_vertex == nearest_vertex(wide, {5.4, 0.0}), "two-basin axis in the deeper basin");
    t.psi_x = 0.2;
    const PlasmaMask mask = flood_fill(wide, wadj, y, t);
    s.expect(mask.vertex[nearest_vertex(wide, far)] == VertexStatus::outside, "disconnected basin stays outside");
    s.expect(mask.vertex[nearest_vertex(wide, {5.4, 0.3})] == VertexStatus::inside, "axis basin is inside");
  }

  // double well along z: saddle between the wells
  {
    auto f = [&](Point p) { return (p.r - c.r) * (p.r - c.r) + p.z * p.z * (p.z * p.z - 1.0); };
    const Mesh m = grid_mesh(40, 4.0, -2.0, 4.0, 4.0, c, 1.9);
    const AdjacencyMap madj = build_adjacency(m);
    const auto y = sample(m, f);
    const PlasmaTopology t = find_topology(m, madj, y);
    s.expect(t.x_is_saddle, "double well has a saddle");
    s.expect(t.x_vertex == nearest_vertex(m, c), "double-well saddle at the analytic point");
    s.expect(std::abs(std::abs(m.vertices[t.ma_vertex].z) - std::sqrt(0.5)) < 0.1, "double-well axis in a well");
  }

  // two saddles: the one closest above psi_ma is chosen
  {
    auto f = [&](Point p) {
      return (p.r - c.r) * (p.r - c.r) + 1.0 - std::cos(2.0 * std::numbers::pi * p.z / 1.2) + 0.1 * p.z;
    };
    const Mesh m = grid_mesh(40, 4.0, -1.0, 4.0, 2.0, c, 1.9);
    const AdjacencyMap madj = build_adjacency(m);
    const auto y = sample(m, f);
    const PlasmaTopology t = find_topology(m, madj, y);
    s.expect(t.x_is_saddle && std::abs(m.vertices[t.x_vertex].z + 0.6) < 0.051, "lower saddle selected");
    s.expect(std::abs(m.vertices[t.x_vertex].r - c.r) < 1e-9, "selected saddle on the symmetry line");
  }
  return s;
}

}  // namespace fbgs::test
