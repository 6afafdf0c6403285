#include "fbgs/farfield.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>

#include "fbgs/error.hpp"
#include "fbgs/quadrature.hpp"

namespace fbgs {

namespace {

// Carlson symmetric forms by the duplication theorem.
double carlson_rf(double x, double y, double z) {
  constexpr double tol = 0.0008;
  double ave = 0.0, dx = 0.0, dy = 0.0, dz = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double sx = std::sqrt(x), sy = std::sqrt(y), sz = std::sqrt(z);
    const double lambda = sx * (sy + sz) + sy * sz;
    x = 0.25 * (x + lambda);
    y = 0.25 * (y + lambda);
    z = 0.25 * (z + lambda);
    ave = (x + y + z) / 3.0;
    dx = (ave - x) / ave;
    dy = (ave - y) / ave;
    dz = (ave - z) / ave;
    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) < tol) break;
  }
  const double e2 = dx * dy - dz * dz;
  const double e3 = dx * dy * dz;
  return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / std::sqrt(ave);
}

double carlson_rd(double x, double y, double z) {
  constexpr double tol = 0.0008;
  double sum = 0.0, fac = 1.0;
  double ave = 0.0, dx = 0.0, dy = 0.0, dz = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double sx = std::sqrt(x), sy = std::sqrt(y), sz = std::sqrt(z);
    const double lambda = sx * (sy + sz) + sy * sz;
    sum += fac / (sz * (z + lambda));
    fac *= 0.25;
    x = 0.25 * (x + lambda);
    y = 0.25 * (y + lambda);
    z = 0.25 * (z + lambda);
    ave = 0.2 * (x + y + 3.0 * z);
    dx = (ave - x) / ave;
    dy = (ave - y) / ave;
    dz = (ave - z) / ave;
    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) < tol) break;
  }
  constexpr double c1 = 3.0 / 14.0, c2 = 1.0 / 6.0, c3 = 9.0 / 22.0, c4 = 3.0 / 26.0;
  constexpr double c5 = 0.25 * c3, c6 = 1.5 * c4;
  const double ea = dx * dy, eb = dz * dz;
  const double ec = ea - eb, ed = ea - 6.0 * eb, ee = ed + ec + ec;
  return 3.0 * sum + fac * (1.0 + ed * (-c1 + c5 * ed - c6 * dz * ee) + dz * (c2 * ee + dz * (-c3 * ec + dz * c4 * ea))) /
                         (ave * std::sqrt(ave));
}

// Power series in m of (2 - m) E(m) - 2 (1 - m) K(m). The m^0 and m^1
// coefficients cancel exactly; used for small m where the closed form loses
// digits to cancellation.
constexpr int kSeriesTerms = 48;

const std::array<double, kSeriesTerms>& bracket_series() {
  static const std::array<double, kSeriesTerms> coef = [] {
    std::array<double, kSeriesTerms + 1> kc{}, ec{};
    double c = 1.0;
    for (int n = 0; n <= kSeriesTerms; ++n) {
      if (n > 0) c *= ((2.0 * n - 1.0) / (2.0 * n)) * ((2.0 * n - 1.0) / (2.0 * n));
      kc[n] = 0.5 * M_PI * c;
      ec[n] = 0.5 * M_PI * c / (1.0 - 2.0 * n);
    }
    std::array<double, kSeriesTerms> out{};
    for (int n = 2; n < kSeriesTerms; ++n) out[n] = 2.0 * ec[n] - ec[n - 1] - 2.0 * kc[n] + 2.0 * kc[n - 1];
    return out;
  }();
  return coef;
}

double m_bracket(double m, double mc) {
  // (2 - m)/(2 - 2m) E - K
  if (m < 0.2) {
    const auto& c = bracket_series();
    double s = 0.0;
    for (int n = kSeriesTerms - 1; n >= 2; --n) s = s * m + c[n];
    return s * m * m / (2.0 * mc);
  }
  const EllipticKE ke = ellip_KE_parameter(m, mc);
  return (2.0 - m) / (2.0 * mc) * ke.E - ke.K;
}

struct EdgeGeom {
  Point a, b;
  double length;
};

// Dense accumulation target for one ordered pair of edges: 4 local dofs
// (x-edge a, b, y-edge a, b) and the difference vector d.
struct PairIntegrator {
  const EdgeGeom& ex;
  const EdgeGeom& ey;
  double scale;
  std::array<double, 16>& acc;  // local 4x4 over (x0, x1, y0, y1)

  void add_point(double tx, double ty, double w) {
    const Point x = ex.a + tx * (ex.b - ex.a);
    const Point y = ey.a + ty * (ey.b - ey.a);
    const double m = kernel_M(x, y) * w * scale;
    const std::array<double, 4> d = {1.0 - tx, tx, -(1.0 - ty), -ty};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) acc[4 * i + j] += m * d[i] * d[j];
  }

  void tensor(double x0, double x1, double y0, double y1, const quad::LineRule& rx, const quad::LineRule& ry) {
    const double hx = x1 - x0, hy = y1 - y0;
    for (std::size_t i = 0; i < rx.points.size(); ++i)
      for (std::size_t j = 0; j < ry.points.size(); ++j)
        add_point(x0 + hx * rx.points[i], y0 + hy * ry.points[j], rx.weights[i] * ry.weights[j] * hx * hy);
  }

  // Square touching the diagonal tx = ty along its length.
  void diagonal(double s0, double s1, int level, const quad::LineRule& g, const quad::LineRule& g_alt) {
    if (level == 0) {
      tensor(s0, s1, s0, s1, g, g_alt);
      return;
    }
    const double mid = 0.5 * (s0 + s1);
    diagonal(s0, mid, level - 1, g, g_alt);
    diagonal(mid, s1, level - 1, g, g_alt);
    tensor(s0, mid, mid, s1, g, g);
    tensor(mid, s1, s0, mid, g, g);
  }

  // Square with the singular point at its (0, 0) corner.
  void corner(double s1, int level, const quad::LineRule& g, const quad::LineRule& g_alt) {
    if (level == 0) {
      tensor(0.0, s1, 0.0, s1, g, g_alt);
      return;
    }
    const double mid = 0.5 * s1;
    corner(mid, level - 1, g, g_alt);
    tensor(mid, s1, 0.0, mid, g, g);
    tensor(0.0, mid, mid, s1, g, g);
    tensor(mid, s1, mid, s1, g, g);
  }
};

void integrate_pair(const std::vector<EdgeGeom>& geom, const std::vector<std::array<int, 2>>& ldof, int ex, int ey,
                    double mu, const FarfieldQuadrature& fq, const quad::LineRule& g, const quad::LineRule& g_alt,
                    std::array<double, 16>& acc) {
  const double mult = ex == ey ? 1.0 : 2.0;
  const double scale = mult * geom[ex].length * geom[ey].length / (2.0 * mu);
  const int sx0 = ldof[ex][0], sx1 = ldof[ex][1], sy0 = ldof[ey][0], sy1 = ldof[ey][1];
  if (ex == ey) {
    PairIntegrator{geom[ex], geom[ey], scale, acc}.diagonal(0.0, 1.0, fq.singular_levels, g, g_alt);
  } else if (sx0 == sy0 || sx0 == sy1 || sx1 == sy0 || sx1 == sy1) {
    // orient both edges away from the shared vertex so it sits at (0, 0)
    const bool flip_x = sx1 == sy0 || sx1 == sy1;
    const bool flip_y = (flip_x ? sx1 : sx0) == sy1;
    EdgeGeom gx = geom[ex], gy = geom[ey];
    if (flip_x) std::swap(gx.a, gx.b);
    if (flip_y) std::swap(gy.a, gy.b);
    std::array<double, 16> tmp{};
    PairIntegrator{gx, gy, scale, tmp}.corner(1.0, fq.singular_levels, g, g_alt);
    // back to the stored (x0, x1, y0, y1) order
    const int perm[4] = {flip_x ? 1 : 0, flip_x ? 0 : 1, flip_y ? 3 : 2, flip_y ? 2 : 3};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) acc[4 * perm[i] + perm[j]] += tmp[4 * i + j];
  } else {
    PairIntegrator{geom[ex], geom[ey], scale, acc}.tensor(0.0, 1.0, 0.0, 1.0, g, g);
  }
}

}  // namespace

EllipticKE ellip_KE_parameter(double m, double mc) {
  if (!(m >= 0.0) || !(mc > 0.0)) throw DomainError("ellip_KE: modulus must satisfy 0 <= k < 1");
  if (m == 0.0) return {0.5 * M_PI, 0.5 * M_PI};
  const double rf = carlson_rf(0.0, mc, 1.0);
  const double rd = carlson_rd(0.0, mc, 1.0);
  return {rf, rf - m * rd / 3.0};
}

EllipticKE ellip_KE(double k) {
  if (!(k >= 0.0) || !(k < 1.0)) throw DomainError("ellip_KE: modulus must satisfy 0 <= k < 1");
  return ellip_KE_parameter(k * k, (1.0 - k) * (1.0 + k));
}

double kernel_N(Point x, double radius) {
  if (!(x.r > 0.0)) throw DomainError("kernel_N: requires x_r > 0");
  const double dp = std::hypot(x.r, radius + x.z);
  const double dm = std::hypot(x.r, radius - x.z);
  return (1.0 / dp + 1.0 / dm - 1.0 / radius) / x.r;
}

double kernel_M(Point x, Point y) {
  if (!(x.r > 0.0) || !(y.r > 0.0)) throw DomainError("kernel_M: requires positive radial coordinates");
  const double dz = x.z - y.z;
  const double s = (x.r + y.r) * (x.r + y.r) + dz * dz;
  const double diff = (x.r - y.r) * (x.r - y.r) + dz * dz;
  if (diff == 0.0) throw SingularError("kernel_M: coincident points (k = 1)");
  const double m = 4.0 * x.r * y.r / s;
  const double mc = diff / s;
  const double k = std::sqrt(m);
  const double xy = x.r * y.r;
  return k / (2.0 * M_PI * xy * std::sqrt(xy)) * m_bracket(m, mc);
}

void FarfieldOperator::apply_add(std::span<const double> x, std::span<double> y) const {
  const int n = size();
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += block[static_cast<std::size_t>(i) * n + j] * x[dofs[j]];
    y[dofs[i]] += s;
  }
}

CsrMatrix FarfieldOperator::to_csr(int n) const {
  TripletBuilder tb(n, n);
  const int nb = size();
  tb.reserve(static_cast<std::size_t>(nb) * nb);
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j) tb.add(dofs[i], dofs[j], (*this)(i, j));
  return tb.build();
}

FarfieldOperator assemble_farfield(std::span<const Point> vertices, std::span<const Edge> edges, double radius,
                                   double mu, const FarfieldQuadrature& fq) {
  if (edges.size() < 2) throw DomainError("far field: need at least two boundary edges");
  FarfieldOperator op;
  op.radius = radius;
  std::map<int, int> local;
  for (const auto& e : edges) {
    local.emplace(e[0], 0);
    local.emplace(e[1], 0);
  }
  for (auto& [g, l] : local) {
    l = static_cast<int>(op.dofs.size());
    op.dofs.push_back(g);
  }
  const int nb = op.size();
  op.block.assign(static_cast<std::size_t>(nb) * nb, 0.0);
  auto entry = [&](int i, int j) -> double& { return op.block[static_cast<std::size_t>(i) * nb + j]; };

  std::vector<EdgeGeom> geom;
  std::vector<std::array<int, 2>> ldof;
  for (const auto& e : edges) {
    const Point a = vertices[e[0]], b = vertices[e[1]];
    geom.push_back({a, b, std::hypot(b.r - a.r, b.z - a.z)});
    ldof.push_back({local[e[0]], local[e[1]]});
  }
  const auto& g = quad::gauss(fq.gauss_points);
  const auto& g_alt = quad::gauss(fq.gauss_points + 1);

  // single-layer term
  for (std::size_t k = 0; k < geom.size(); ++k) {
    for (std::size_t q = 0; q < g.points.size(); ++q) {
      const double t = g.points[q];
      const Point x = geom[k].a + t * (geom[k].b - geom[k].a);
      const double w = g.weights[q] * geom[k].length * kernel_N(x, radius) / mu;
      const double phi[2] = {1.0 - t, t};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) entry(ldof[k][i], ldof[k][j]) += w * phi[i] * phi[j];
    }
  }

  // double-layer term over unordered pairs; each off-diagonal pair counts
  // twice. Rows of pairs are integrated in parallel batches and scattered in
  // a fixed order.
  const int ne = static_cast<int>(geom.size());
  constexpr int kBatch = 32;
  std::vector<std::array<double, 16>> pair_acc(static_cast<std::size_t>(kBatch) * ne);
  for (int batch = 0; batch < ne; batch += kBatch) {
    const int batch_end = std::min(ne, batch + kBatch);
    std::string error;
#pragma omp parallel for schedule(dynamic)
    for (int ex = batch; ex < batch_end; ++ex) {
      try {
        for (int ey = ex; ey < ne; ++ey) {
          auto& acc = pair_acc[static_cast<std::size_t>(ex - batch) * ne + ey];
          acc.fill(0.0);
          integrate_pair(geom, ldof, ex, ey, mu, fq, g, g_alt, acc);
        }
      } catch (const Error& e) {
#pragma omp critical
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw SingularError(error);
    for (int ex = batch; ex < batch_end; ++ex) {
      for (int ey = ex; ey < ne; ++ey) {
        const auto& acc = pair_acc[static_cast<std::size_t>(ex - batch) * ne + ey];
        const int d[4] = {ldof[ex][0], ldof[ex][1], ldof[ey][0], ldof[ey][1]};
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) entry(d[i], d[j]) += acc[4 * i + j];
      }
    }
  }
  // remove roundoff asymmetry from the single-layer loop
  for (int i = 0; i < nb; ++i)
    for (int j = i + 1; j < nb; ++j) {
      const double s = 0.5 * (entry(i, j) + entry(j, i));
      entry(i, j) = entry(j, i) = s;
    }
  return op;
}

FarfieldOperator assemble_farfield(const Mesh& mesh, double mu, const FarfieldQuadrature& quad) {
  return assemble_farfield(mesh.vertices, mesh.farfield_edges, mesh.radius, mu, quad);
}

}  // namespace fbgs
