#include "fbgs/plasma.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "fbgs/error.hpp"
#include "fbgs/fem.hpp"
#include "fbgs/quadrature.hpp"

namespace fbgs {

bool is_saddle(double center, std::span<const double> ring) {
  const int n = static_cast<int>(ring.size());
  int first = -1;
  for (int k = 0; k < n; ++k) {
    if (ring[k] != center) {
      first = k;
      break;
    }
  }
  if (first < 0) return false;
  const int first_sign = ring[first] > center ? 1 : -1;
  int prev = first_sign, changes = 0;
  for (int step = 1; step < n; ++step) {
    const double v = ring[(first + step) % n];
    const int s = v == center ? prev : (v > center ? 1 : -1);
    if (s != prev) ++changes;
    prev = s;
  }
  if (prev != first_sign) ++changes;
  return changes >= 4;
}

PlasmaTopology find_topology(std::span<const double> y, const AdjacencyMap& adj, std::span<const Point> coords,
                             const std::vector<char>& limiter, const std::vector<char>& limiter_boundary) {
  PlasmaTopology topo;
  const int nv = static_cast<int>(y.size());
  for (int v = 0; v < nv; ++v) {
    if (!limiter[v]) continue;
    if (topo.ma_vertex < 0 || y[v] < y[topo.ma_vertex]) topo.ma_vertex = v;
  }
  if (topo.ma_vertex < 0) throw TopologyError("topology: empty limiter vertex set");
  topo.psi_ma = y[topo.ma_vertex];

  std::vector<double> ring;
  for (int v = 0; v < nv; ++v) {
    if (!limiter[v] || !adj.closed[v] || !(y[v] > topo.psi_ma)) continue;
    ring.clear();
    for (int n : adj.ring[v]) ring.push_back(y[n]);
    if (ring.size() < 3 || !is_saddle(y[v], ring)) continue;
    if (topo.x_vertex < 0 || y[v] < y[topo.x_vertex]) topo.x_vertex = v;
  }
  topo.x_is_saddle = topo.x_vertex >= 0;
  if (!topo.x_is_saddle) {
    for (int v = 0; v < nv; ++v) {
      if (!limiter_boundary[v]) continue;
      if (topo.x_vertex < 0 || y[v] > y[topo.x_vertex]) topo.x_vertex = v;
    }
    if (topo.x_vertex < 0) throw TopologyError("topology: no saddle and no limiter boundary vertices");
  }
  topo.psi_x = y[topo.x_vertex];
  if (!(topo.psi_x > topo.psi_ma)) throw TopologyError("degenerate topology: psi_x does not exceed psi_ma");
  topo.x_ma = coords[topo.ma_vertex];
  topo.x_x = coords[topo.x_vertex];
  return topo;
}

PlasmaTopology find_topology(const Mesh& mesh, const AdjacencyMap& adj, std::span<const double> y) {
  return find_topology(y, adj, mesh.vertices, mesh.limiter_vertex, mesh.limiter_boundary_vertex);
}

PlasmaMask flood_fill(std::span<const double> y, const PlasmaTopology& topo, const AdjacencyMap& adj,
                      const std::vector<char>& allowed, const Mesh* mesh) {
  PlasmaMask mask;
  const int nv = static_cast<int>(y.size());
  mask.vertex.assign(nv, VertexStatus::outside);
  std::deque<int> queue{topo.ma_vertex};
  mask.vertex[topo.ma_vertex] = VertexStatus::inside;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    ++mask.num_inside;
    for (int n : adj.ring[v]) {
      if (mask.vertex[n] == VertexStatus::inside) continue;
      if (allowed[n] && y[n] > topo.psi_ma && y[n] < topo.psi_x) {
        mask.vertex[n] = VertexStatus::inside;
        queue.push_back(n);
      } else {
        mask.vertex[n] = VertexStatus::adjacent;
      }
    }
  }
  if (mesh) {
    mask.element.assign(mesh->num_triangles(), 0);
    for (int t = 0; t < mesh->num_triangles(); ++t)
      for (int v : mesh->triangles[t])
        if (mask.vertex[v] != VertexStatus::outside) mask.element[t] = 1;
  }
  return mask;
}

PlasmaMask flood_fill(const Mesh& mesh, const AdjacencyMap& adj, std::span<const double> y,
                      const PlasmaTopology& topo) {
  return flood_fill(y, topo, adj, mesh.limiter_vertex, &mesh);
}

namespace {

using Bary = std::array<double, 3>;

struct ElementTerms {
  bool active = false;
  std::array<double, 3> res{}, col_ma{}, col_x{}, b_alpha{}, c_y{};
  std::array<double, 9> jac{};
  double current = 0.0, c_ma = 0.0, c_x = 0.0, c_alpha = 0.0;
  bool has_segment = false;
  Point seg_a, seg_b;
  std::string error;
};

void integrate_element(const Mesh& mesh, int t, const std::array<double, 3>& yv, const PlasmaTopology& topo,
                       const ProfileModel& model, double alpha, const PlasmaOptions& opt, ElementTerms& out) {
  const auto& tri = mesh.triangles[t];
  const Point p[3] = {mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
  const double s[3] = {yv[0] - topo.psi_x, yv[1] - topo.psi_x, yv[2] - topo.psi_x};
  const FluxBounds bounds = topo.bounds();
  const double mu = model.mu();

  // clip the reference triangle to {s < 0}; dv[m][th] is the motion of
  // polygon vertex m with local value th (th = 3 is psi_x)
  using Motion = std::array<Bary, 4>;
  const Bary corner[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<Bary> poly;
  std::vector<Motion> dv;
  std::vector<Bary> crossing;
  for (int k = 0; k < 3; ++k) {
    const int k1 = (k + 1) % 3;
    const bool in0 = s[k] < 0.0, in1 = s[k1] < 0.0;
    if (in0) {
      poly.push_back(corner[k]);
      dv.push_back(Motion{});
    }
    if (in0 != in1) {
      const double den = s[k] - s[k1];
      const double u = s[k] / den;
      const double du0 = -s[k1] / (den * den), du1 = s[k] / (den * den);
      Bary c{};
      Motion m{};
      for (int i = 0; i < 3; ++i) {
        const double e = corner[k1][i] - corner[k][i];
        c[i] = corner[k][i] + u * e;
        m[k][i] = du0 * e;
        m[k1][i] = du1 * e;
        m[3][i] = -(du0 + du1) * e;
      }
      poly.push_back(c);
      dv.push_back(m);
      crossing.push_back(c);
    }
  }
  if (poly.size() < 3) return;
  out.active = true;

  auto point_of = [&](const Bary& l) { return l[0] * p[0] + l[1] * p[1] + l[2] * p[2]; };
  auto det3 = [](const Bary& a, const Bary& b, const Bary& c) {
    return a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0]);
  };
  const double area = signed_area(p[0], p[1], p[2]);
  const auto& rule = quad::triangle_order5();

  // fan triangulation of the clipped polygon; the derivative includes the
  // motion of the crossing points, so it is exact for the quadrature itself
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    const std::size_t vid[3] = {0, k, k + 1};
    const Bary& a = poly[0];
    const Bary& b = poly[k];
    const Bary& c = poly[k + 1];
    const double d = det3(a, b, c);
    const double sigma = area * d < 0.0 ? -area : area;
    const double sub = sigma * d;
    std::array<double, 4> dsub{};
    for (int th = 0; th < 4; ++th)
      dsub[th] = sigma * (det3(dv[vid[0]][th], b, c) + det3(a, dv[vid[1]][th], c) + det3(a, b, dv[vid[2]][th]));

    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const auto& wq = rule.points[q];
      Bary l{};
      for (int i = 0; i < 3; ++i) l[i] = wq[0] * a[i] + wq[1] * b[i] + wq[2] * c[i];
      const Point x = point_of(l);
      const double psi = l[0] * yv[0] + l[1] * yv[1] + l[2] * yv[2];
      const ProfileEval pe = model.partials(psi, bounds, alpha);
      const double r = x.r, cr = 1.0 / (mu * r);
      const double J = r * pe.pprime.value + cr * pe.ffprime.value;
      const double dpsi = r * pe.pprime.d_psi + cr * pe.ffprime.d_psi;
      const double dma = r * pe.pprime.d_ma + cr * pe.ffprime.d_ma;
      const double dx = r * pe.pprime.d_x + cr * pe.ffprime.d_x;
      const double dal = r * pe.pprime.d_alpha + cr * pe.ffprime.d_alpha;
      const double dr = pe.pprime.value - pe.ffprime.value * cr / r;
      const double w = rule.weights[q] * sub;
      out.current += w * J;
      out.c_ma += w * dma;
      out.c_x += w * dx;
      out.c_alpha += w * dal;
      for (int i = 0; i < 3; ++i) {
        out.res[i] -= w * J * l[i];
        out.col_ma[i] -= w * dma * l[i];
        out.col_x[i] -= w * dx * l[i];
        out.b_alpha[i] -= w * dal * l[i];
        out.c_y[i] += w * dpsi * l[i];
        if (opt.jacobian)
          for (int j = 0; j < 3; ++j) out.jac[3 * i + j] -= w * dpsi * l[i] * l[j];
      }
      // node motion
      const double wr = rule.weights[q];
      for (int th = 0; th < 4; ++th) {
        Bary dl{};
        for (int i = 0; i < 3; ++i)
          dl[i] = wq[0] * dv[vid[0]][th][i] + wq[1] * dv[vid[1]][th][i] + wq[2] * dv[vid[2]][th][i];
        const double dxr = dl[0] * p[0].r + dl[1] * p[1].r + dl[2] * p[2].r;
        const double dps = dl[0] * yv[0] + dl[1] * yv[1] + dl[2] * yv[2];
        const double dJ = dr * dxr + dpsi * dps;
        const double dc = wr * (dsub[th] * J + sub * dJ);
        if (th < 3) out.c_y[th] += dc;
        else out.c_x += dc;
        if (!opt.jacobian && th < 3) continue;
        for (int i = 0; i < 3; ++i) {
          const double dres = -wr * (dsub[th] * J * l[i] + sub * (dJ * l[i] + J * dl[i]));
          if (th < 3) out.jac[3 * i + th] += dres;
          else out.col_x[i] += dres;
        }
      }
    }
  }

  // separatrix segment for output, and the conditioning guard
  if (crossing.size() == 2) {
    const Point a = point_of(crossing[0]), b = point_of(crossing[1]);
    if (std::hypot(b.r - a.r, b.z - a.z) > 0.0) {
      out.has_segment = true;
      out.seg_a = a;
      out.seg_b = b;
      const P1Gradients g = p1_gradients(p[0], p[1], p[2]);
      double gr = 0.0, gz = 0.0;
      for (int i = 0; i < 3; ++i) {
        gr += yv[i] * g.dr[i];
        gz += yv[i] * g.dz[i];
      }
      if (std::hypot(gr, gz) < opt.grad_min)
        throw SingularError("plasma: |grad psi| below threshold on separatrix in element " + std::to_string(t));
    }
  }
}

std::array<double, 3> local_values(const Mesh& mesh, int t, std::span<const double> y) {
  const auto& tri = mesh.triangles[t];
  return {y[tri[0]], y[tri[1]], y[tri[2]]};
}

std::vector<int> plasma_elements(const Mesh& mesh, const PlasmaMask& mask) {
  std::vector<int> elems;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.element_region[t].kind != RegionKind::limiter) continue;
    for (int v : mesh.triangles[t]) {
      if (mask.vertex[v] == VertexStatus::inside) {
        elems.push_back(t);
        break;
      }
    }
  }
  return elems;
}

}  // namespace

PlasmaTerms assemble_plasma(const Mesh& mesh, std::span<const double> y, const PlasmaMask& mask,
                            const PlasmaTopology& topo, const ProfileModel& model, double alpha,
                            const PlasmaOptions& opt) {
  const int nv = mesh.num_vertices(), nt = mesh.num_triangles();
  PlasmaTerms out;
  out.residual.assign(nv, 0.0);
  out.col_ma.assign(nv, 0.0);
  out.col_x.assign(nv, 0.0);
  out.b_alpha.assign(nv, 0.0);
  out.c_y.assign(nv, 0.0);
  out.integrated.assign(nt, 0);

  const std::vector<int> elems = plasma_elements(mesh, mask);
  std::vector<ElementTerms> terms(elems.size());
  const int ne = static_cast<int>(elems.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (int k = 0; k < ne; ++k) {
    try {
      integrate_element(mesh, elems[k], local_values(mesh, elems[k], y), topo, model, alpha, opt, terms[k]);
    } catch (const Error& e) {
      terms[k].error = e.what();
    }
  }

  TripletBuilder tb(nv, nv);
  tb.reserve(9 * elems.size());
  for (int k = 0; k < ne; ++k) {
    const ElementTerms& e = terms[k];
    if (!e.error.empty()) throw SingularError(e.error);
    if (!e.active) continue;
    const int t = elems[k];
    out.integrated[t] = 1;
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      out.residual[tri[i]] += e.res[i];
      out.col_ma[tri[i]] += e.col_ma[i];
      out.col_x[tri[i]] += e.col_x[i];
      out.b_alpha[tri[i]] += e.b_alpha[i];
      out.c_y[tri[i]] += e.c_y[i];
      if (opt.jacobian)
        for (int j = 0; j < 3; ++j) tb.add(tri[i], tri[j], e.jac[3 * i + j]);
    }
    out.current += e.current;
    out.c_y[topo.ma_vertex] += e.c_ma;
    out.c_y[topo.x_vertex] += e.c_x;
    out.c_alpha += e.c_alpha;
    if (e.has_segment) out.separatrix.push_back({t, e.seg_a, e.seg_b});
  }
  if (opt.jacobian) out.local = tb.build();
  else {
    out.local.rows = out.local.cols = nv;
    out.local.row_ptr.assign(nv + 1, 0);
  }
  return out;
}

CsrMatrix plasma_jacobian_matrix(const PlasmaTerms& t, const PlasmaTopology& topo) {
  const int n = t.local.rows;
  TripletBuilder tb(n, n);
  tb.reserve(t.local.nnz() + 2 * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int k = t.local.row_ptr[i]; k < t.local.row_ptr[i + 1]; ++k) tb.add(i, t.local.col_idx[k], t.local.values[k]);
  for (int i = 0; i < n; ++i) {
    if (t.col_ma[i] != 0.0) tb.add(i, topo.ma_vertex, t.col_ma[i]);
    if (t.col_x[i] != 0.0) tb.add(i, topo.x_vertex, t.col_x[i]);
  }
  return tb.build();
}

CsrMatrix plasma_lagrangian_hessian(const Mesh& mesh, std::span<const double> y, const PlasmaMask& mask,
                                    const PlasmaTopology& topo, const ProfileModel& model, double alpha,
                                    std::span<const double> p, double lambda, const PlasmaOptions& opt) {
  const int nv = mesh.num_vertices();
  const std::vector<int> elems = plasma_elements(mesh, mask);
  const int ne = static_cast<int>(elems.size());
  const double h = 1e-6 * std::max(1.0, std::abs(topo.psi_x - topo.psi_ma));
  PlasmaOptions o = opt;
  o.jacobian = true;

  // element arguments: three vertex values, psi_ma, psi_x
  std::vector<std::array<double, 25>> hess(elems.size());
  std::vector<std::string> errors(elems.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (int k = 0; k < ne; ++k) {
    const int t = elems[k];
    const auto& tri = mesh.triangles[t];
    const double pv[3] = {p[tri[0]], p[tri[1]], p[tri[2]]};
    auto gradient = [&](const std::array<double, 3>& yv, const PlasmaTopology& tp) {
      ElementTerms e;
      integrate_element(mesh, t, yv, tp, model, alpha, o, e);
      std::array<double, 5> g{};
      for (int j = 0; j < 3; ++j) {
        g[j] = lambda * e.c_y[j];
        for (int i = 0; i < 3; ++i) g[j] += pv[i] * e.jac[3 * i + j];
      }
      g[3] = lambda * e.c_ma;
      g[4] = lambda * e.c_x;
      for (int i = 0; i < 3; ++i) {
        g[3] += pv[i] * e.col_ma[i];
        g[4] += pv[i] * e.col_x[i];
      }
      return g;
    };
    try {
      const std::array<double, 3> y0 = local_values(mesh, t, y);
      std::array<double, 25>& H = hess[k];
      for (int a = 0; a < 5; ++a) {
        std::array<double, 3> yp = y0, ym = y0;
        PlasmaTopology tp = topo, tm = topo;
        if (a < 3) {
          yp[a] += h;
          ym[a] -= h;
        } else if (a == 3) {
          tp.psi_ma += h;
          tm.psi_ma -= h;
        } else {
          tp.psi_x += h;
          tm.psi_x -= h;
        }
        const std::array<double, 5> gp = gradient(yp, tp), gm = gradient(ym, tm);
        for (int b = 0; b < 5; ++b) H[5 * a + b] = (gp[b] - gm[b]) / (2.0 * h);
      }
    } catch (const Error& e) {
      errors[k] = e.what();
    }
  }

  TripletBuilder tb(nv, nv);
  tb.reserve(25 * elems.size());
  for (int k = 0; k < ne; ++k) {
    if (!errors[k].empty()) throw SingularError(errors[k]);
    const auto& tri = mesh.triangles[elems[k]];
    const int g[5] = {tri[0], tri[1], tri[2], topo.ma_vertex, topo.x_vertex};
    const std::array<double, 25>& H = hess[k];
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) {
        const double v = 0.5 * (H[5 * a + b] + H[5 * b + a]);
        if (v != 0.0) tb.add(g[a], g[b], v);
      }
  }
  return tb.build();
}

}  // namespace fbgs
