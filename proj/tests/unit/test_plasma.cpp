#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fbgs/error.hpp"
#include "fbgs/kkt.hpp"
#include "fbgs/plasma.hpp"
#include "fixtures.hpp"

using namespace fbgs;

namespace {

constexpr double kMu = 1.25663706144e-6;

struct Fixture {
  Mesh mesh = test::grid_mesh(30, 4.5, -1.5, 3.0, 3.0, {6.0, 0.0}, 1.4);
  AdjacencyMap adj = build_adjacency(mesh);
  std::vector<double> y;
  FrozenTopology frozen;

  Fixture() {
    // the cubic breaks the point symmetry; otherwise the mirror of the
    // x-point vertex sits exactly on the boundary, where the clipped
    // integral has only one-sided derivatives
    y = test::sample(mesh, [](Point p) {
      const double dr = p.r - 6.0;
      return dr * dr + 1.3 * p.z * p.z + 0.1 * dr * p.z + 0.05 * dr * dr * dr - 0.4;
    });
    frozen.topo = find_topology(mesh, adj, y);
    frozen.topo.x_vertex = test::nearest_vertex(mesh, {6.8, 0.3});
    refresh_topology(frozen.topo, y);
    frozen.mask = flood_fill(mesh, adj, y, frozen.topo);
  }

  PlasmaTerms terms(const ProfileModel& m, std::span<const double> yy, double alpha) const {
    PlasmaTopology t = frozen.topo;
    refresh_topology(t, yy);
    return assemble_plasma(mesh, yy, frozen.mask, t, m, alpha);
  }
};

std::vector<ProfileModel> models() {
  std::vector<std::pair<double, double>> pp, f;
  for (int k = 0; k <= 8; ++k) {
    const double x = k / 8.0;
    pp.push_back({x, 2e4 * (1.0 - x)});
    f.push_back({x, 1.0 - x * x});
  }
  return {ProfileModel(LuxonBrown{}, kMu), ProfileModel(TaylorState{33.0}, kMu),
          ProfileModel(make_spline_table(pp, f, 33.0), kMu)};
}

double alpha_for(const ProfileModel& m) {
  if (m.name() == "taylor") return -0.3;
  if (m.name() == "spline") return 0.7;
  return 1e5;
}

Vector direction(int n, const Mesh& mesh, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector phi(n);
  for (int i = 0; i < n; ++i) phi[i] = mesh.axis_vertex[i] ? 0.0 : u(rng);
  return phi;
}

}  // namespace

TEST_CASE("saddle and flood-fill suite on analytic fields") {
  const test::TopologySuite s = test::topology_suite();
  for (const std::string& f : s.failed) FAIL_CHECK(f);
  CHECK(s.failures == 0);
  CHECK(s.checks >= 20);
}

TEST_CASE("saddle test tie rule and minimum ring size") {
  // zero takes the sign before it: + + - - has two changes
  CHECK_FALSE(is_saddle(0.0, std::vector<double>{1.0, 0.0, -1.0, 0.0}));
  CHECK(is_saddle(0.0, std::vector<double>{1.0, -1.0, 0.0, 1.0, -1.0}));
  CHECK_FALSE(is_saddle(0.0, std::vector<double>{1.0, -1.0}));
}

TEST_CASE("topology errors") {
  const Mesh m = test::grid_mesh(4, 4.0, -1.0, 2.0, 2.0, {5.0, 0.0}, 0.0);  // no limiter elements
  const AdjacencyMap adj = build_adjacency(m);
  const auto y = test::sample(m, [](Point p) { return p.r; });
  CHECK_THROWS_AS(find_topology(m, adj, y), TopologyError);
}

TEST_CASE("plasma terms vanish for an empty mask and for alpha = 0") {
  const Fixture fx;
  const ProfileModel taylor(TaylorState{33.0}, kMu);
  PlasmaMask empty = fx.frozen.mask;
  std::fill(empty.vertex.begin(), empty.vertex.end(), VertexStatus::outside);
  std::fill(empty.element.begin(), empty.element.end(), 0);
  empty.num_inside = 0;
  const PlasmaTerms e = assemble_plasma(fx.mesh, fx.y, empty, fx.frozen.topo, taylor, -0.3);
  for (double v : e.residual) CHECK(v == 0.0);
  CHECK(e.current == 0.0);

  const PlasmaTerms z = fx.terms(taylor, fx.y, 0.0);
  for (double v : z.residual) CHECK(v == 0.0);
  for (double v : z.local.values) CHECK(v == 0.0);
  CHECK(z.current == 0.0);
  // C_alpha at alpha = 0 is the integral of f_x/(mu r) over the plasma
  CHECK(z.c_alpha > 0.0);
  const PlasmaTerms z2 = fx.terms(ProfileModel(TaylorState{66.0}, kMu), fx.y, 0.0);
  CHECK(z2.c_alpha == doctest::Approx(2.0 * z.c_alpha));
}

TEST_CASE("residual entries sum to minus the current") {
  const Fixture fx;
  for (const ProfileModel& m : models()) {
    CAPTURE(m.name());
    const PlasmaTerms t = fx.terms(m, fx.y, alpha_for(m));
    const double s = std::accumulate(t.residual.begin(), t.residual.end(), 0.0);
    CHECK(s == doctest::Approx(-t.current).epsilon(1e-12));
    CHECK(t.current != 0.0);
    CHECK_FALSE(t.separatrix.empty());
    // coupling columns only in rows of integrated elements
    std::vector<char> support(fx.mesh.num_vertices(), 0);
    for (int e = 0; e < fx.mesh.num_triangles(); ++e)
      if (t.integrated[e])
        for (int v : fx.mesh.triangles[e]) support[v] = 1;
    for (int i = 0; i < fx.mesh.num_vertices(); ++i)
      if (!support[i]) {
        CHECK(t.col_x[i] == 0.0);
        CHECK(t.col_ma[i] == 0.0);
      }
  }
}

TEST_CASE("frozen-topology derivatives match finite differences") {
  const Fixture fx;
  const int n = fx.mesh.num_vertices();
  for (const ProfileModel& m : models()) {
    CAPTURE(m.name());
    const double alpha = alpha_for(m);
    const PlasmaTerms t0 = fx.terms(m, fx.y, alpha);
    const CsrMatrix jac = plasma_jacobian_matrix(t0, fx.frozen.topo);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (unsigned seed : {1u, 2u, 3u}) {
      const Vector phi = direction(n, fx.mesh, seed);
      const double da = 0.5 * alpha * u(rng);
      const double h = 1e-7;
      Vector yp = fx.y;
      for (int i = 0; i < n; ++i) yp[i] += h * phi[i];
      const PlasmaTerms t1 = fx.terms(m, yp, alpha + h * da);
      Vector jv = jac.multiply(phi);
      for (int i = 0; i < n; ++i) jv[i] += t0.b_alpha[i] * da;
      double num = 0.0, den = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = (t1.residual[i] - t0.residual[i]) / h - jv[i];
        num += e * e;
        den += jv[i] * jv[i];
      }
      CHECK(std::sqrt(num / den) <= 1e-5);
      const double cv = std::inner_product(t0.c_y.begin(), t0.c_y.end(), phi.begin(), 0.0) + t0.c_alpha * da;
      CHECK(std::abs((t1.current - t0.current) / h - cv) <= 1e-5 * std::abs(cv));
    }
  }
}

TEST_CASE("Lagrangian Hessian is symmetric and matches differences of the gradient") {
  const Fixture fx;
  const int n = fx.mesh.num_vertices();
  const ProfileModel taylor(TaylorState{33.0}, kMu);
  const double alpha = -0.3, lambda = 0.7;
  const Vector p = direction(n, fx.mesh, 9);
  // gradient of p^T residual + lambda current at fixed alpha
  auto grad = [&](std::span<const double> yy) {
    const PlasmaTerms t = fx.terms(taylor, yy, alpha);
    Vector g(n, 0.0);
    plasma_jacobian_matrix(t, fx.frozen.topo).multiply_transpose(p, g);
    for (int i = 0; i < n; ++i) g[i] += lambda * t.c_y[i];
    return g;
  };
  PlasmaTopology topo = fx.frozen.topo;
  const CsrMatrix w = plasma_lagrangian_hessian(fx.mesh, fx.y, fx.frozen.mask, topo, taylor, alpha, p, lambda);
  for (int i = 0; i < n; ++i)
    for (int q = w.row_ptr[i]; q < w.row_ptr[i + 1]; ++q)
      CHECK(w.values[q] == doctest::Approx(w.at(w.col_idx[q], i)).scale(w.max_abs()));
  const Vector phi = direction(n, fx.mesh, 10);
  const double h = 1e-6;
  Vector yp = fx.y, ym = fx.y;
  for (int i = 0; i < n; ++i) yp[i] += h * phi[i], ym[i] -= h * phi[i];
  const Vector gp = grad(yp), gm = grad(ym), wv = w.multiply(phi);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = (gp[i] - gm[i]) / (2 * h) - wv[i];
    num += e * e;
    den += wv[i] * wv[i];
  }
  CHECK(den > 0.0);
  CHECK(std::sqrt(num / den) <= 1e-4);
}

TEST_CASE("separatrix guard rejects a flat flux") {
  Fixture fx;
  const ProfileModel taylor(TaylorState{33.0}, kMu);
  std::vector<double> flat = fx.y;
  for (double& v : flat) v *= 1e-12;
  PlasmaTopology t = fx.frozen.topo;
  refresh_topology(t, flat);
  CHECK_THROWS_AS(assemble_plasma(fx.mesh, flat, fx.frozen.mask, t, taylor, -0.3), SingularError);
}
