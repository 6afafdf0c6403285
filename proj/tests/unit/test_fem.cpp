#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fbgs/config.hpp"
#include "fbgs/error.hpp"
#include "fbgs/fem.hpp"
#include "fbgs/quadrature.hpp"
#include "fixtures.hpp"

using namespace fbgs;

namespace {

const Mesh& desk_mesh() {
  static const Mesh m = load_mesh("data/synthetic_tokamak.msh", default_region_map());
  return m;
}

}  // namespace

TEST_CASE("quadrature rules integrate their design degree exactly") {
  // integral of x^a y^b over the reference triangle is a! b! / (a + b + 2)!
  auto exact = [](int a, int b) { return std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 3) * 2.0; };
  for (const quad::TriangleRule* rule : {&quad::triangle_order2(), &quad::triangle_order5()}) {
    double w = std::accumulate(rule->weights.begin(), rule->weights.end(), 0.0);
    CHECK(w == doctest::Approx(1.0));
    for (int a = 0; a <= rule->order; ++a)
      for (int b = 0; a + b <= rule->order; ++b) {
        double s = 0.0;
        for (std::size_t q = 0; q < rule->points.size(); ++q)
          s += rule->weights[q] * std::pow(rule->points[q][1], a) * std::pow(rule->points[q][2], b);
        CHECK(s == doctest::Approx(exact(a, b)));
      }
  }
  for (int n = 1; n <= 6; ++n) {
    const quad::LineRule& g = quad::gauss(n);
    double s = 0.0;
    for (std::size_t q = 0; q < g.points.size(); ++q) s += g.weights[q] * std::pow(g.points[q], 2 * n - 1);
    CHECK(s == doctest::Approx(1.0 / (2 * n)));
  }
}

TEST_CASE("P1 gradients reproduce linear fields") {
  const Point a{1.0, 0.0}, b{3.0, 0.5}, c{1.5, 2.0};
  const P1Gradients g = p1_gradients(a, b, c);
  CHECK(g.area == doctest::Approx(signed_area(a, b, c)));
  auto f = [](Point p) { return 2.0 * p.r - 5.0 * p.z; };
  double dr = g.dr[0] * f(a) + g.dr[1] * f(b) + g.dr[2] * f(c);
  double dz = g.dz[0] * f(a) + g.dz[1] * f(b) + g.dz[2] * f(c);
  CHECK(dr == doctest::Approx(2.0));
  CHECK(dz == doctest::Approx(-5.0));
  const auto bc = barycentric(a, b, c, {1.8, 0.8});
  CHECK(bc[0] + bc[1] + bc[2] == doctest::Approx(1.0));
  CHECK(bc[0] * a.r + bc[1] * b.r + bc[2] * c.r == doctest::Approx(1.8));
}

TEST_CASE("stiffness energy of psi = z is the integral of 1/(mu r)") {
  const double mu = 2.0;
  const Mesh m = test::grid_mesh(16, 1.0, 0.0, 1.0, 0.5, {1.5, 0.25}, 10.0);
  const CsrMatrix k = assemble_stiffness(m, mu);
  const auto y = test::sample(m, [](Point p) { return p.z; });
  const Vector ky = k.multiply(y);
  const double energy = std::inner_product(y.begin(), y.end(), ky.begin(), 0.0);
  CHECK(energy == doctest::Approx(0.5 * std::log(2.0) / mu).epsilon(1e-4));
  // constants are in the kernel
  const Vector k1 = k.multiply(Vector(m.num_vertices(), 1.0));
  for (double v : k1) CHECK(v == doctest::Approx(0.0).scale(k.max_abs()));
  for (int i = 0; i < k.rows; ++i)
    for (int q = k.row_ptr[i]; q < k.row_ptr[i + 1]; ++q)
      CHECK(k.values[q] == doctest::Approx(k.at(k.col_idx[q], i)));
}

TEST_CASE("local stiffness with unit coefficient is the Laplacian") {
  const Point a{1.0, 0.0}, b{2.0, 0.0}, c{1.0, 1.0};
  const auto k = local_stiffness(a, b, c, [](Point) { return 1.0; });
  CHECK(k[0] == doctest::Approx(1.0));
  CHECK(k[4] == doctest::Approx(0.5));
  CHECK(k[1] == doctest::Approx(-0.5));
  CHECK(k[5] == doctest::Approx(0.0));
}

TEST_CASE("coil operator columns average over each coil") {
  const Mesh& m = desk_mesh();
  const CoilOperator c = assemble_coil_operator(m);
  CHECK(c.F.rows == m.num_vertices());
  CHECK(c.F.cols == 11);
  Vector ones(m.num_vertices(), 1.0), col(11);
  c.F.multiply_transpose(ones, col);
  for (double v : col) CHECK(v == doctest::Approx(1.0));
  std::vector<double> area(11, 0.0);
  for (int t = 0; t < m.num_triangles(); ++t)
    if (m.element_region[t].kind == RegionKind::coil) area[m.element_region[t].coil] += m.signed_area(t);
  for (int j = 0; j < 11; ++j) CHECK(c.areas[j] == doctest::Approx(area[j]));
  // nonzeros only on coil vertices
  for (int i = 0; i < c.F.rows; ++i)
    for (int q = c.F.row_ptr[i]; q < c.F.row_ptr[i + 1]; ++q) {
      bool on = false;
      for (int t = 0; t < m.num_triangles() && !on; ++t)
        if (m.element_region[t].kind == RegionKind::coil && m.element_region[t].coil == c.F.col_idx[q])
          on = m.triangles[t][0] == i || m.triangles[t][1] == i || m.triangles[t][2] == i;
      CHECK(on);
      if (i > 200) break;
    }
}

TEST_CASE("point location and interpolation") {
  const Mesh& m = desk_mesh();
  const PointLocator loc(m);
  std::vector<double> y;
  for (const Point& p : m.vertices) y.push_back(3.0 * p.r + p.z);
  for (Point x : {Point{6.2, 0.3}, Point{2.0, -5.0}, Point{10.0, 4.0}, Point{6.2, 0.35}}) {
    const PointValue v = eval_at_point(loc, y, x);
    CHECK(v.value == doctest::Approx(3.0 * x.r + x.z));
    CHECK(v.location.element >= 0);
  }
  CHECK_THROWS_AS(loc.locate({1000.0, 0.0}), DomainError);
}
