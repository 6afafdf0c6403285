#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fbgs/error.hpp"
#include "fbgs/objective.hpp"
#include "fixtures.hpp"

using namespace fbgs;

namespace {

struct Setup {
  Mesh mesh = test::grid_mesh(12, 4.5, -1.5, 3.0, 3.0, {6.0, 0.0}, 1.4);
  std::vector<double> y;
  PlasmaTopology topo;
  ControlPointSet controls;

  Setup() {
    y = test::sample(mesh, [](Point p) {
      const double dr = p.r - 6.0;
      return dr * dr + 1.2 * p.z * p.z + 0.2 * dr * p.z - 0.5 + 0.1 * std::sin(3 * p.r);
    });
    topo.ma_vertex = test::nearest_vertex(mesh, {6.0, 0.0});
    topo.x_vertex = test::nearest_vertex(mesh, {6.5, -0.9});
    const std::vector<Point> pts{{5.3, 0.2}, {6.7, 0.4}, {6.1, 0.85}, {5.8, -0.7}, {6.55, -0.75}, {6.02, 0.01}};
    controls = locate_controls(mesh, pts);
  }
};

double rel(const Vector& a, const Vector& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("normalized flux at the controls") {
  Setup s;
  std::vector<double> y(s.mesh.num_vertices(), 1.0);
  y[s.topo.ma_vertex] = 0.0;
  const ObjectiveValue v = objective_eval(s.mesh, s.controls, y, s.topo, false);
  REQUIRE(v.ybar.size() == s.controls.points.size());
  // ybar is 1 unless the control's element touches the axis vertex
  double g = 0.0;
  for (std::size_t c = 0; c < v.ybar.size(); ++c) {
    const PointLocation& loc = s.controls.location[c];
    double expect = 1.0;
    for (int k = 0; k < 3; ++k)
      if (loc.vertices[k] == s.topo.ma_vertex) expect -= loc.weights[k];
    CHECK(v.ybar[c] == doctest::Approx(expect));
    g += 0.5 * (expect - 1.0) * (expect - 1.0);
  }
  CHECK(v.G == doctest::Approx(g));
  CHECK(v.G > 0.0);
  CHECK(v.G_yy.rows == 0);
}

TEST_CASE("gradient and Hessian match differences with the vertex ids held fixed") {
  Setup s;
  const int n = s.mesh.num_vertices();
  const ObjectiveValue v = objective_eval(s.mesh, s.controls, s.y, s.topo);
  REQUIRE(v.G > 0.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Vector phi(n);
    for (double& p : phi) p = u(rng);
    const double h = 1e-6;
    Vector yp = s.y, ym = s.y;
    for (int i = 0; i < n; ++i) yp[i] += h * phi[i], ym[i] -= h * phi[i];
    const ObjectiveValue vp = objective_eval(s.mesh, s.controls, yp, s.topo);
    const ObjectiveValue vm = objective_eval(s.mesh, s.controls, ym, s.topo);
    double gphi = 0.0;
    for (int i = 0; i < n; ++i) gphi += v.G_y[i] * phi[i];
    CHECK(std::abs((vp.G - vm.G) / (2 * h) - gphi) <= 1e-6 * std::abs(gphi));
    Vector fd(n);
    for (int i = 0; i < n; ++i) fd[i] = (vp.G_y[i] - vm.G_y[i]) / (2 * h);
    CHECK(rel(fd, v.G_yy.multiply(phi)) <= 1e-4);
  }
  for (int i = 0; i < n; ++i)
    for (int q = v.G_yy.row_ptr[i]; q < v.G_yy.row_ptr[i + 1]; ++q)
      CHECK(v.G_yy.values[q] == doctest::Approx(v.G_yy.at(v.G_yy.col_idx[q], i)));
}

TEST_CASE("objective rejects stale controls and a degenerate topology") {
  Setup s;
  Mesh other = s.mesh;
  other.finalize();
  CHECK_THROWS_AS(objective_eval(other, s.controls, s.y, s.topo), Error);
  std::vector<double> flat(s.mesh.num_vertices(), 2.0);
  CHECK_THROWS_AS(objective_eval(s.mesh, s.controls, flat, s.topo), TopologyError);
}

TEST_CASE("control point file") {
  const auto p = std::filesystem::temp_directory_path() / "fbgs_controls.txt";
  std::ofstream(p) << "# r z\n5.0 0.5\n\n6.5 -1.0 # lower\n";
  const auto pts = read_control_points(p.string());
  REQUIRE(pts.size() == 2);
  CHECK(pts[1].r == 6.5);
  CHECK(pts[1].z == -1.0);
  std::ofstream(p) << "5.0\n";
  CHECK_THROWS_AS(read_control_points(p.string()), ParseError);
  CHECK(read_control_points("data/control_points.txt").size() > 0);
}
