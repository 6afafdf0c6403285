#include "fbgs/objective.hpp"

#include <fstream>
#include <sstream>

#include "fbgs/error.hpp"

namespace fbgs {

ControlPointSet locate_controls(const Mesh& mesh, std::span<const Point> points) {
  ControlPointSet set;
  set.points.assign(points.begin(), points.end());
  set.mesh_version = mesh.version;
  PointLocator locator(mesh);
  for (const Point& p : points) set.location.push_back(locator.locate(p));
  return set;
}

std::vector<Point> read_control_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open control points " + path);
  std::vector<Point> pts;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double r, z;
    if (!(ss >> r)) continue;
    if (!(ss >> z)) throw ParseError("expected two columns in " + path, line_no);
    pts.push_back({r, z});
  }
  return pts;
}

ObjectiveValue objective_eval(const Mesh& mesh, const ControlPointSet& controls, std::span<const double> y,
                              const PlasmaTopology& topo, bool hessian) {
  if (controls.mesh_version != mesh.version) throw Error("objective: control points located on a stale mesh");
  const int n = static_cast<int>(y.size());
  const int ma = topo.ma_vertex, xv = topo.x_vertex;
  const double d = y[xv] - y[ma];
  if (d == 0.0) throw TopologyError("degenerate topology: psi_x equals psi_ma");

  ObjectiveValue out;
  out.G_y.assign(n, 0.0);
  TripletBuilder tb(n, n);
  // sparse gradient of one ybar_i: up to 5 entries
  std::vector<std::pair<int, double>> g;
  for (const PointLocation& loc : controls.location) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += loc.weights[k] * y[loc.vertices[k]];
    const double yb = (s - y[ma]) / d;
    out.ybar.push_back(yb);
    const double res = yb - 1.0;
    out.G += 0.5 * res * res;

    // d ybar / d y_m = (a_m - delta_ma - ybar (delta_x - delta_ma)) / d
    g.clear();
    for (int k = 0; k < 3; ++k) g.push_back({loc.vertices[k], loc.weights[k] / d});
    g.push_back({ma, (yb - 1.0) / d});
    g.push_back({xv, -yb / d});
    for (const auto& [m, v] : g) out.G_y[m] += res * v;
    if (!hessian) continue;
    // Gauss-Newton part g g^T plus res * d2 ybar, where
    // d2 ybar / dy_m dy_n = -(g_m D_n + g_n D_m)/d and D = e_x - e_ma
    for (const auto& [m, vm] : g)
      for (const auto& [k, vk] : g) tb.add(m, k, vm * vk);
    for (const auto& [m, vm] : g) {
      const double c = -res * vm / d;
      tb.add(m, xv, c);
      tb.add(xv, m, c);
      tb.add(m, ma, -c);
      tb.add(ma, m, -c);
    }
  }
  if (hessian) out.G_yy = tb.build();
  return out;
}

}  // namespace fbgs
