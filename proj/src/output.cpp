#include "fbgs/output.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fbgs/error.hpp"

namespace fbgs {

namespace {

std::ofstream open_out(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  if (ec) throw Error("cannot create directory " + parent.string() + ": " + ec.message());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(17);
  return out;
}

void write_scalars(std::ofstream& out, const std::vector<VtkField>& fields, std::size_t expect,
                   const std::string& what) {
  for (const VtkField& f : fields) {
    if (f.values.size() != expect)
      throw Error("VTK " + what + " field '" + f.name + "' has " + std::to_string(f.values.size()) + " values, expected " +
                  std::to_string(expect));
    out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : f.values) out << v << '\n';
  }
}

}  // namespace

void write_vtk(const std::string& path, const Mesh& mesh, const std::vector<VtkField>& point_data,
               const std::vector<VtkField>& cell_data) {
  auto out = open_out(path);
  const int nv = mesh.num_vertices(), nt = mesh.num_triangles();
  out << "# vtk DataFile Version 3.0\nfree-boundary equilibrium\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nv << " double\n";
  for (const Point& p : mesh.vertices) out << p.r << ' ' << p.z << " 0\n";
  out << "CELLS " << nt << ' ' << 4 * nt << '\n';
  for (const Triangle& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << nt << '\n';
  for (int t = 0; t < nt; ++t) out << "5\n";
  if (!point_data.empty()) {
    out << "POINT_DATA " << nv << '\n';
    write_scalars(out, point_data, nv, "point");
  }
  if (!cell_data.empty()) {
    out << "CELL_DATA " << nt << '\n';
    write_scalars(out, cell_data, nt, "cell");
  }
}

void write_separatrix_vtk(const std::string& path, const std::vector<SeparatrixSegment>& segs) {
  auto out = open_out(path);
  const std::size_t n = segs.size();
  out << "# vtk DataFile Version 3.0\nseparatrix\nASCII\nDATASET POLYDATA\n";
  out << "POINTS " << 2 * n << " double\n";
  for (const auto& s : segs) out << s.a.r << ' ' << s.a.z << " 0\n" << s.b.r << ' ' << s.b.z << " 0\n";
  out << "LINES " << n << ' ' << 3 * n << '\n';
  for (std::size_t k = 0; k < n; ++k) out << "2 " << 2 * k << ' ' << 2 * k + 1 << '\n';
}

void write_separatrix_csv(const std::string& path, const std::vector<SeparatrixSegment>& segs) {
  auto out = open_out(path);
  out << "element,r0,z0,r1,z1\n";
  for (const auto& s : segs) out << s.element << ',' << s.a.r << ',' << s.a.z << ',' << s.b.r << ',' << s.b.z << '\n';
}

void write_log_csv(const std::string& path, const ConvergenceLog& log) {
  auto out = open_out(path);
  out << "amr_level,newton_iter,residual_norm,eta_n,fgmres_iters,G_value,C_minus_Ip,alpha\n";
  for (const LogRow& r : log.rows)
    out << r.amr_level << ',' << r.newton_iter << ',' << r.residual_norm << ',' << r.eta_n << ',' << r.fgmres_iters
        << ',' << r.G_value << ',' << r.C_minus_Ip << ',' << r.alpha << '\n';
}

void write_currents_csv(const std::string& path, std::span<const double> u) {
  auto out = open_out(path);
  out << "coil,current_A\n";
  for (std::size_t j = 0; j < u.size(); ++j) out << j + 1 << ',' << u[j] << '\n';
}

std::string SweepCell::summary() const {
  if (!ok) return "--";
  char buf[96];
  if (has_amr) std::snprintf(buf, sizeof buf, "(%d, %.1f) %.1f", newton_initial, mean_fgmres, mean_newton_amr);
  else std::snprintf(buf, sizeof buf, "(%d, %.1f)", newton_initial, mean_fgmres);
  return buf;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells) {
  auto out = open_out(path);
  out << "preconditioner,cycle,amg_iterations,summary,newton_initial,mean_fgmres,mean_newton_amr,error\n";
  for (const SweepCell& c : cells) {
    std::string err = c.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    out << c.kind << ',' << c.cycle << ',' << c.iterations << ",\"" << c.summary() << "\",";
    if (c.ok) out << c.newton_initial << ',' << c.mean_fgmres << ',' << (c.has_amr ? c.mean_newton_amr : 0.0);
    else out << "--,--,--";
    out << ',' << err << '\n';
  }
}

}  // namespace fbgs
