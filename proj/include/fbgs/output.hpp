#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbgs/kkt.hpp"
#include "fbgs/mesh.hpp"
#include "fbgs/plasma.hpp"

namespace fbgs {

struct VtkField {
  std::string name;
  std::vector<double> values;
};

/// Legacy ASCII unstructured grid with point and cell scalars. Throws if a
/// field length does not match the point or cell count.
void write_vtk(const std::string& path, const Mesh& mesh, const std::vector<VtkField>& point_data,
               const std::vector<VtkField>& cell_data = {});

/// Separatrix segments as a VTK polyline set and as CSV (element, r0, z0, r1, z1).
void write_separatrix_vtk(const std::string& path, const std::vector<SeparatrixSegment>& segs);
void write_separatrix_csv(const std::string& path, const std::vector<SeparatrixSegment>& segs);

void write_log_csv(const std::string& path, const ConvergenceLog& log);
void write_currents_csv(const std::string& path, std::span<const double> u);

/// One preconditioner-sweep cell, "(a1, abar) b": a1 is the Newton count on the
/// initial mesh, abar the mean FGMRES count over every step and b the mean
/// Newton count per AMR level.
struct SweepCell {
  std::string kind, cycle;
  int iterations = 1;
  bool ok = false;
  int newton_initial = 0;
  double mean_fgmres = 0.0;
  double mean_newton_amr = 0.0;
  bool has_amr = false;
  std::string error;

  std::string summary() const;
};

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells);

}  // namespace fbgs
