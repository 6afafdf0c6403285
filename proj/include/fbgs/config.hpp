#pragma once

#include <string>
#include <vector>

#include "fbgs/amr.hpp"
#include "fbgs/farfield.hpp"
#include "fbgs/kkt.hpp"
#include "fbgs/mesh.hpp"
#include "fbgs/profiles.hpp"

namespace fbgs {

/// Plasma current seed used to build the initial flux: a uniform current
/// density on an ellipse.
struct SeedConfig {
  double r = 6.2;
  double z = 0.3;
  double a = 2.0;
  double kappa = 1.7;
};

/// Filament loop for the vacuum benchmark; probes sit on a circle around it.
struct LoopConfig {
  double r = 6.0;
  double z = 0.5;
  double current = 1.0e6;
  int probes = 20;
  double probe_radius = 2.0;
};

struct RunConfig {
  std::string source;  // config file path, for messages
  std::string mesh_path;
  RegionMap regions;
  int uniform_refinements = 0;

  double mu = 1.25663706144e-6;
  double plasma_current = -1.5e7;

  std::string profile = "taylor";
  LuxonBrown luxon_brown;
  double fx = 33.0;
  std::string pprime_table, f_table;

  std::vector<double> currents;
  std::vector<double> coil_weights;
  std::string control_points;
  double epsilon = 1e-12;

  NewtonConfig newton;
  LinearSolverConfig linsolve;
  AmrConfig amr;
  FarfieldQuadrature farfield;
  SeedConfig seed;
  LoopConfig loop;

  std::string output_dir = "output";
  bool write_vtk = true;
};

/// The 11 default coil currents (CS1..CS5, PF1..PF6), amperes.
std::vector<double> default_coil_currents();
/// vacuum 1, limiter 2, coils 11..21.
RegionMap default_region_map();

/// Reads an INI file. Relative paths are resolved against the file's
/// directory. Throws Error naming the file and key on bad input.
RunConfig load_config(const std::string& path);

/// GS_OUTPUT_DIR, when set, replaces output_dir.
void apply_environment(RunConfig& cfg);

}  // namespace fbgs
