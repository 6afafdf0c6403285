#include "fbgs/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "fbgs/error.hpp"

namespace fbgs {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

std::vector<double> default_coil_currents() {
  return {1.143284e+03,  -2.478694e+04, -3.022037e+04, -2.205664e+04, -2.848113e+03, -4.552585e+06,
          3.180596e+06, 5.678096e+06,   3.825538e+06,  1.066498e+07,  -2.094771e+07};
}

RegionMap default_region_map() {
  RegionMap m{{1, Region::vacuum()}, {2, Region::limiter()}};
  for (int i = 0; i < 11; ++i) m[11 + i] = Region::coil_region(i);
  return m;
}

namespace {

class Reader {
 public:
  Reader(const pt::ptree& tree, std::string file) : tree_(tree), file_(std::move(file)) {}

  template <class T>
  T get(const std::string& key, T fallback) const {
    const auto node = tree_.get_child_optional(key);
    if (!node) return fallback;
    const std::string raw = node->get_value<std::string>();
    try {
      return node->get_value<T>();
    } catch (const pt::ptree_bad_data&) {
      throw Error(file_ + ": bad value '" + raw + "' for " + key);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const std::string v = get<std::string>(key, fallback ? "true" : "false");
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(file_ + ": bad boolean '" + v + "' for " + key);
  }

  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
    const auto node = tree_.get_child_optional(key);
    if (!node) return fallback;
    std::string raw = node->get_value<std::string>();
    for (char& c : raw)
      if (c == ',') c = ' ';
    std::istringstream ss(raw);
    std::vector<double> out;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(file_ + ": bad number '" + tok + "' in " + key);
      }
    }
    return out;
  }

  const pt::ptree* section(const std::string& name) const {
    const auto node = tree_.get_child_optional(name);
    return node ? &*node : nullptr;
  }

  const std::string& file() const { return file_; }

 private:
  const pt::ptree& tree_;
  std::string file_;
};

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

void require_positive(double v, const std::string& what, const std::string& file) {
  if (!(v > 0.0)) throw Error(file + ": " + what + " must be positive");
}

}  // namespace

RunConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw Error("config file not found: " + path);
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("cannot parse config " + path + ": " + e.message(), static_cast<int>(e.line()));
  }
  const Reader in(tree, path);
  const fs::path base = fs::path(path).parent_path();
  RunConfig c;
  c.source = path;

  c.mesh_path = resolve(base, in.get<std::string>("mesh.path", ""));
  if (c.mesh_path.empty()) throw Error(path + ": missing mesh.path");
  c.uniform_refinements = in.get("mesh.uniform_refinements", 0);
  if (c.uniform_refinements < 0) throw Error(path + ": mesh.uniform_refinements must be >= 0");

  if (const pt::ptree* reg = in.section("regions")) {
    for (const auto& [key, node] : *reg) {
      int id = 0;
      try {
        id = std::stoi(key);
      } catch (const std::exception&) {
        throw Error(path + ": region key '" + key + "' is not a physical id");
      }
      c.regions[id] = parse_region_tag(node.get_value<std::string>());
    }
  } else {
    c.regions = default_region_map();
  }

  c.mu = in.get("problem.mu", c.mu);
  require_positive(c.mu, "problem.mu", path);
  c.plasma_current = in.get("problem.plasma_current", c.plasma_current);
  if (c.plasma_current == 0.0) throw Error(path + ": problem.plasma_current must be nonzero");

  c.profile = in.get<std::string>("profile.model", c.profile);
  if (c.profile != "taylor" && c.profile != "luxon_brown" && c.profile != "spline")
    throw Error(path + ": unknown profile.model '" + c.profile + "'");
  c.fx = in.get("profile.fx", c.fx);
  c.luxon_brown.r0 = in.get("profile.r0", c.luxon_brown.r0);
  c.luxon_brown.delta = in.get("profile.delta", c.luxon_brown.delta);
  c.luxon_brown.beta = in.get("profile.beta", c.luxon_brown.beta);
  c.luxon_brown.gamma = in.get("profile.gamma", c.luxon_brown.gamma);
  c.pprime_table = resolve(base, in.get<std::string>("profile.pprime_table", ""));
  c.f_table = resolve(base, in.get<std::string>("profile.f_table", ""));
  if (c.profile == "spline" && (c.pprime_table.empty() || c.f_table.empty()))
    throw Error(path + ": spline profile needs profile.pprime_table and profile.f_table");

  c.currents = in.get_list("coils.currents", default_coil_currents());
  c.coil_weights = in.get_list("coils.weights", {});
  c.control_points = resolve(base, in.get<std::string>("controls.path", ""));
  c.epsilon = in.get("objective.epsilon", c.epsilon);
  require_positive(c.epsilon, "objective.epsilon", path);

  NewtonConfig& n = c.newton;
  n.abs_tol = in.get("newton.abs_tol", n.abs_tol);
  n.constraint_tol = in.get("newton.constraint_tol", n.constraint_tol);
  n.max_iters = in.get("newton.max_iters", n.max_iters);
  n.gamma = in.get("newton.gamma", n.gamma);
  n.theta = in.get("newton.theta", n.theta);
  n.eta_max = in.get("newton.eta_max", n.eta_max);
  n.step_clamp = in.get("newton.step_clamp", n.step_clamp);
  n.line_search = in.get("newton.line_search", n.line_search);
  n.hessian = parse_hessian(in.get("newton.hessian", to_string(n.hessian)));
  require_positive(n.abs_tol, "newton.abs_tol", path);
  require_positive(n.constraint_tol, "newton.constraint_tol", path);
  if (!(n.eta_max > 0.0 && n.eta_max < 1.0)) throw Error(path + ": newton.eta_max must lie in (0, 1)");
  if (n.max_iters < 0) throw Error(path + ": newton.max_iters must be >= 0");

  LinearSolverConfig& l = c.linsolve;
  l.kind = parse_block_kind(in.get<std::string>("linsolve.preconditioner", to_string(l.kind)));
  l.amg.cycle = parse_cycle(in.get<std::string>("linsolve.cycle", to_string(l.amg.cycle)));
  l.amg.iterations = in.get("linsolve.amg_iterations", l.amg.iterations);
  l.amg.strength = in.get("linsolve.strength", l.amg.strength);
  l.amg.max_levels = in.get("linsolve.max_levels", l.amg.max_levels);
  l.amg.coarse_size = in.get("linsolve.coarse_size", l.amg.coarse_size);
  l.amg.max_direct = in.get("linsolve.max_direct", l.amg.max_direct);
  l.amg.smoother_block = in.get("linsolve.smoother_block", l.amg.smoother_block);
  l.max_iters = in.get("linsolve.max_iters", l.max_iters);
  l.restart = in.get("linsolve.restart", l.restart);
  l.dump_dir = in.get<std::string>("linsolve.dump_matrices", "");
  if (l.amg.iterations < 1) throw Error(path + ": linsolve.amg_iterations must be >= 1");
  if (l.amg.smoother_block < 1) throw Error(path + ": linsolve.smoother_block must be >= 1");
  if (l.restart < 1) throw Error(path + ": linsolve.restart must be >= 1");

  AmrConfig& a = c.amr;
  a.levels = in.get("amr.levels", a.levels);
  a.estimator = parse_estimator(in.get<std::string>("amr.estimator", to_string(a.estimator)));
  a.policy.theta_limiter = in.get("amr.theta_limiter", a.policy.theta_limiter);
  a.policy.theta_outside = in.get("amr.theta_outside", a.policy.theta_outside);
  const std::string rule = in.get<std::string>("amr.rule", "max");
  if (rule == "max") a.policy.rule = MarkRule::max_fraction;
  else if (rule == "sum") a.policy.rule = MarkRule::sum_fraction;
  else throw Error(path + ": amr.rule must be max or sum");
  if (a.levels < 0) throw Error(path + ": amr.levels must be >= 0");

  c.farfield.gauss_points = in.get("farfield.gauss_points", c.farfield.gauss_points);
  c.farfield.singular_levels = in.get("farfield.singular_levels", c.farfield.singular_levels);

  c.seed.r = in.get("seed.r", c.seed.r);
  c.seed.z = in.get("seed.z", c.seed.z);
  c.seed.a = in.get("seed.a", c.seed.a);
  c.seed.kappa = in.get("seed.kappa", c.seed.kappa);

  c.loop.r = in.get("loop.r", c.loop.r);
  c.loop.z = in.get("loop.z", c.loop.z);
  c.loop.current = in.get("loop.current", c.loop.current);
  c.loop.probes = in.get("loop.probes", c.loop.probes);
  c.loop.probe_radius = in.get("loop.probe_radius", c.loop.probe_radius);

  c.output_dir = resolve(base, in.get<std::string>("output.dir", c.output_dir));
  c.write_vtk = in.get_bool("output.vtk", c.write_vtk);
  return c;
}

void apply_environment(RunConfig& cfg) {
  if (const char* dir = std::getenv("GS_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
}

}  // namespace fbgs
