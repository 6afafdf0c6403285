#include "fbgs/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "fbgs/error.hpp"

namespace fbgs {

namespace {

std::atomic<std::uint64_t> next_version{1};

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

bool on_circle(Point p, double radius) {
  return std::abs(p.r * p.r + p.z * p.z - radius * radius) <= 1e-8 * radius * radius;
}

// Line reader that tracks 1-based line numbers for error messages.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::string expect(const char* what) {
    std::string line;
    if (!next(line)) throw ParseError(std::string("unexpected end of file, expected ") + what, line_no_ + 1);
    return line;
  }

  int line_no() const { return line_no_; }

 private:
  std::istream& in_;
  int line_no_ = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

Region parse_region_tag(const std::string& tag) {
  if (tag == "vacuum") return Region::vacuum();
  if (tag == "limiter") return Region::limiter();
  if (tag.rfind("coil:", 0) == 0) {
    int i = 0;
    try {
      std::size_t used = 0;
      i = std::stoi(tag.substr(5), &used);
      if (used != tag.size() - 5) throw std::invalid_argument(tag);
    } catch (const std::exception&) {
      throw Error("bad coil region tag '" + tag + "'");
    }
    if (i < 1) throw Error("coil index must be >= 1 in '" + tag + "'");
    return Region::coil_region(i - 1);
  }
  throw Error("unknown region tag '" + tag + "'");
}

double signed_area(Point a, Point b, Point c) {
  return 0.5 * ((b.r - a.r) * (c.z - a.z) - (c.r - a.r) * (b.z - a.z));
}

double Mesh::signed_area(int t) const {
  const auto& tri = triangles[t];
  return fbgs::signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

Point Mesh::centroid(int t) const {
  const auto& tri = triangles[t];
  const Point s = vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]];
  return (1.0 / 3.0) * s;
}

std::vector<int> Mesh::limiter_vertex_list() const {
  std::vector<int> out;
  for (int v = 0; v < num_vertices(); ++v)
    if (limiter_vertex[v]) out.push_back(v);
  return out;
}

void Mesh::finalize() {
  const int nv = num_vertices();
  if (element_region.size() != triangles.size())
    throw DomainError("mesh: element_region size does not match triangle count");
  for (int v = 0; v < nv; ++v) {
    if (vertices[v].r < 0.0)
      throw DomainError("mesh: negative radial coordinate at vertex " + std::to_string(v));
  }
  std::unordered_map<std::uint64_t, int> edge_use;
  edge_use.reserve(3 * triangles.size());
  for (int t = 0; t < num_triangles(); ++t) {
    const auto& tri = triangles[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv)
        throw DomainError("mesh: element " + std::to_string(t) + " references a missing vertex");
    }
    if (!(signed_area(t) > 0.0))
      throw DomainError("mesh: element " + std::to_string(t) + " has non-positive signed area");
    for (int k = 0; k < 3; ++k) {
      const int uses = ++edge_use[edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3])];
      if (uses > 2)
        throw DomainError("mesh: edge of element " + std::to_string(t) + " is shared by more than two elements");
    }
  }
  for (const auto& e : farfield_edges) {
    if (!on_circle(vertices[e[0]], radius) || !on_circle(vertices[e[1]], radius))
      throw DomainError("mesh: far-field edge (" + std::to_string(e[0]) + ", " + std::to_string(e[1]) +
                        ") is not on the outer circle");
  }

  limiter_vertex.assign(nv, 0);
  limiter_boundary_vertex.assign(nv, 0);
  axis_vertex.assign(nv, 0);
  std::vector<char> touches_other(nv, 0);
  for (int t = 0; t < num_triangles(); ++t) {
    const bool lim = element_region[t].kind == RegionKind::limiter;
    for (int v : triangles[t]) (lim ? limiter_vertex[v] : touches_other[v]) = 1;
  }
  for (int v = 0; v < nv; ++v) {
    limiter_boundary_vertex[v] = limiter_vertex[v] && touches_other[v];
    axis_vertex[v] = vertices[v].r <= 1e-12 * std::max(radius, 1.0);
  }
  version = next_version++;
}

Mesh load_mesh(const std::string& path, const RegionMap& regions) {
  std::ifstream file(path);
  if (!file) throw Error("cannot open mesh file " + path);
  LineReader in(file);

  Mesh mesh;
  std::unordered_map<long, int> node_index;
  std::vector<Edge> lines;
  bool have_format = false, have_nodes = false, have_elements = false;

  std::string line;
  while (in.next(line)) {
    const std::string head = trim(line);
    if (head.empty()) continue;
    if (head == "$MeshFormat") {
      std::istringstream ss(in.expect("format line"));
      std::string version;
      int file_type = -1, data_size = 0;
      if (!(ss >> version >> file_type >> data_size)) throw ParseError("malformed $MeshFormat", in.line_no());
      if (version.rfind("2.2", 0) != 0) throw ParseError("unsupported mesh version " + version, in.line_no());
      if (file_type != 0) throw ParseError("only ASCII mesh files are supported", in.line_no());
      if (trim(in.expect("$EndMeshFormat")) != "$EndMeshFormat")
        throw ParseError("expected $EndMeshFormat", in.line_no());
      have_format = true;
    } else if (head == "$Nodes") {
      if (!have_format) throw ParseError("$Nodes before $MeshFormat", in.line_no());
      long n = 0;
      {
        std::istringstream ss(in.expect("node count"));
        if (!(ss >> n) || n < 0) throw ParseError("bad node count", in.line_no());
      }
      mesh.vertices.reserve(n);
      for (long i = 0; i < n; ++i) {
        std::istringstream ss(in.expect("node"));
        long id;
        double x, y, z;
        if (!(ss >> id >> x >> y >> z)) throw ParseError("malformed node", in.line_no());
        if (x < 0.0) throw ParseError("negative radial coordinate at node " + std::to_string(id), in.line_no());
        if (!node_index.emplace(id, static_cast<int>(mesh.vertices.size())).second)
          throw ParseError("duplicate node id " + std::to_string(id), in.line_no());
        mesh.vertices.push_back({x, y});
      }
      if (trim(in.expect("$EndNodes")) != "$EndNodes") throw ParseError("expected $EndNodes", in.line_no());
      have_nodes = true;
    } else if (head == "$Elements") {
      if (!have_nodes) throw ParseError("$Elements before $Nodes", in.line_no());
      long n = 0;
      {
        std::istringstream ss(in.expect("element count"));
        if (!(ss >> n) || n < 0) throw ParseError("bad element count", in.line_no());
      }
      auto lookup = [&](long id) {
        const auto it = node_index.find(id);
        if (it == node_index.end()) throw ParseError("unknown node id " + std::to_string(id), in.line_no());
        return it->second;
      };
      for (long i = 0; i < n; ++i) {
        std::istringstream ss(in.expect("element"));
        long id;
        int type, ntags;
        if (!(ss >> id >> type >> ntags) || ntags < 0) throw ParseError("malformed element", in.line_no());
        std::vector<long> tags(ntags);
        for (auto& t : tags)
          if (!(ss >> t)) throw ParseError("malformed element tags", in.line_no());
        const int physical = ntags > 0 ? static_cast<int>(tags[0]) : 0;
        if (type == 2) {
          long a, b, c;
          if (!(ss >> a >> b >> c)) throw ParseError("malformed triangle", in.line_no());
          mesh.triangles.push_back({lookup(a), lookup(b), lookup(c)});
          const auto it = regions.find(physical);
          mesh.element_region.push_back(it == regions.end() ? Region::vacuum() : it->second);
        } else if (type == 1) {
          long a, b;
          if (!(ss >> a >> b)) throw ParseError("malformed line element", in.line_no());
          lines.push_back({lookup(a), lookup(b)});
        }
        // other element types (points, ...) are ignored
      }
      if (trim(in.expect("$EndElements")) != "$EndElements")
        throw ParseError("expected $EndElements", in.line_no());
      have_elements = true;
    } else if (head[0] == '$') {
      const std::string end = "$End" + head.substr(1);
      while (true) {
        const std::string l = trim(in.expect(end.c_str()));
        if (l == end) break;
      }
    } else {
      throw ParseError("unexpected content outside a section", in.line_no());
    }
  }
  if (!have_elements) throw ParseError("missing $Elements section", in.line_no());

  for (const Point& p : mesh.vertices) mesh.radius = std::max(mesh.radius, std::hypot(p.r, p.z));
  for (const auto& e : lines) {
    if (on_circle(mesh.vertices[e[0]], mesh.radius) && on_circle(mesh.vertices[e[1]], mesh.radius))
      mesh.farfield_edges.push_back(e);
  }
  for (const auto& [id, region] : regions) {
    (void)id;
    if (region.kind == RegionKind::coil) mesh.num_coils = std::max(mesh.num_coils, region.coil + 1);
  }
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!(mesh.signed_area(t) > 0.0))
      throw DomainError("mesh: element " + std::to_string(t) + " has non-positive signed area");
  }
  assign_longest_edge_refinement(mesh);
  mesh.finalize();
  return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.num_vertices() << '\n' << std::setprecision(17);
  for (int v = 0; v < mesh.num_vertices(); ++v)
    out << v + 1 << ' ' << mesh.vertices[v].r << ' ' << mesh.vertices[v].z << " 0\n";
  out << "$EndNodes\n$Elements\n" << mesh.farfield_edges.size() + mesh.triangles.size() << '\n';
  long id = 1;
  for (const auto& e : mesh.farfield_edges) out << id++ << " 1 2 100 100 " << e[0] + 1 << ' ' << e[1] + 1 << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Region& reg = mesh.element_region[t];
    const int tag = reg.kind == RegionKind::vacuum ? 1 : reg.kind == RegionKind::limiter ? 2 : 11 + reg.coil;
    const auto& tri = mesh.triangles[t];
    out << id++ << " 2 2 " << tag << ' ' << tag << ' ' << tri[0] + 1 << ' ' << tri[1] + 1 << ' ' << tri[2] + 1
        << '\n';
  }
  out << "$EndElements\n";
}

AdjacencyMap build_adjacency(const Mesh& mesh) {
  const int nv = mesh.num_vertices();
  // For triangle (v, a, b) listed counterclockwise, b precedes a when walking
  // clockwise around v.
  std::vector<std::vector<std::pair<int, int>>> succ(nv);
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) succ[tri[k]].push_back({tri[(k + 2) % 3], tri[(k + 1) % 3]});
  }
  AdjacencyMap adj;
  adj.ring.resize(nv);
  adj.closed.assign(nv, 0);
  for (int v = 0; v < nv; ++v) {
    auto& s = succ[v];
    if (s.empty()) continue;
    std::sort(s.begin(), s.end());
    auto next_of = [&](int a) -> int {
      const auto it = std::lower_bound(s.begin(), s.end(), std::make_pair(a, -1));
      return it != s.end() && it->first == a ? it->second : -1;
    };
    // an open ring starts at a neighbor that no one precedes
    std::vector<int> targets;
    for (const auto& [a, b] : s) targets.push_back(b);
    std::sort(targets.begin(), targets.end());
    int start = -1;
    for (const auto& [a, b] : s) {
      if (!std::binary_search(targets.begin(), targets.end(), a)) {
        start = a;
        break;
      }
    }
    const bool closed = start < 0;
    if (closed) start = s.front().first;
    auto& ring = adj.ring[v];
    int cur = start;
    for (std::size_t guard = 0; guard <= s.size() + 1; ++guard) {
      ring.push_back(cur);
      cur = next_of(cur);
      if (cur < 0 || cur == start) break;
    }
    adj.closed[v] = closed ? 1 : 0;
  }
  return adj;
}

std::vector<double> ProlongationMap::apply(std::span<const double> coarse) const {
  std::vector<double> fine(coarse.begin(), coarse.end());
  fine.reserve(old_vertices + parents.size());
  for (const auto& e : parents) fine.push_back(0.5 * (fine[e[0]] + fine[e[1]]));
  return fine;
}

void assign_longest_edge_refinement(Mesh& mesh) {
  for (auto& tri : mesh.triangles) {
    // rotation keeps the orientation; edge opposite vertex k is (k+1, k+2)
    int best = 0;
    double best_len = -1.0;
    for (int k = 0; k < 3; ++k) {
      const Point d = mesh.vertices[tri[(k + 1) % 3]] - mesh.vertices[tri[(k + 2) % 3]];
      const double len = d.r * d.r + d.z * d.z;
      if (len > best_len * (1.0 + 1e-12)) {
        best_len = len;
        best = k;
      }
    }
    std::rotate(tri.begin(), tri.begin() + best, tri.end());
  }
}

namespace {

RefinementResult bisect_marked_edges(const Mesh& mesh, std::unordered_map<std::uint64_t, int>& marked) {
  RefinementResult res;
  Mesh& out = res.mesh;
  out.vertices = mesh.vertices;
  out.radius = mesh.radius;
  out.num_coils = mesh.num_coils;
  res.prolongation.old_vertices = mesh.num_vertices();

  std::unordered_map<std::uint64_t, char> farfield;
  for (const auto& e : mesh.farfield_edges) farfield[edge_key(e[0], e[1])] = 1;

  // midpoints are created in a fixed order: sorted marked edge keys
  std::vector<std::uint64_t> keys;
  keys.reserve(marked.size());
  for (const auto& [k, v] : marked) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (auto k : keys) {
    const int a = static_cast<int>(k >> 32), b = static_cast<int>(k & 0xffffffffu);
    Point m = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
    if (farfield.count(k)) {
      const double s = mesh.radius / std::hypot(m.r, m.z);
      m = s * m;
    }
    marked[k] = out.num_vertices();
    out.vertices.push_back(m);
    res.prolongation.parents.push_back({a, b});
  }

  std::function<void(const Triangle&, int)> split = [&](const Triangle& tri, int parent) {
    const auto it = marked.find(edge_key(tri[1], tri[2]));
    if (it == marked.end()) {
      out.triangles.push_back(tri);
      out.element_region.push_back(mesh.element_region[parent]);
      res.parent.push_back(parent);
      return;
    }
    const int m = it->second;
    split({m, tri[0], tri[1]}, parent);
    split({m, tri[2], tri[0]}, parent);
  };
  for (int t = 0; t < mesh.num_triangles(); ++t) split(mesh.triangles[t], t);

  for (const auto& e : mesh.farfield_edges) {
    const auto it = marked.find(edge_key(e[0], e[1]));
    if (it == marked.end()) {
      out.farfield_edges.push_back(e);
    } else {
      out.farfield_edges.push_back({e[0], it->second});
      out.farfield_edges.push_back({it->second, e[1]});
    }
  }
  out.finalize();
  return res;
}

}  // namespace

RefinementResult refine(const Mesh& mesh, const std::set<int>& marked_elements) {
  std::unordered_map<std::uint64_t, int> marked;
  for (int t : marked_elements) {
    if (t < 0 || t >= mesh.num_triangles()) throw Error("refine: element index out of range");
    const auto& tri = mesh.triangles[t];
    marked[edge_key(tri[1], tri[2])] = -1;
  }
  if (marked.empty()) {
    RefinementResult res;
    res.mesh = mesh;
    res.prolongation.old_vertices = mesh.num_vertices();
    res.parent.resize(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) res.parent[t] = t;
    return res;
  }
  // closure: an element with any marked edge must also bisect its refinement edge
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& tri : mesh.triangles) {
      const auto ref = edge_key(tri[1], tri[2]);
      if (marked.count(ref)) continue;
      if (marked.count(edge_key(tri[0], tri[1])) || marked.count(edge_key(tri[2], tri[0]))) {
        marked[ref] = -1;
        changed = true;
      }
    }
  }
  return bisect_marked_edges(mesh, marked);
}

RefinementResult refine_uniform(const Mesh& mesh) {
  std::unordered_map<std::uint64_t, int> marked;
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k) marked[edge_key(tri[k], tri[(k + 1) % 3])] = -1;
  return bisect_marked_edges(mesh, marked);
}

}  // namespace fbgs
