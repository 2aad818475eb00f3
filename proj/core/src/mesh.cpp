#include "microstab/mesh.hpp"

#include "point_index.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace microstab {

int nodes_per_element(ElementKind kind) {
  return kind == ElementKind::Q4_disp ? 4 : 9;
}

std::string to_string(ElementKind kind) {
  return kind == ElementKind::Q4_disp ? "q4" : "q9p3";
}

namespace {

struct EdgeKey {
  int a, b;
  bool operator<(const EdgeKey& o) const {
    return std::tie(a, b) < std::tie(o.a, o.b);
  }
};

EdgeKey make_edge(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

// Corner-edge list with optional mid-edge node (Q9).
struct ElemEdge {
  int a, b;
  int mid;  // -1 if none
};

std::vector<ElemEdge> element_edges(const Element& e) {
  std::vector<ElemEdge> out;
  if (e.kind == ElementKind::Q4_disp) {
    for (int i = 0; i < 4; ++i)
      out.push_back({e.conn[i], e.conn[(i + 1) % 4], -1});
  } else {
    for (int i = 0; i < 4; ++i)
      out.push_back({e.conn[i], e.conn[(i + 1) % 4], e.conn[4 + i]});
  }
  return out;
}

double quad_area(const RveMesh& m, const Element& e) {
  // Shoelace over the corner ring.
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& p = m.nodes[e.conn[i]];
    const Vec2& q = m.nodes[e.conn[(i + 1) % 4]];
    s += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * s;
}

using detail::PointIndex;

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Indices of hull vertices (Andrew monotone chain), CCW.
std::vector<int> convex_hull(const std::vector<Vec2>& pts, const std::vector<int>& ids) {
  std::vector<int> order(ids);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::make_pair(pts[a].x(), pts[a].y()) < std::make_pair(pts[b].x(), pts[b].y());
  });
  auto cross = [&](int o, int a, int b) {
    return (pts[a].x() - pts[o].x()) * (pts[b].y() - pts[o].y()) -
           (pts[a].y() - pts[o].y()) * (pts[b].x() - pts[o].x());
  };
  const int n = static_cast<int>(order.size());
  std::vector<int> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], order[i]) <= 0) --k;
    hull[k++] = order[i];
  }
  for (int i = n - 2, t = k + 1; i >= 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], order[i]) <= 0) --k;
    hull[k++] = order[i];
  }
  hull.resize(k - 1);
  return hull;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

}  // namespace

std::vector<int> RveMesh::boundary_nodes() const {
  std::map<EdgeKey, int> count;
  for (const auto& e : elements)
    for (const auto& ed : element_edges(e)) count[make_edge(ed.a, ed.b)]++;
  std::vector<char> mark(nodes.size(), 0);
  for (const auto& e : elements)
    for (const auto& ed : element_edges(e))
      if (count[make_edge(ed.a, ed.b)] == 1) {
        mark[ed.a] = mark[ed.b] = 1;
        if (ed.mid >= 0) mark[ed.mid] = 1;
      }
  std::vector<int> out;
  for (int i = 0; i < num_nodes(); ++i)
    if (mark[i]) out.push_back(i);
  return out;
}

int RveMesh::default_fixed_node() const {
  Vec2 centroid = Vec2::Zero();
  double area = 0.0;
  for (const auto& e : elements) {
    const double a = std::abs(quad_area(*this, e));
    Vec2 c = Vec2::Zero();
    for (int i = 0; i < 4; ++i) c += nodes[e.conn[i]];
    centroid += a * c / 4.0;
    area += a;
  }
  if (area > 0) centroid /= area;
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (int i = 0; i < num_nodes(); ++i) {
    const double d = (nodes[i] - centroid).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<NodePair> build_pairing(const RveMesh& mesh, double tol) {
  const Vec2 a1 = mesh.lattice.a1, a2 = mesh.lattice.a2;
  const double amax = std::max(a1.norm(), a2.norm());
  if (tol < 0) tol = 1e-8 * amax;

  const std::vector<int> bnodes = mesh.boundary_nodes();
  if (bnodes.empty()) throw MeshError("mesh has no boundary nodes");

  // Outer boundary only: hole boundaries lie strictly inside the convex hull.
  std::vector<int> hull = convex_hull(mesh.nodes, bnodes);
  std::vector<int> outer;
  for (int n : bnodes) {
    double d = std::numeric_limits<double>::max();
    for (size_t i = 0; i < hull.size(); ++i) {
      const Vec2& p = mesh.nodes[hull[i]];
      const Vec2& q = mesh.nodes[hull[(i + 1) % hull.size()]];
      d = std::min(d, point_segment_distance(mesh.nodes[n], p, q));
    }
    if (d <= 10 * tol) outer.push_back(n);
  }

  PointIndex index(std::max(tol * 16, amax / 64));
  for (int n : outer) index.insert(mesh.nodes[n], n);

  // Link nodes related by a lattice translation; union-find gives the
  // translation-equivalence classes (pairs on sides, 3-4 nodes at corners).
  std::unordered_map<int, int> local;  // node id -> index into outer
  for (size_t i = 0; i < outer.size(); ++i) local[outer[i]] = static_cast<int>(i);
  UnionFind uf(static_cast<int>(outer.size()));
  const std::array<std::pair<int, int>, 4> cands{{{1, 0}, {0, 1}, {1, 1}, {1, -1}}};
  for (size_t i = 0; i < outer.size(); ++i) {
    for (auto [c1, c2] : cands) {
      const Vec2 T = c1 * a1 + c2 * a2;
      const int j = index.find(mesh.nodes[outer[i]] + T, tol);
      if (j >= 0) uf.unite(static_cast<int>(i), local[j]);
    }
  }

  std::map<int, std::vector<int>> classes;  // root -> node ids
  for (size_t i = 0; i < outer.size(); ++i)
    classes[uf.find(static_cast<int>(i))].push_back(outer[i]);

  std::vector<NodePair> pairs;
  for (auto& [root, members] : classes) {
    if (members.size() < 2)
      throw MeshError("unmatched boundary node " + std::to_string(members.front()) +
                      ": no lattice translate found (mesh/lattice inconsistency)");
    // Master = lexicographically smallest coordinate.
    int master = members.front();
    for (int n : members) {
      const Vec2& p = mesh.nodes[n];
      const Vec2& q = mesh.nodes[master];
      if (std::make_pair(p.x(), p.y()) < std::make_pair(q.x(), q.y())) master = n;
    }
    for (int n : members) {
      if (n == master) continue;
      const Vec2 L = mesh.nodes[n] - mesh.nodes[master];
      const Vec2 st = mesh.lattice.lattice_coords(L);
      const int c1 = static_cast<int>(std::lround(st.x()));
      const int c2 = static_cast<int>(std::lround(st.y()));
      const Vec2 Lrec = c1 * a1 + c2 * a2;
      if ((L - Lrec).norm() > 10 * tol)
        throw MeshError("corner-class node " + std::to_string(n) +
                        " is not an integer lattice translate of its master");
      pairs.push_back({master, n, Lrec, c1, c2});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const NodePair& x, const NodePair& y) {
    return std::tie(x.neg, x.pos) < std::tie(y.neg, y.pos);
  });
  return pairs;
}

ConstraintOperators assemble_constraints(const RveMesh& mesh) {
  if (mesh.fixed_node < 0 || mesh.fixed_node >= mesh.num_nodes())
    throw MeshError("fixed node not set or out of range");
  const int N = mesh.num_dofs();
  const int m = mesh.num_pairs();

  ConstraintOperators ops;
  ops.A1.resize(2, N);
  ops.A1.insert(0, 2 * mesh.fixed_node) = 1.0;
  ops.A1.insert(1, 2 * mesh.fixed_node + 1) = 1.0;
  ops.A1.makeCompressed();

  std::vector<Triplet> trips;
  ops.L_M = MatX::Zero(2 * m, 4);
  for (int q = 0; q < m; ++q) {
    const NodePair& p = mesh.pairing[q];
    trips.emplace_back(2 * q, 2 * p.pos, 1.0);
    trips.emplace_back(2 * q, 2 * p.neg, -1.0);
    trips.emplace_back(2 * q + 1, 2 * p.pos + 1, 1.0);
    trips.emplace_back(2 * q + 1, 2 * p.neg + 1, -1.0);
    ops.L_M(2 * q, 0) = p.L.x();
    ops.L_M(2 * q, 2) = p.L.y();
    ops.L_M(2 * q + 1, 1) = p.L.x();
    ops.L_M(2 * q + 1, 3) = p.L.y();
  }
  ops.A2.resize(2 * m, N);
  ops.A2.setFromTriplets(trips.begin(), trips.end());
  ops.A2.makeCompressed();
  return ops;
}

VecX constraint_offset(const ConstraintOperators& ops, const Mat2& Fbar) {
  const Vec4 dF = tensor_to_vec4(Fbar) - tensor_to_vec4(Mat2::Identity());
  return ops.L_M * dF;
}

RveMesh tile_mesh(const RveMesh& unit, int nx, int ny) {
  if (nx < 1 || ny < 1) throw MeshError("tile counts must be >= 1");
  const Vec2 a1 = unit.lattice.a1, a2 = unit.lattice.a2;
  const double tol = 1e-8 * std::max(a1.norm(), a2.norm());

  RveMesh out;
  // The replicated mesh is treated as a unit cell of the coarser lattice, so
  // its own cell area already covers all copies.
  out.lattice = make_lattice(nx * a1, ny * a2);
  out.tiles = unit.tiles;

  PointIndex index(std::max(tol * 16, a1.norm() / 64));
  std::vector<int> map(unit.num_nodes());
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 shift = double(i) * a1 + double(j) * a2;
      for (int n = 0; n < unit.num_nodes(); ++n) {
        const Vec2 p = unit.nodes[n] + shift;
        int id = index.find(p, tol);
        if (id < 0) {
          id = static_cast<int>(out.nodes.size());
          out.nodes.push_back(p);
          index.insert(p, id);
        }
        map[n] = id;
        if (i == 0 && j == 0 && n == unit.fixed_node) out.fixed_node = id;
      }
      for (const auto& e : unit.elements) {
        Element ne = e;
        for (auto& c : ne.conn) c = map[c];
        out.elements.push_back(std::move(ne));
      }
    }
  }
  out.pairing = build_pairing(out);
  if (out.fixed_node < 0) out.fixed_node = out.default_fixed_node();
  return out;
}

RveMesh promote_to_q9(const RveMesh& mesh) {
  RveMesh out;
  out.nodes = mesh.nodes;
  out.lattice = mesh.lattice;
  out.tiles = mesh.tiles;
  out.fixed_node = mesh.fixed_node;

  std::map<EdgeKey, int> edge_mid;
  auto mid_node = [&](int a, int b) {
    const EdgeKey k = make_edge(a, b);
    auto it = edge_mid.find(k);
    if (it != edge_mid.end()) return it->second;
    const int id = static_cast<int>(out.nodes.size());
    out.nodes.push_back(0.5 * (mesh.nodes[a] + mesh.nodes[b]));
    edge_mid[k] = id;
    return id;
  };

  for (const auto& e : mesh.elements) {
    if (e.kind != ElementKind::Q4_disp)
      throw MeshError("promote_to_q9 expects a Q4 mesh");
    Element ne;
    ne.kind = ElementKind::Q9P3_mixed;
    ne.material = e.material;
    ne.conn = e.conn;
    for (int i = 0; i < 4; ++i) ne.conn.push_back(mid_node(e.conn[i], e.conn[(i + 1) % 4]));
    const int center = static_cast<int>(out.nodes.size());
    Vec2 c = Vec2::Zero();
    for (int i = 0; i < 4; ++i) c += mesh.nodes[e.conn[i]];
    out.nodes.push_back(c / 4.0);
    ne.conn.push_back(center);
    out.elements.push_back(std::move(ne));
  }
  out.pairing = build_pairing(out);
  return out;
}

RveMesh read_mesh_file(std::istream& in) {
  RveMesh mesh;
  std::string line, section;
  std::map<long, int> id_map;
  std::vector<std::pair<long, Vec2>> raw_nodes;
  struct RawElem {
    ElementKind kind;
    int mat;
    std::vector<long> conn;
  };
  std::vector<RawElem> raw_elems;
  bool have_lattice = false;
  long fixed_id = -1;
  bool have_fixed = false;
  Vec2 a1, a2;

  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "NODES" || tok == "ELEMENTS" || tok == "LATTICE" || tok == "FIXED") {
      section = tok;
      if (section == "LATTICE") {
        if (!(ls >> a1.x() >> a1.y() >> a2.x() >> a2.y()))
          throw MeshError("line " + std::to_string(lineno) + ": LATTICE needs a1x a1y a2x a2y");
        have_lattice = true;
      } else if (section == "FIXED") {
        if (!(ls >> fixed_id))
          throw MeshError("line " + std::to_string(lineno) + ": FIXED needs a node id");
        have_fixed = true;
      }
      continue;
    }
    if (section == "NODES") {
      long id;
      Vec2 p;
      std::istringstream ns(line);
      if (!(ns >> id >> p.x() >> p.y()))
        throw MeshError("line " + std::to_string(lineno) + ": expected 'id x y'");
      raw_nodes.emplace_back(id, p);
    } else if (section == "ELEMENTS") {
      std::istringstream es(line);
      long id;
      std::string kind;
      int mat;
      if (!(es >> id >> kind >> mat))
        throw MeshError("line " + std::to_string(lineno) + ": expected 'id kind mat n1..nk'");
      RawElem re;
      if (kind == "q4")
        re.kind = ElementKind::Q4_disp;
      else if (kind == "q9p3")
        re.kind = ElementKind::Q9P3_mixed;
      else
        throw MeshError("line " + std::to_string(lineno) + ": unknown element kind '" + kind + "'");
      re.mat = mat;
      long n;
      while (es >> n) re.conn.push_back(n);
      if (static_cast<int>(re.conn.size()) != nodes_per_element(re.kind))
        throw MeshError("line " + std::to_string(lineno) + ": element needs " +
                        std::to_string(nodes_per_element(re.kind)) + " nodes");
      raw_elems.push_back(std::move(re));
    } else {
      throw MeshError("line " + std::to_string(lineno) + ": content outside a section");
    }
  }
  if (raw_nodes.empty()) throw MeshError("mesh file has no NODES section");
  if (raw_elems.empty()) throw MeshError("mesh file has no ELEMENTS section");
  if (!have_lattice) throw MeshError("mesh file has no LATTICE section");

  for (const auto& [id, p] : raw_nodes) {
    if (id_map.count(id)) throw MeshError("duplicate node id " + std::to_string(id));
    id_map[id] = static_cast<int>(mesh.nodes.size());
    mesh.nodes.push_back(p);
  }
  for (const auto& re : raw_elems) {
    Element e;
    e.kind = re.kind;
    e.material = re.mat;
    for (long n : re.conn) {
      auto it = id_map.find(n);
      if (it == id_map.end()) throw MeshError("element references unknown node " + std::to_string(n));
      e.conn.push_back(it->second);
    }
    mesh.elements.push_back(std::move(e));
  }
  mesh.lattice = make_lattice(a1, a2);
  if (have_fixed) {
    auto it = id_map.find(fixed_id);
    if (it == id_map.end()) throw MeshError("FIXED references unknown node " + std::to_string(fixed_id));
    mesh.fixed_node = it->second;
  } else {
    mesh.fixed_node = mesh.default_fixed_node();
  }
  mesh.pairing = build_pairing(mesh);
  return mesh;
}

RveMesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file: " + path);
  return read_mesh_file(in);
}

void write_mesh_file(std::ostream& out, const RveMesh& mesh) {
  out.precision(17);
  out << "LATTICE " << mesh.lattice.a1.x() << " " << mesh.lattice.a1.y() << " "
      << mesh.lattice.a2.x() << " " << mesh.lattice.a2.y() << "\n";
  out << "NODES\n";
  for (int i = 0; i < mesh.num_nodes(); ++i)
    out << i << " " << mesh.nodes[i].x() << " " << mesh.nodes[i].y() << "\n";
  out << "ELEMENTS\n";
  for (size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto& el = mesh.elements[e];
    out << e << " " << to_string(el.kind) << " " << el.material;
    for (int n : el.conn) out << " " << n;
    out << "\n";
  }
  out << "FIXED " << mesh.fixed_node << "\n";
}

void write_mesh_file(const std::string& path, const RveMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open mesh file for writing: " + path);
  write_mesh_file(out, mesh);
}

}  // namespace microstab
