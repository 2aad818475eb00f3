#include "microstab/meshgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "point_index.hpp"

namespace microstab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double shoelace(const RveMesh& m, const Element& e) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& p = m.nodes[e.conn[i]];
    const Vec2& q = m.nodes[e.conn[(i + 1) % 4]];
    s += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * s;
}

// Orient elements counter-clockwise, drop unused nodes, set fixed node and
// pairing. Lattice must already be set.
RveMesh finalize(RveMesh m) {
  for (auto& e : m.elements) {
    if (shoelace(m, e) < 0) std::swap(e.conn[1], e.conn[3]);
    if (shoelace(m, e) <= 0) throw MeshError("degenerate element in generated mesh");
  }
  std::vector<int> remap(m.nodes.size(), -1);
  for (const auto& e : m.elements)
    for (int c : e.conn) remap[c] = 1;
  int next = 0;
  std::vector<Vec2> kept;
  for (size_t i = 0; i < m.nodes.size(); ++i)
    if (remap[i] > 0) {
      remap[i] = next++;
      kept.push_back(m.nodes[i]);
    }
  m.nodes = std::move(kept);
  for (auto& e : m.elements)
    for (int& c : e.conn) c = remap[c];
  m.fixed_node = m.default_fixed_node();
  m.pairing = build_pairing(m);
  return m;
}

std::array<Vec2, 4> cell_corners(const Vec2& a1, const Vec2& a2) {
  return {Vec2(-0.5 * (a1 + a2)), Vec2(0.5 * (a1 - a2)), Vec2(0.5 * (a1 + a2)),
          Vec2(0.5 * (a2 - a1))};
}

double graded(int j, int n, double g) {
  if (g == 1.0) return double(j) / n;
  return (std::pow(g, j) - 1.0) / (std::pow(g, n) - 1.0);
}

}  // namespace

RveMesh structured_cell(int nx, int ny, const Vec2& a1, const Vec2& a2,
                        int material) {
  if (nx < 1 || ny < 1) throw MeshError("structured_cell needs nx, ny >= 1");
  RveMesh m;
  m.lattice = make_lattice(a1, a2);
  auto node_id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.nodes.push_back((double(i) / nx - 0.5) * a1 + (double(j) / ny - 0.5) * a2);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      Element e;
      e.kind = ElementKind::Q4_disp;
      e.material = material;
      e.conn = {node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1),
                node_id(i, j + 1)};
      m.elements.push_back(std::move(e));
    }
  return finalize(std::move(m));
}

RveMesh ring_cell(const std::function<double(double)>& rho, const Vec2& a1,
                  const Vec2& a2, int n_side, int n_rad, double grading,
                  int material) {
  if (n_side < 2 || n_rad < 1) throw MeshError("ring_cell needs n_side >= 2, n_rad >= 1");
  RveMesh m;
  m.lattice = make_lattice(a1, a2);
  const auto P = cell_corners(a1, a2);
  std::array<double, 5> theta;
  for (int k = 0; k < 4; ++k) theta[k] = std::atan2(P[k].y(), P[k].x());
  for (int k = 1; k < 4; ++k)
    while (theta[k] <= theta[k - 1]) theta[k] += 2 * kPi;
  theta[4] = theta[0] + 2 * kPi;

  const double scale = std::max(a1.norm(), a2.norm());
  detail::PointIndex index(scale / (4.0 * n_side));
  auto add = [&](const Vec2& p) {
    int id = index.find(p, 1e-9 * scale);
    if (id >= 0) return id;
    id = m.num_nodes();
    m.nodes.push_back(p);
    index.insert(p, id);
    return id;
  };

  for (int k = 0; k < 4; ++k) {
    std::vector<std::vector<int>> grid(n_side + 1, std::vector<int>(n_rad + 1));
    for (int i = 0; i <= n_side; ++i) {
      const double s = double(i) / n_side;
      const double th = theta[k] + s * (theta[k + 1] - theta[k]);
      const Vec2 inner = rho(th) * Vec2(std::cos(th), std::sin(th));
      if (rho(th) <= 0) throw MeshError("hole boundary radius must be positive");
      const Vec2 outer = P[k] + s * (P[(k + 1) % 4] - P[k]);
      for (int j = 0; j <= n_rad; ++j) {
        const double t = graded(j, n_rad, grading);
        grid[i][j] = add((1.0 - t) * inner + t * outer);
      }
    }
    for (int i = 0; i < n_side; ++i)
      for (int j = 0; j < n_rad; ++j) {
        Element e;
        e.kind = ElementKind::Q4_disp;
        e.material = material;
        e.conn = {grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]};
        m.elements.push_back(std::move(e));
      }
  }
  return finalize(std::move(m));
}

RveMesh hole_cell(double radius, const Vec2& a1, const Vec2& a2, int n_side,
                  int n_rad, double grading) {
  if (radius <= 0) throw MeshError("hole radius must be positive");
  return ring_cell([radius](double) { return radius; }, a1, a2, n_side, n_rad,
                   grading);
}

RveMesh square_void_cell(double half_diag, double rot, const Vec2& a1,
                         const Vec2& a2, int n_side, int n_rad,
                         double grading) {
  if (half_diag <= 0) throw MeshError("void size must be positive");
  auto rho = [half_diag, rot](double th) {
    // Square boundary with corners at distance half_diag, angles rot + k*90deg.
    double psi = std::fmod(th - rot, kPi / 2);
    if (psi < 0) psi += kPi / 2;
    psi -= kPi / 4;
    return (half_diag / std::sqrt(2.0)) / std::cos(psi);
  };
  return ring_cell(rho, a1, a2, n_side, n_rad, grading);
}

RveMesh inclusion_cell(double radius, const Vec2& a1, const Vec2& a2,
                       int n_side, int n_rad, int n_core, double grading) {
  if (radius <= 0) throw MeshError("inclusion radius must be positive");
  if (n_core < 1) throw MeshError("inclusion_cell needs n_core >= 1");
  RveMesh m;
  m.lattice = make_lattice(a1, a2);
  const auto P = cell_corners(a1, a2);
  std::array<double, 5> theta;
  for (int k = 0; k < 4; ++k) theta[k] = std::atan2(P[k].y(), P[k].x());
  for (int k = 1; k < 4; ++k)
    while (theta[k] <= theta[k - 1]) theta[k] += 2 * kPi;
  theta[4] = theta[0] + 2 * kPi;

  const double scale = std::max(a1.norm(), a2.norm());
  detail::PointIndex index(scale / (4.0 * n_side));
  auto add = [&](const Vec2& p) {
    int id = index.find(p, 1e-9 * scale);
    if (id >= 0) return id;
    id = m.num_nodes();
    m.nodes.push_back(p);
    index.insert(p, id);
    return id;
  };
  auto emit = [&](const std::vector<std::vector<int>>& grid, int mat) {
    const int ni = static_cast<int>(grid.size()) - 1;
    const int nj = static_cast<int>(grid[0].size()) - 1;
    for (int i = 0; i < ni; ++i)
      for (int j = 0; j < nj; ++j) {
        Element e;
        e.kind = ElementKind::Q4_disp;
        e.material = mat;
        e.conn = {grid[i][j], grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]};
        m.elements.push_back(std::move(e));
      }
  };

  // Outer ring (matrix) between the interface circle and the cell boundary.
  for (int k = 0; k < 4; ++k) {
    std::vector<std::vector<int>> grid(n_side + 1, std::vector<int>(n_rad + 1));
    for (int i = 0; i <= n_side; ++i) {
      const double s = double(i) / n_side;
      const double th = theta[k] + s * (theta[k + 1] - theta[k]);
      const Vec2 inner = radius * Vec2(std::cos(th), std::sin(th));
      const Vec2 outer = P[k] + s * (P[(k + 1) % 4] - P[k]);
      for (int j = 0; j <= n_rad; ++j) {
        const double t = graded(j, n_rad, grading);
        grid[i][j] = add((1.0 - t) * inner + t * outer);
      }
    }
    emit(grid, 0);
  }

  // Inclusion core square with corners toward the cell corners.
  std::array<Vec2, 4> Q;
  for (int k = 0; k < 4; ++k)
    Q[k] = 0.5 * radius * Vec2(std::cos(theta[k]), std::sin(theta[k]));
  {
    std::vector<std::vector<int>> grid(n_side + 1, std::vector<int>(n_side + 1));
    for (int i = 0; i <= n_side; ++i)
      for (int j = 0; j <= n_side; ++j) {
        const double s = double(i) / n_side, t = double(j) / n_side;
        grid[i][j] = add((1 - s) * (1 - t) * Q[0] + s * (1 - t) * Q[1] +
                         s * t * Q[2] + (1 - s) * t * Q[3]);
      }
    emit(grid, 1);
  }

  // Transition blocks between core square sides and the interface circle.
  for (int k = 0; k < 4; ++k) {
    std::vector<std::vector<int>> grid(n_side + 1, std::vector<int>(n_core + 1));
    for (int i = 0; i <= n_side; ++i) {
      const double s = double(i) / n_side;
      const double th = theta[k] + s * (theta[k + 1] - theta[k]);
      const Vec2 inner = Q[k] + s * (Q[(k + 1) % 4] - Q[k]);
      const Vec2 outer = radius * Vec2(std::cos(th), std::sin(th));
      for (int j = 0; j <= n_core; ++j) {
        const double t = double(j) / n_core;
        grid[i][j] = add((1.0 - t) * inner + t * outer);
      }
    }
    emit(grid, 1);
  }
  return finalize(std::move(m));
}

RveMesh snap_grid_cell(const SnapSpec& spec) {
  const int n = spec.n;
  if (n < 2) throw MeshError("snap_grid_cell needs n >= 2");
  if (spec.circle_centers.size() != spec.circle_radii.size())
    throw MeshError("snap_grid_cell: centers/radii size mismatch");
  RveMesh m;
  m.lattice = make_lattice(spec.a1, spec.a2);
  auto node_id = [&](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.nodes.push_back((double(i) / n - 0.5) * spec.a1 +
                        (double(j) / n - 0.5) * spec.a2);

  const double h = std::min(spec.a1.norm(), spec.a2.norm()) / n;
  std::vector<char> snapped(m.nodes.size(), 0);
  std::vector<int> snap_circle(m.nodes.size(), -1);
  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i) {
      const int id = node_id(i, j);
      for (size_t c = 0; c < spec.circle_centers.size(); ++c) {
        const Vec2 d = m.nodes[id] - spec.circle_centers[c];
        const double dist = d.norm();
        if (dist > 1e-12 * h && std::abs(dist - spec.circle_radii[c]) < 0.45 * h) {
          m.nodes[id] = spec.circle_centers[c] + (spec.circle_radii[c] / dist) * d;
          snapped[id] = 1;
          snap_circle[id] = static_cast<int>(c);
          break;
        }
      }
    }

  // Laplacian smoothing of un-snapped interior nodes, boundary held fixed.
  for (int pass = 0; pass < spec.smooth_iters; ++pass) {
    std::vector<Vec2> next = m.nodes;
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) {
        const int id = node_id(i, j);
        if (snapped[id]) continue;
        next[id] = 0.25 * (m.nodes[node_id(i - 1, j)] + m.nodes[node_id(i + 1, j)] +
                           m.nodes[node_id(i, j - 1)] + m.nodes[node_id(i, j + 1)]);
      }
    m.nodes = std::move(next);
  }

  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const std::array<int, 4> conn{node_id(i, j), node_id(i + 1, j),
                                    node_id(i + 1, j + 1), node_id(i, j + 1)};
      Vec2 c = Vec2::Zero();
      for (int a : conn) c += m.nodes[a];
      c /= 4.0;
      const int mat = spec.material_of ? spec.material_of(c) : 0;
      if (mat < 0) continue;
      Element e;
      e.kind = ElementKind::Q4_disp;
      e.material = mat;
      e.conn.assign(conn.begin(), conn.end());
      m.elements.push_back(std::move(e));
    }
  return finalize(std::move(m));
}

RveMesh multi_feature_cell(int n, double d) {
  const double r = 0.5 * d;
  SnapSpec spec;
  spec.n = n;
  spec.circle_centers = {Vec2(-0.2, 0.2), Vec2(-0.2, -0.2), Vec2(0.2, 0.0)};
  spec.circle_radii = {r, r, r};
  spec.material_of = [r](const Vec2& c) {
    if ((c - Vec2(-0.2, 0.2)).norm() < r || (c - Vec2(-0.2, -0.2)).norm() < r)
      return 1;
    if ((c - Vec2(0.2, 0.0)).norm() < r) return -1;
    return 0;
  };
  return snap_grid_cell(spec);
}

RveMesh cross_bar_cell(int n, double radius, double bar_halfwidth) {
  SnapSpec spec;
  spec.n = n;
  spec.circle_centers = {Vec2::Zero()};
  spec.circle_radii = {radius};
  spec.material_of = [radius, bar_halfwidth](const Vec2& c) {
    if (c.norm() >= radius) return 0;
    if (std::abs(c.x()) <= bar_halfwidth || std::abs(c.y()) <= bar_halfwidth)
      return 0;
    return -1;
  };
  return snap_grid_cell(spec);
}

}  // namespace microstab
