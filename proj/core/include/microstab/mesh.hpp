#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "microstab/lattice.hpp"
#include "microstab/types.hpp"

namespace microstab {

enum class ElementKind { Q4_disp, Q9P3_mixed };

int nodes_per_element(ElementKind kind);
std::string to_string(ElementKind kind);

struct Element {
  std::vector<int> conn;  // counter-clockwise corner nodes first
  ElementKind kind = ElementKind::Q4_disp;
  int material = 0;
};

/// One periodic constraint: node `pos` is the translate of node `neg`
/// by L = c1*a1 + c2*a2 (integer lattice coefficients kept alongside).
struct NodePair {
  int neg = -1;
  int pos = -1;
  Vec2 L = Vec2::Zero();
  int c1 = 0, c2 = 0;
};

struct RveMesh {
  std::vector<Vec2> nodes;
  std::vector<Element> elements;
  LatticeSpec lattice;
  std::vector<NodePair> pairing;
  int fixed_node = -1;
  int tiles = 1;  // number of unit cells this mesh covers

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_dofs() const { return 2 * num_nodes(); }
  int num_pairs() const { return static_cast<int>(pairing.size()); }

  /// Cell volume (area x unit thickness), voids included.
  double volume() const { return lattice.cell_area() * tiles; }

  /// Node ids on the mesh boundary (edges used by exactly one element).
  std::vector<int> boundary_nodes() const;

  /// Node nearest the centroid of the solid region.
  int default_fixed_node() const;
};

/// Selector / difference operators of the constrained equilibrium system.
struct ConstraintOperators {
  SpMat A1;   // 2 x N, picks the fixed node displacement
  SpMat A2;   // 2m x N, u+ - u- stacked pair by pair
  MatX L_M;   // 2m x 4, rows [X~ 0 Y~ 0; 0 X~ 0 Y~] per pair
};

/// Geometric matching of boundary nodes against the lattice translations.
/// tol < 0 selects the default 1e-8 * max lattice vector length.
std::vector<NodePair> build_pairing(const RveMesh& mesh, double tol = -1.0);

ConstraintOperators assemble_constraints(const RveMesh& mesh);

/// h = L_M ([Fbar] - [I]) of the periodic constraint rows.
VecX constraint_offset(const ConstraintOperators& ops, const Mat2& Fbar);

/// Replicates the mesh over an nx x ny block of cells, merging coincident
/// boundary nodes; lattice vectors scale accordingly.
RveMesh tile_mesh(const RveMesh& unit, int nx, int ny);

/// Upgrades every Q4 element to a 9-node Q9P3_mixed element (mid-edge and
/// center nodes inserted; shared edge nodes merged).
RveMesh promote_to_q9(const RveMesh& mesh);

RveMesh read_mesh_file(std::istream& in);
RveMesh read_mesh_file(const std::string& path);
void write_mesh_file(std::ostream& out, const RveMesh& mesh);
void write_mesh_file(const std::string& path, const RveMesh& mesh);

}  // namespace microstab
