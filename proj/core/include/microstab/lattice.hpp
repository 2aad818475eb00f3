#pragma once

#include "microstab/types.hpp"

namespace microstab {

/// Periodic lattice basis and its reciprocal, a_i . b_j = 2*pi*delta_ij.
struct LatticeSpec {
  Vec2 a1, a2;
  Vec2 b1, b2;

  double cell_area() const { return std::abs(a1.x() * a2.y() - a1.y() * a2.x()); }

  /// Coordinates (s, t) of x in the lattice basis, x = s*a1 + t*a2.
  Vec2 lattice_coords(const Vec2& x) const;

  /// Largest |a_i . b_j - 2*pi*delta_ij| divided by max |b|.
  double duality_residual() const;
};

/// Solves a_i . b_j = 2*pi*delta_ij for (b1, b2).
/// Throws MeshError if a1, a2 are (nearly) linearly dependent.
std::pair<Vec2, Vec2> reciprocal_basis(const Vec2& a1, const Vec2& a2);

LatticeSpec make_lattice(const Vec2& a1, const Vec2& a2);

}  // namespace microstab
