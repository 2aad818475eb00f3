#include "microstab/lattice.hpp"

#include <cmath>
#include <numbers>

namespace microstab {

std::pair<Vec2, Vec2> reciprocal_basis(const Vec2& a1, const Vec2& a2) {
  const double det = a1.x() * a2.y() - a1.y() * a2.x();
  const double scale = std::max(a1.norm(), a2.norm());
  if (std::abs(det) < 1e-12 * scale * scale)
    throw MeshError("degenerate lattice: a1, a2 nearly linearly dependent");
  // Rows of 2*pi*A^{-1} with A = [a1 a2].
  const double f = 2.0 * std::numbers::pi / det;
  Vec2 b1(f * a2.y(), -f * a2.x());
  Vec2 b2(-f * a1.y(), f * a1.x());
  return {b1, b2};
}

LatticeSpec make_lattice(const Vec2& a1, const Vec2& a2) {
  auto [b1, b2] = reciprocal_basis(a1, a2);
  return LatticeSpec{a1, a2, b1, b2};
}

Vec2 LatticeSpec::lattice_coords(const Vec2& x) const {
  const double two_pi = 2.0 * std::numbers::pi;
  return Vec2(x.dot(b1) / two_pi, x.dot(b2) / two_pi);
}

double LatticeSpec::duality_residual() const {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = 0.0;
  r = std::max(r, std::abs(a1.dot(b1) - two_pi));
  r = std::max(r, std::abs(a2.dot(b2) - two_pi));
  r = std::max(r, std::abs(a1.dot(b2)));
  r = std::max(r, std::abs(a2.dot(b1)));
  return r / std::max(b1.norm(), b2.norm());
}

}  // namespace microstab
