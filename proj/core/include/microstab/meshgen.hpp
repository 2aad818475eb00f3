#pragma once

#include <functional>
#include <vector>

#include "microstab/mesh.hpp"

namespace microstab {

/// Plain nx x ny Q4 grid over the cell spanned by a1, a2 centered at the
/// origin; all elements get the given material id.
RveMesh structured_cell(int nx, int ny, const Vec2& a1, const Vec2& a2,
                        int material = 0);

/// O-grid ring between a centered hole boundary and the cell boundary.
/// The hole boundary is given in polar form rho(theta); n_side intervals per
/// cell edge, n_rad radial layers, geometric grading ratio (>1 refines toward
/// the hole). Opposite cell edges carry translate-identical node layouts.
RveMesh ring_cell(const std::function<double(double)>& rho, const Vec2& a1,
                  const Vec2& a2, int n_side, int n_rad,
                  double grading = 1.0, int material = 0);

/// Circular hole of radius r centered in the cell.
RveMesh hole_cell(double radius, const Vec2& a1, const Vec2& a2, int n_side,
                  int n_rad, double grading = 1.0);

/// Square void with half-diagonal d, corners at angles rot + k*90deg.
RveMesh square_void_cell(double half_diag, double rot, const Vec2& a1,
                         const Vec2& a2, int n_side, int n_rad,
                         double grading = 1.0);

/// Circular inclusion (material 1) of radius r centered in the matrix
/// (material 0): O-grid ring plus a block-structured disk, conforming on the
/// interface circle. n_core = radial layers between the inner core square and
/// the circle.
RveMesh inclusion_cell(double radius, const Vec2& a1, const Vec2& a2,
                       int n_side, int n_rad, int n_core,
                       double grading = 1.0);

/// Structured grid with nodes snapped onto feature circles, element materials
/// assigned by centroid; material_of returning -1 removes the element (void).
struct SnapSpec {
  int n = 32;
  Vec2 a1 = Vec2(1, 0);
  Vec2 a2 = Vec2(0, 1);
  std::vector<Vec2> circle_centers;
  std::vector<double> circle_radii;
  std::function<int(const Vec2&)> material_of;  // default: material 0 everywhere
  int smooth_iters = 4;
};
RveMesh snap_grid_cell(const SnapSpec& spec);

/// Unit square cell with two circular inclusions (material 1) and one
/// circular hole, all of diameter d: inclusions at (-0.2, +-0.2), hole at
/// (0.2, 0).
RveMesh multi_feature_cell(int n, double d = 0.3);

/// Unit square cell with a centered circular hole of radius r crossed by two
/// solid axis-aligned bars of half-width w spanning the hole.
RveMesh cross_bar_cell(int n, double radius, double bar_halfwidth);

}  // namespace microstab
