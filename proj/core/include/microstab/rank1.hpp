#pragma once

#include "microstab/types.hpp"

namespace microstab {

struct Rank1Options {
  double angle_step = 3.14159265358979323846 / 720.0;  // outer grid over M
  int refine_rounds = 4;     // local grid refinements around the best angle
  bool grid_inner = false;   // also grid m instead of the eigenvalue solve
  int inner_steps = 720;
};

struct Rank1Result {
  double B = 0;              // min of (m x M) : A : (m x M) over unit vectors
  double alpha = 0;          // minimizing reference direction angle
  Vec2 M = Vec2::UnitX();    // minimizing reference direction
  Vec2 m = Vec2::UnitX();    // minimizing spatial direction
};

/// Ellipticity indicator of homogenized tangent moduli: B <= 0 signals loss
/// of rank-1 convexity (long-wavelength instability). The inner minimum over
/// m is the smallest eigenvalue of the symmetrized acoustic tensor.
Rank1Result rank1_indicator(const Mat4& A, const Rank1Options& opts = {});

}  // namespace microstab
