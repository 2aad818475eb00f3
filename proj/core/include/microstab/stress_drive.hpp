#pragma once

#include "microstab/homogenize.hpp"

namespace microstab {

/// Prescribed macroscopic Kirchhoff stress in principal form: principal
/// values (-lambda cos(phi), -lambda sin(phi)) at orientation theta, i.e.
/// lambda > 0 compresses.
struct StressTarget {
  double theta = 0;
  double phi = 0;
  double lambda = 0;
};

struct StressDriveOptions {
  int max_iters = 30;
  double tol = 1e-9;  // on the principal stress residual, relative to max(1, lambda)
};

struct StressDriveResult {
  RveSolution rve;      // converged inner solution at the found Fbar
  Vec3 Fhat;            // (F11, F22, F12), Fbar symmetric
  Vec3 residual = Vec3::Zero();
  int iters = 0;
};

Mat2 stress_target_tensor(const StressTarget& t);  // tau_bar in global axes

/// Outer Newton loop over (F11, F22, F12) wrapped around strain-driven RVE
/// solves; `warm` anchors the committed material state and starting Fbar.
StressDriveResult solve_stress_driven(const Homogenizer& H,
                                      const StressTarget& target,
                                      const RveSolution* warm = nullptr,
                                      const StressDriveOptions& opts = {});

}  // namespace microstab
