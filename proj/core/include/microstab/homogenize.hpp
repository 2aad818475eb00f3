#pragma once

#include <vector>

#include "microstab/assembly.hpp"

namespace microstab {

struct SolveOptions {
  int max_iters = 25;
  double tol = 1e-10;           // on ||R||_inf relative to max(1, ||F_int||_inf)
  int threads = 1;
  bool compute_tangent = true;  // homogenized moduli via 4 extra linear solves
  int max_bisections = 12;      // load sub-stepping on Newton failure
};

struct MacroState {
  Mat2 Fbar = Mat2::Identity();
  Vec4 P = Vec4::Zero();          // homogenized 1st PK stress (from multipliers)
  Vec4 P_volavg = Vec4::Zero();   // volume-average cross-check
  Mat4 A = Mat4::Zero();          // homogenized tangent moduli
  double psi = 0;                 // homogenized stored energy density
  int newton_iters = 0;
  double residual = 0;
  bool plastic = false;
  double max_yield_residual = 0;
  double max_detCi_drift = 0;
};

struct RveSolution {
  VecX u;              // total displacement
  VecX multipliers;    // stacked constraint multipliers
  ElementStates states;  // committed material states at this load
  SpMat K_T;           // tangent stiffness at the solution
  MacroState macro;
};

class Homogenizer {
 public:
  Homogenizer(const RveMesh& mesh, std::vector<Material> materials,
              SolveOptions opts = {});

  /// Periodic-fluctuation solve at Fbar. `warm` supplies the starting
  /// displacement and the committed material states (mandatory for
  /// path-dependent materials along a load path). On Newton failure the load
  /// increment is bisected, committing states at accepted sub-steps.
  RveSolution solve(const Mat2& Fbar, const RveSolution* warm = nullptr) const;

  /// Same system under affine boundary displacements (stiffer upper bound).
  RveSolution solve_linear_displacement(const Mat2& Fbar,
                                        const RveSolution* warm = nullptr) const;

  RveSolution initial_solution() const;  // identity load, virgin states

  const RveMesh& mesh() const { return mesh_; }
  const ConstraintOperators& ops() const { return ops_; }
  const std::vector<Material>& materials() const { return materials_; }
  const SolveOptions& options() const { return opts_; }

 private:
  RveSolution solve_with(const SpMat& A, const MatX& L, const Vec2& origin,
                         const Mat2& Fbar, const RveSolution* warm) const;
  RveSolution newton(const SpMat& A, const MatX& L, const Mat2& Fbar,
                     const RveSolution& start) const;

  const RveMesh& mesh_;
  std::vector<Material> materials_;
  SolveOptions opts_;
  ConstraintOperators ops_;
  SpMat A_periodic_;   // [A1; A2]
  MatX L_periodic_;    // [0; L_M]
  SpMat A_affine_;     // boundary dof selector
  MatX L_affine_;      // boundary node coordinates
};

}  // namespace microstab
