#pragma once

#include <vector>

#include "microstab/element.hpp"

namespace microstab {

using ElementStates = std::vector<std::vector<PointState>>;

ElementStates make_initial_states(const RveMesh& mesh);

struct AssembledSystem {
  VecX F_int;
  SpMat K_T;                 // symmetric tangent stiffness (if requested)
  double energy = 0;         // integral of psi over the solid
  Vec4 P_integral = Vec4::Zero();  // integral of P over the solid
  double solid_volume = 0;
  ElementStates new_states;
  double max_yield_residual = 0;
  double max_detCi_drift = 0;
  bool plastic = false;
};

/// Assembles internal force, tangent stiffness, energy and stress integrals
/// at total displacement u. Element evaluations run on `threads` threads;
/// the scatter-add is serial and deterministic.
AssembledSystem assemble(const RveMesh& mesh, const VecX& u,
                         const ElementStates& states,
                         const std::vector<Material>& materials,
                         bool need_tangent = true, int threads = 1);

}  // namespace microstab
