#pragma once

#include <vector>

#include "microstab/material.hpp"
#include "microstab/mesh.hpp"

namespace microstab {

int quad_points_per_element(ElementKind kind);  // 4 (Q4) or 9 (Q9P3)

struct ElementResponse {
  VecX f;               // internal force, 8 or 18
  MatX k;               // tangent stiffness (mixed: condensed, symmetrized)
  double energy = 0;    // integral of psi over the element
  Vec4 P_integral = Vec4::Zero();  // integral of P over the element
  double volume = 0;    // reference element volume
  std::vector<PointState> new_states;
  double max_yield_residual = 0;
  double max_detCi_drift = 0;
  bool plastic = false;
};

/// Reference-configuration gradient Gram matrix of one element:
/// integral of B^T B, where B maps nodal displacements to grad(u).
MatX element_gradient_matrix(const RveMesh& mesh, int elem,
                             double* volume = nullptr);

/// Evaluates one element at total nodal displacements u (global vector).
/// states_old holds one PointState per quadrature point of this element.
ElementResponse element_response(const RveMesh& mesh, int elem,
                                 const VecX& u, const Material& material,
                                 const std::vector<PointState>& states_old,
                                 bool need_tangent = true);

}  // namespace microstab
