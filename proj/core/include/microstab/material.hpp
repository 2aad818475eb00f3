#pragma once

#include "microstab/types.hpp"

namespace microstab {

struct NeoHookeanParams {
  double kappa = 0;
  double mu = 0;
};

struct J2Params {
  double kappa = 0;
  double mu = 0;
  double sigma_y = 0;
  double Kp = 0;  // linear isotropic hardening modulus
};

struct Material {
  enum class Kind { neo_hookean, j2 };
  Kind kind = Kind::neo_hookean;
  NeoHookeanParams nh{};
  J2Params j2{};

  static Material neo_hookean(double kappa, double mu);
  static Material j2_plastic(double kappa, double mu, double sigma_y, double Kp);
  double bulk() const { return kind == Kind::neo_hookean ? nh.kappa : j2.kappa; }
};

/// Plane-strain internal state: in-plane block and 33 component of the
/// inverse plastic right Cauchy-Green tensor, plus equivalent plastic strain.
struct PointState {
  Mat2 Ci = Mat2::Identity();
  double Ci33 = 1.0;
  double alpha = 0.0;
};

struct PointResponse {
  Vec4 P = Vec4::Zero();        // 1st PK stress, (11,21,12,22)
  Mat4 A = Mat4::Zero();        // dP/dF
  double psi = 0;               // stored (elastic) energy density
  double tau_m = 0;             // Kirchhoff pressure tr(tau)/3
  Vec4 dtau_m = Vec4::Zero();   // d tau_m / dF
  PointState state;             // updated state (identity update if elastic)
  bool plastic = false;
  double yield_residual = 0.0;  // |phi| after return map
};

/// Plane-strain constitutive update at one quadrature point. F is the
/// in-plane deformation gradient (F33 = 1). `state_old` is ignored for
/// hyperelastic materials.
PointResponse evaluate(const Material& mat, const Mat2& F,
                       const PointState& state_old, bool need_tangent = true);

}  // namespace microstab
