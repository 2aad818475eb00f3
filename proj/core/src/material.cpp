#include "microstab/material.hpp"

#include <cmath>

namespace microstab {

Material Material::neo_hookean(double kappa, double mu) {
  Material m;
  m.kind = Kind::neo_hookean;
  m.nh = {kappa, mu};
  return m;
}

Material Material::j2_plastic(double kappa, double mu, double sigma_y, double Kp) {
  Material m;
  m.kind = Kind::j2;
  m.j2 = {kappa, mu, sigma_y, Kp};
  return m;
}

namespace {

// psi = kappa/2 (J-1)^2 + mu/2 (I1_bar - 3) with I1_bar = J^{-2/3} tr(C3),
// C3 = blockdiag(F^T F, 1) in plane strain.
PointResponse nh_eval(const NeoHookeanParams& p, const Mat2& F, bool need_tangent) {
  const double J = F.determinant();
  if (J <= 0) throw MaterialError("non-positive deformation gradient determinant");
  const Mat2 G = F.inverse().transpose();
  const double trC3 = (F.transpose() * F).trace() + 1.0;
  const double Jm23 = std::pow(J, -2.0 / 3.0);

  PointResponse r;
  r.psi = 0.5 * p.kappa * (J - 1.0) * (J - 1.0) + 0.5 * p.mu * (Jm23 * trC3 - 3.0);

  const Mat2 P2 = p.kappa * (J - 1.0) * J * G + p.mu * Jm23 * (F - (trC3 / 3.0) * G);
  r.P = tensor_to_vec4(P2);

  const double tau33 =
      p.kappa * (J - 1.0) * J + p.mu * Jm23 * (1.0 - trC3 / 3.0);
  r.tau_m = ((P2 * F.transpose()).trace() + tau33) / 3.0;

  if (!need_tangent) return r;

  const double c1 = p.kappa * (2.0 * J - 1.0) * J;          // d(kappa(J^2-J))/dJ * J-factor
  const double c2 = p.kappa * (J - 1.0) * J;                // coefficient on dG/dF
  Mat4& A = r.A;
  for (int i = 0; i < 2; ++i)
    for (int Jj = 0; Jj < 2; ++Jj)
      for (int k = 0; k < 2; ++k)
        for (int L = 0; L < 2; ++L) {
          double v = 0.0;
          // volumetric part
          v += c1 * G(k, L) * G(i, Jj);
          v -= c2 * G(k, Jj) * G(i, L);
          // isochoric part: mu J^{-2/3} (F - trC3/3 G)
          v += p.mu * Jm23 * (-(2.0 / 3.0) * G(k, L)) * (F(i, Jj) - (trC3 / 3.0) * G(i, Jj));
          v += p.mu * Jm23 * ((i == k && Jj == L) ? 1.0 : 0.0);
          v -= p.mu * Jm23 * (2.0 / 3.0) * F(k, L) * G(i, Jj);
          v += p.mu * Jm23 * (trC3 / 3.0) * G(k, Jj) * G(i, L);
          A(voigt4(i, Jj), voigt4(k, L)) = v;
        }

  // d tau_m / dF = (1/3) d(P:F + tau33)/dF
  Mat2 AF = Mat2::Zero();  // sum_{iJ} A_{iJkL} F_{iJ}
  for (int k = 0; k < 2; ++k)
    for (int L = 0; L < 2; ++L) {
      double s = 0.0;
      for (int i = 0; i < 2; ++i)
        for (int Jj = 0; Jj < 2; ++Jj)
          s += A(voigt4(i, Jj), voigt4(k, L)) * F(i, Jj);
      AF(k, L) = s;
    }
  const Mat2 dtau33 = p.kappa * (2.0 * J - 1.0) * J * G -
                      p.mu * (2.0 / 3.0) * Jm23 * (1.0 - trC3 / 3.0) * G -
                      p.mu * Jm23 * (2.0 / 3.0) * F;
  r.dtau_m = tensor_to_vec4((AF + P2 + dtau33) / 3.0).eval();
  return r;
}

// Stress-only J2 update: radial return in principal logarithmic strain space
// on the trial elastic Finger tensor b^e = F Ci_old F^T (plane strain: the 33
// direction is a fixed principal direction).
PointResponse j2_stress(const J2Params& p, const Mat2& F, const PointState& old) {
  const double J = F.determinant();
  if (J <= 0) throw MaterialError("non-positive deformation gradient determinant");

  const Mat2 be2 = F * old.Ci * F.transpose();
  const double be3 = old.Ci33;
  Eigen::SelfAdjointEigenSolver<Mat2> eig;
  eig.computeDirect(0.5 * (be2 + be2.transpose()));
  const Vec2 lam2 = eig.eigenvalues();
  const Mat2 n = eig.eigenvectors();
  if (lam2(0) <= 0 || be3 <= 0)
    throw MaterialError("non-positive trial elastic stretch");

  Vec3 eps(0.5 * std::log(lam2(0)), 0.5 * std::log(lam2(1)), 0.5 * std::log(be3));
  const double tr = eps.sum();
  Vec3 dev = eps - Vec3::Constant(tr / 3.0);

  const double dev_norm = dev.norm();
  const double phi_trial =
      2.0 * p.mu * dev_norm - std::sqrt(2.0 / 3.0) * (p.sigma_y + p.Kp * old.alpha);

  PointResponse r;
  r.state = old;
  if (phi_trial > 0) {
    const double dgamma = phi_trial / (2.0 * p.mu + (2.0 / 3.0) * p.Kp);
    dev *= (1.0 - dgamma / dev_norm);
    eps = dev + Vec3::Constant(tr / 3.0);
    r.state.alpha = old.alpha + std::sqrt(2.0 / 3.0) * dgamma;
    r.plastic = true;
    r.yield_residual = std::abs(
        2.0 * p.mu * dev.norm() -
        std::sqrt(2.0 / 3.0) * (p.sigma_y + p.Kp * r.state.alpha));
    // updated b^e from returned principal stretches
    Mat2 be_new = Mat2::Zero();
    for (int a = 0; a < 2; ++a)
      be_new += std::exp(2.0 * eps(a)) * n.col(a) * n.col(a).transpose();
    const Mat2 Finv = F.inverse();
    r.state.Ci = Finv * be_new * Finv.transpose();
    r.state.Ci33 = std::exp(2.0 * eps(2));
  }

  const Vec3 tau = Vec3::Constant(p.kappa * tr) + 2.0 * p.mu * dev;
  Mat2 tau2 = Mat2::Zero();
  for (int a = 0; a < 2; ++a)
    tau2 += tau(a) * n.col(a) * n.col(a).transpose();

  r.P = tensor_to_vec4((tau2 * F.inverse().transpose()).eval());
  r.psi = 0.5 * p.kappa * tr * tr + p.mu * dev.squaredNorm();
  r.tau_m = p.kappa * tr;
  return r;
}

PointResponse j2_eval(const J2Params& p, const Mat2& F, const PointState& old,
                      bool need_tangent) {
  PointResponse r = j2_stress(p, F, old);
  if (!need_tangent) return r;

  // Central finite differences over F with the converged state held fixed at
  // the previous step's value (consistent algorithmic tangent of the
  // incremental update).
  const double h = 1e-6 * std::max(1.0, F.norm());
  for (int k = 0; k < 2; ++k)
    for (int L = 0; L < 2; ++L) {
      Mat2 Fp = F, Fm = F;
      Fp(k, L) += h;
      Fm(k, L) -= h;
      const PointResponse rp = j2_stress(p, Fp, old);
      const PointResponse rm = j2_stress(p, Fm, old);
      r.A.col(voigt4(k, L)) = (rp.P - rm.P) / (2.0 * h);
      r.dtau_m(voigt4(k, L)) = (rp.tau_m - rm.tau_m) / (2.0 * h);
    }
  return r;
}

}  // namespace

PointResponse evaluate(const Material& mat, const Mat2& F,
                       const PointState& state_old, bool need_tangent) {
  switch (mat.kind) {
    case Material::Kind::neo_hookean:
      return nh_eval(mat.nh, F, need_tangent);
    case Material::Kind::j2:
      return j2_eval(mat.j2, F, state_old, need_tangent);
  }
  throw MaterialError("unknown material kind");
}

}  // namespace microstab
