#include "microstab/stress_drive.hpp"

#include <cmath>

namespace microstab {

namespace {

// 4x4 rotation operator on flattened 2x2 tensors: [Q][t] = vec(Q T Q^T).
Mat4 rotation_operator(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat4 Q;
  Q << c * c, -s * c, -s * c, s * s,
       s * c, c * c, -s * s, -s * c,
       s * c, -s * s, c * c, -s * c,
       s * s, s * c, s * c, c * c;
  return Q;
}

Eigen::Matrix<double, 4, 3> embed_sym() {
  Eigen::Matrix<double, 4, 3> I43;
  I43 << 1, 0, 0,
         0, 0, 1,
         0, 0, 1,
         0, 1, 0;
  return I43;
}

Mat2 fhat_to_tensor(const Vec3& Fhat) {
  Mat2 F;
  F << Fhat(0), Fhat(2), Fhat(2), Fhat(1);
  return F;
}

}  // namespace

Mat2 stress_target_tensor(const StressTarget& t) {
  const double c = std::cos(t.theta), s = std::sin(t.theta);
  Mat2 Q;
  Q << c, -s, s, c;
  Mat2 tp = Mat2::Zero();
  tp(0, 0) = -t.lambda * std::cos(t.phi);
  tp(1, 1) = -t.lambda * std::sin(t.phi);
  return Q * tp * Q.transpose();
}

StressDriveResult solve_stress_driven(const Homogenizer& H,
                                      const StressTarget& target,
                                      const RveSolution* warm,
                                      const StressDriveOptions& opts) {
  const Mat4 Q = rotation_operator(target.theta);
  // rows of Q^T picking (tau'_11, tau'_12, tau'_22)
  Eigen::Matrix<double, 3, 4> T;
  T.row(0) = Q.col(0).transpose();
  T.row(1) = Q.col(2).transpose();
  T.row(2) = Q.col(3).transpose();
  const Eigen::Matrix<double, 4, 3> I43 = embed_sym();
  const Vec3 applied(-target.lambda * std::cos(target.phi), 0.0,
                     -target.lambda * std::sin(target.phi));

  RveSolution anchor = warm ? *warm : H.initial_solution();
  const Mat2 Fw = anchor.macro.Fbar;
  Vec3 Fhat(Fw(0, 0), Fw(1, 1), 0.5 * (Fw(0, 1) + Fw(1, 0)));

  StressDriveResult out;
  RveSolution trial = anchor;
  for (int it = 0; it < opts.max_iters; ++it) {
    // Inner strain-driven solve; material states always restart from the
    // committed anchor so the outer iteration does not pollute history.
    RveSolution start = trial;
    start.states = anchor.states;
    trial = H.solve(fhat_to_tensor(Fhat), &start);

    const Mat2 Fbar = trial.macro.Fbar;
    const Mat2 Pbar = vec4_to_tensor(trial.macro.P);
    const Vec4 tau = tensor_to_vec4((Pbar * Fbar.transpose()).eval());
    const Vec3 R = T * tau - applied;
    out.residual = R;
    out.iters = it + 1;
    if (R.lpNorm<Eigen::Infinity>() <=
        opts.tol * std::max(1.0, std::abs(target.lambda))) {
      out.rve = std::move(trial);
      out.Fhat = Fhat;
      return out;
    }

    Mat4 PP = Mat4::Zero(), FF = Mat4::Zero();
    PP << Pbar(0, 0), 0, Pbar(0, 1), 0,
          0, Pbar(0, 0), 0, Pbar(0, 1),
          Pbar(1, 0), 0, Pbar(1, 1), 0,
          0, Pbar(1, 0), 0, Pbar(1, 1);
    FF << Fbar(0, 0), 0, Fbar(0, 1), 0,
          Fbar(1, 0), 0, Fbar(1, 1), 0,
          0, Fbar(0, 0), 0, Fbar(0, 1),
          0, Fbar(1, 0), 0, Fbar(1, 1);
    const Mat3 Jtau = T * (PP + FF * trial.macro.A) * I43;
    const Vec3 dF = Jtau.fullPivLu().solve(-R);
    if (!dF.allFinite()) throw SolverError("stress-driven update failed");
    Fhat += dF;
  }
  throw SolverError("stress-driven outer loop did not converge");
}

}  // namespace microstab
