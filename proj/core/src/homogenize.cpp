#include "microstab/homogenize.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <functional>
#include <set>

namespace microstab {

namespace {

// Bordered saddle-point matrix [[K, -A^T], [-A, 0]].
SpMat bordered(const SpMat& K, const SpMat& A) {
  const int N = static_cast<int>(K.rows());
  const int nc = static_cast<int>(A.rows());
  std::vector<Triplet> trips;
  trips.reserve(K.nonZeros() + 4 * A.nonZeros());
  for (int o = 0; o < K.outerSize(); ++o)
    for (SpMat::InnerIterator it(K, o); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value());
  for (int o = 0; o < A.outerSize(); ++o)
    for (SpMat::InnerIterator it(A, o); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()) + N,
                         static_cast<int>(it.col()), -it.value());
      trips.emplace_back(static_cast<int>(it.col()),
                         static_cast<int>(it.row()) + N, -it.value());
    }
  SpMat J(N + nc, N + nc);
  J.setFromTriplets(trips.begin(), trips.end());
  J.makeCompressed();
  return J;
}

}  // namespace

Homogenizer::Homogenizer(const RveMesh& mesh, std::vector<Material> materials,
                         SolveOptions opts)
    : mesh_(mesh), materials_(std::move(materials)), opts_(opts),
      ops_(assemble_constraints(mesh)) {
  const int N = mesh_.num_dofs();
  const int m2 = static_cast<int>(ops_.A2.rows());

  std::vector<Triplet> trips;
  for (int o = 0; o < ops_.A1.outerSize(); ++o)
    for (SpMat::InnerIterator it(ops_.A1, o); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value());
  for (int o = 0; o < ops_.A2.outerSize(); ++o)
    for (SpMat::InnerIterator it(ops_.A2, o); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()) + 2,
                         static_cast<int>(it.col()), it.value());
  A_periodic_.resize(2 + m2, N);
  A_periodic_.setFromTriplets(trips.begin(), trips.end());
  A_periodic_.makeCompressed();
  L_periodic_ = MatX::Zero(2 + m2, 4);
  L_periodic_.bottomRows(m2) = ops_.L_M;

  // Affine Dirichlet variant: constrain every outer-boundary node (the nodes
  // participating in the periodic pairing) to the macroscopic field.
  std::set<int> outer;
  for (const auto& p : mesh_.pairing) {
    outer.insert(p.neg);
    outer.insert(p.pos);
  }
  trips.clear();
  L_affine_ = MatX::Zero(2 * static_cast<int>(outer.size()), 4);
  int row = 0;
  for (int n : outer) {
    trips.emplace_back(row, 2 * n, 1.0);
    trips.emplace_back(row + 1, 2 * n + 1, 1.0);
    const Vec2 X = mesh_.nodes[n];
    L_affine_(row, 0) = X.x();
    L_affine_(row, 2) = X.y();
    L_affine_(row + 1, 1) = X.x();
    L_affine_(row + 1, 3) = X.y();
    row += 2;
  }
  A_affine_.resize(row, N);
  A_affine_.setFromTriplets(trips.begin(), trips.end());
  A_affine_.makeCompressed();
}

RveSolution Homogenizer::initial_solution() const {
  RveSolution s;
  s.u = VecX::Zero(mesh_.num_dofs());
  s.states = make_initial_states(mesh_);
  s.macro.Fbar = Mat2::Identity();
  return s;
}

RveSolution Homogenizer::newton(const SpMat& A, const MatX& L, const Mat2& Fbar,
                                const RveSolution& start) const {
  const int N = mesh_.num_dofs();
  const int nc = static_cast<int>(A.rows());
  const Vec4 dF = tensor_to_vec4(Fbar) - tensor_to_vec4(Mat2::Identity());
  const VecX h = L * dF;
  const double V = mesh_.volume();

  VecX u = start.u;
  VecX mult = start.multipliers.size() == nc ? start.multipliers : VecX::Zero(nc);

  Eigen::SparseLU<SpMat> lu;
  AssembledSystem sys;
  double res = 0;
  int it = 0;
  bool converged = false;
  for (; it <= opts_.max_iters; ++it) {
    try {
      sys = assemble(mesh_, u, start.states, materials_, true, opts_.threads);
    } catch (const MaterialError& e) {
      // An overshooting iterate left the admissible range; recoverable by
      // load sub-stepping.
      throw SolverError(std::string("constitutive failure in Newton iterate: ") +
                        e.what());
    }
    VecX R(N + nc);
    R.head(N) = sys.F_int - A.transpose() * mult;
    R.tail(nc) = h - A * u;
    res = R.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res)) throw SolverError("non-finite residual");
    const double scale = std::max(1.0, sys.F_int.lpNorm<Eigen::Infinity>());
    if (res <= opts_.tol * scale) {
      converged = true;
      break;
    }
    if (it == opts_.max_iters) break;
    const SpMat J = bordered(sys.K_T, A);
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw SolverError("singular tangent system (possible bifurcation point)");
    const VecX dz = lu.solve(-R);
    if (!dz.allFinite()) throw SolverError("non-finite Newton increment");
    u += dz.head(N);
    mult += dz.tail(nc);
  }
  if (!converged)
    throw SolverError("Newton did not converge in " +
                      std::to_string(opts_.max_iters) + " iterations");

  RveSolution sol;
  sol.u = std::move(u);
  sol.multipliers = std::move(mult);
  sol.states = std::move(sys.new_states);
  sol.K_T = std::move(sys.K_T);
  sol.macro.Fbar = Fbar;
  sol.macro.P = L.transpose() * sol.multipliers / V;
  sol.macro.P_volavg = sys.P_integral / V;
  sol.macro.psi = sys.energy / V;
  sol.macro.newton_iters = it;
  sol.macro.residual = res;
  sol.macro.plastic = sys.plastic;
  sol.macro.max_yield_residual = sys.max_yield_residual;
  sol.macro.max_detCi_drift = sys.max_detCi_drift;

  if (opts_.compute_tangent) {
    const SpMat J = bordered(sol.K_T, A);
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw SolverError("singular tangent system at converged state");
    MatX Lhat = MatX::Zero(N + nc, 4);
    Lhat.bottomRows(nc) = L;
    const MatX Y = lu.solve(Lhat);
    sol.macro.A = -(Lhat.transpose() * Y) / V;
  }
  return sol;
}

RveSolution Homogenizer::solve_with(const SpMat& A, const MatX& L,
                                    const Vec2& origin, const Mat2& Fbar,
                                    const RveSolution* warm) const {
  RveSolution cur = warm ? *warm : initial_solution();
  if (cur.u.size() != mesh_.num_dofs()) cur.u = VecX::Zero(mesh_.num_dofs());
  if (cur.states.empty()) cur.states = make_initial_states(mesh_);

  // Recursive load sub-stepping: an accepted sub-step commits its states.
  std::function<RveSolution(const Mat2&, const RveSolution&, int)> attempt =
      [&](const Mat2& target, const RveSolution& from, int depth) -> RveSolution {
    RveSolution start = from;
    const Mat2 dF = target - from.macro.Fbar;
    for (int n = 0; n < mesh_.num_nodes(); ++n) {
      const Vec2 du = dF * (mesh_.nodes[n] - origin);
      start.u(2 * n) += du.x();
      start.u(2 * n + 1) += du.y();
    }
    try {
      return newton(A, L, target, start);
    } catch (const SolverError&) {
      if (depth >= opts_.max_bisections) throw;
      const Mat2 mid = 0.5 * (from.macro.Fbar + target);
      const RveSolution half = attempt(mid, from, depth + 1);
      return attempt(target, half, depth + 1);
    }
  };
  return attempt(Fbar, cur, 0);
}

RveSolution Homogenizer::solve(const Mat2& Fbar, const RveSolution* warm) const {
  return solve_with(A_periodic_, L_periodic_, mesh_.nodes[mesh_.fixed_node],
                    Fbar, warm);
}

RveSolution Homogenizer::solve_linear_displacement(const Mat2& Fbar,
                                                   const RveSolution* warm) const {
  return solve_with(A_affine_, L_affine_, Vec2::Zero(), Fbar, warm);
}

}  // namespace microstab
