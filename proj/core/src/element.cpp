#include "microstab/element.hpp"

#include <array>
#include <cmath>

namespace microstab {

namespace {

struct QuadPoint {
  double xi, eta, w;
};

const std::array<QuadPoint, 4>& gauss2x2() {
  static const double g = 1.0 / std::sqrt(3.0);
  static const std::array<QuadPoint, 4> pts = {{{-g, -g, 1.0},
                                                {g, -g, 1.0},
                                                {g, g, 1.0},
                                                {-g, g, 1.0}}};
  return pts;
}

const std::array<QuadPoint, 9>& gauss3x3() {
  static const std::array<QuadPoint, 9> pts = [] {
    const double a = std::sqrt(3.0 / 5.0);
    const double x[3] = {-a, 0.0, a};
    const double w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    std::array<QuadPoint, 9> p{};
    int q = 0;
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) p[q++] = {x[i], x[j], w[i] * w[j]};
    return p;
  }();
  return pts;
}

// Shape values and parent-space gradients.
void shapes_q4(double xi, double eta, double* N, Eigen::Matrix<double, 4, 2>& dN) {
  const double xs[4] = {-1, 1, 1, -1}, ys[4] = {-1, -1, 1, 1};
  for (int a = 0; a < 4; ++a) {
    N[a] = 0.25 * (1 + xs[a] * xi) * (1 + ys[a] * eta);
    dN(a, 0) = 0.25 * xs[a] * (1 + ys[a] * eta);
    dN(a, 1) = 0.25 * ys[a] * (1 + xs[a] * xi);
  }
}

void shapes_q9(double xi, double eta, double* N, Eigen::Matrix<double, 9, 2>& dN) {
  auto l = [](int node, double x) {  // node in {-1, 0, 1}
    if (node < 0) return 0.5 * x * (x - 1.0);
    if (node > 0) return 0.5 * x * (x + 1.0);
    return 1.0 - x * x;
  };
  auto dl = [](int node, double x) {
    if (node < 0) return x - 0.5;
    if (node > 0) return x + 0.5;
    return -2.0 * x;
  };
  const int xs[9] = {-1, 1, 1, -1, 0, 1, 0, -1, 0};
  const int ys[9] = {-1, -1, 1, 1, -1, 0, 1, 0, 0};
  for (int a = 0; a < 9; ++a) {
    N[a] = l(xs[a], xi) * l(ys[a], eta);
    dN(a, 0) = dl(xs[a], xi) * l(ys[a], eta);
    dN(a, 1) = l(xs[a], xi) * dl(ys[a], eta);
  }
}

// dG_{iJ}/dF_{kL} = -G_{kJ} G_{iL} packed as a 4x4 (G = F^{-T}).
Mat4 inverse_transpose_derivative(const Mat2& G) {
  Mat4 D;
  for (int i = 0; i < 2; ++i)
    for (int J = 0; J < 2; ++J)
      for (int k = 0; k < 2; ++k)
        for (int L = 0; L < 2; ++L)
          D(voigt4(i, J), voigt4(k, L)) = -G(k, J) * G(i, L);
  return D;
}

}  // namespace

int quad_points_per_element(ElementKind kind) {
  return kind == ElementKind::Q4_disp ? 4 : 9;
}

ElementResponse element_response(const RveMesh& mesh, int elem, const VecX& u,
                                 const Material& material,
                                 const std::vector<PointState>& states_old,
                                 bool need_tangent) {
  const Element& el = mesh.elements[elem];
  const int nn = nodes_per_element(el.kind);
  const int nd = 2 * nn;
  const bool mixed = el.kind == ElementKind::Q9P3_mixed;
  const int nq = quad_points_per_element(el.kind);
  if (static_cast<int>(states_old.size()) != nq)
    throw SolverError("element state count mismatch");

  Eigen::Matrix<double, Eigen::Dynamic, 2> X(nn, 2), ue(nn, 2);
  for (int a = 0; a < nn; ++a) {
    X.row(a) = mesh.nodes[el.conn[a]].transpose();
    ue(a, 0) = u(2 * el.conn[a]);
    ue(a, 1) = u(2 * el.conn[a] + 1);
  }

  ElementResponse out;
  out.f = VecX::Zero(nd);
  if (need_tangent) out.k = MatX::Zero(nd, nd);
  out.new_states.resize(nq);

  // Mixed-element blocks (pressure interpolated by {1, xi, eta}).
  MatX Kup = MatX::Zero(nd, 3);
  Mat3 Mp = Mat3::Zero();          // integral of Np Np^T
  Vec3 rhs_p = Vec3::Zero();       // integral of Np tau_m
  std::vector<Vec3> Np_at(nq);
  std::vector<double> tau_m_at(nq), dV_at(nq);
  std::vector<Vec4> g_at(nq);
  std::vector<MatX> B_at(nq);
  std::vector<Mat4> A_at(nq), D_at(nq);
  std::vector<Vec4> dtm_at(nq), P_at(nq);

  const auto* q4 = el.kind == ElementKind::Q4_disp ? &gauss2x2() : nullptr;
  const auto* q9 = mixed ? &gauss3x3() : nullptr;

  for (int q = 0; q < nq; ++q) {
    const QuadPoint qp = q4 ? (*q4)[q] : (*q9)[q];
    double N[9];
    Eigen::Matrix<double, Eigen::Dynamic, 2> dN(nn, 2);
    if (el.kind == ElementKind::Q4_disp) {
      Eigen::Matrix<double, 4, 2> d;
      shapes_q4(qp.xi, qp.eta, N, d);
      dN = d;
    } else {
      Eigen::Matrix<double, 9, 2> d;
      shapes_q9(qp.xi, qp.eta, N, d);
      dN = d;
    }
    const Mat2 Jmap = X.transpose() * dN;  // J_{Jj} = dX_J/dxi_j
    const double detJ = Jmap.determinant();
    if (detJ <= 0) throw MeshError("non-positive isoparametric Jacobian (distorted element)");
    const Eigen::Matrix<double, Eigen::Dynamic, 2> dNdX = dN * Jmap.inverse();
    const double dV = qp.w * detJ;

    // B maps nodal displacements to vec4(grad u), rows (11,21,12,22).
    MatX B = MatX::Zero(4, nd);
    for (int a = 0; a < nn; ++a)
      for (int i = 0; i < 2; ++i)
        for (int J = 0; J < 2; ++J) B(voigt4(i, J), 2 * a + i) = dNdX(a, J);

    const Mat2 gradu = (ue.transpose() * dNdX).eval();
    const Mat2 F = Mat2::Identity() + gradu;

    const PointResponse pr = evaluate(material, F, states_old[q], need_tangent || mixed);
    out.new_states[q] = pr.state;
    out.energy += pr.psi * dV;
    out.volume += dV;
    out.plastic = out.plastic || pr.plastic;
    out.max_yield_residual = std::max(out.max_yield_residual, pr.yield_residual);
    const double det_old = states_old[q].Ci.determinant() * states_old[q].Ci33;
    const double det_new = pr.state.Ci.determinant() * pr.state.Ci33;
    out.max_detCi_drift = std::max(out.max_detCi_drift, std::abs(det_new - det_old));

    if (!mixed) {
      out.f += B.transpose() * pr.P * dV;
      out.P_integral += pr.P * dV;
      if (need_tangent) out.k += B.transpose() * pr.A * B * dV;
      continue;
    }

    const Mat2 G = F.inverse().transpose();
    const Vec4 g = tensor_to_vec4(G);
    const Vec3 Np(1.0, qp.xi, qp.eta);
    Mp += Np * Np.transpose() * dV;
    rhs_p += Np * pr.tau_m * dV;
    Kup += B.transpose() * g * Np.transpose() * dV;

    Np_at[q] = Np;
    tau_m_at[q] = pr.tau_m;
    dV_at[q] = dV;
    g_at[q] = g;
    B_at[q] = B;
    A_at[q] = pr.A;
    D_at[q] = inverse_transpose_derivative(G);
    dtm_at[q] = pr.dtau_m;
    P_at[q] = pr.P;
  }

  if (!mixed) return out;

  // Element pressure dofs from the weak statement p = tau_m (projection onto
  // the linear pressure space), then static condensation onto displacements.
  const Vec3 pe = Mp.ldlt().solve(rhs_p);
  MatX Kuu = MatX::Zero(nd, nd);
  MatX Kpu = MatX::Zero(3, nd);
  for (int q = 0; q < nq; ++q) {
    const double p = Np_at[q].dot(pe);
    const Vec4 Pt = P_at[q] - (tau_m_at[q] - p) * g_at[q];
    out.f += B_at[q].transpose() * Pt * dV_at[q];
    out.P_integral += Pt * dV_at[q];
    if (need_tangent) {
      const Mat4 Amod =
          A_at[q] - g_at[q] * dtm_at[q].transpose() - (tau_m_at[q] - p) * D_at[q];
      Kuu += B_at[q].transpose() * Amod * B_at[q] * dV_at[q];
      Kpu += Np_at[q] * dtm_at[q].transpose() * B_at[q] * dV_at[q];
    }
  }
  if (need_tangent) {
    // d pe/du = Mp^{-1} Kpu enters through the +g dp term of the modified
    // stress; the condensed operator is then symmetrized.
    const MatX k = Kuu + Kup * Mp.ldlt().solve(Kpu);
    out.k = 0.5 * (k + k.transpose());
  }
  return out;
}

MatX element_gradient_matrix(const RveMesh& mesh, int elem, double* volume) {
  const Element& el = mesh.elements[elem];
  const int nn = nodes_per_element(el.kind);
  const int nd = 2 * nn;
  const int nq = quad_points_per_element(el.kind);

  Eigen::Matrix<double, Eigen::Dynamic, 2> X(nn, 2);
  for (int a = 0; a < nn; ++a) X.row(a) = mesh.nodes[el.conn[a]].transpose();

  const auto* q4 = el.kind == ElementKind::Q4_disp ? &gauss2x2() : nullptr;
  const auto* q9 = q4 ? nullptr : &gauss3x3();

  MatX Ne = MatX::Zero(nd, nd);
  for (int q = 0; q < nq; ++q) {
    const QuadPoint qp = q4 ? (*q4)[q] : (*q9)[q];
    double N[9];
    Eigen::Matrix<double, Eigen::Dynamic, 2> dN(nn, 2);
    if (q4) {
      Eigen::Matrix<double, 4, 2> d;
      shapes_q4(qp.xi, qp.eta, N, d);
      dN = d;
    } else {
      Eigen::Matrix<double, 9, 2> d;
      shapes_q9(qp.xi, qp.eta, N, d);
      dN = d;
    }
    const Mat2 Jmap = X.transpose() * dN;
    const double detJ = Jmap.determinant();
    if (detJ <= 0) throw MeshError("non-positive isoparametric Jacobian (distorted element)");
    const Eigen::Matrix<double, Eigen::Dynamic, 2> dNdX = dN * Jmap.inverse();
    const double dV = qp.w * detJ;
    MatX B = MatX::Zero(4, nd);
    for (int a = 0; a < nn; ++a)
      for (int i = 0; i < 2; ++i)
        for (int J = 0; J < 2; ++J) B(voigt4(i, J), 2 * a + i) = dNdX(a, J);
    Ne += B.transpose() * B * dV;
    if (volume) *volume += dV;
  }
  return Ne;
}

}  // namespace microstab
