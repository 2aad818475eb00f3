#include <doctest.h>

#include <cmath>

#include "microstab/rank1.hpp"
#include "microstab/types.hpp"

using namespace microstab;

namespace {

// Isotropic small-strain moduli written as a fourth-order tensor in the
// (11,21,12,22) vector ordering: A_iJkL = lam d_iJ d_kL + mu (d_ik d_JL +
// d_iL d_Jk). Its acoustic tensor is mu I + (lam + mu) M M^T, so the
// ellipticity indicator is exactly mu.
Mat4 isotropic_moduli(double lam, double mu) {
  Mat4 A = Mat4::Zero();
  auto d = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  for (int i = 0; i < 2; ++i)
    for (int J = 0; J < 2; ++J)
      for (int k = 0; k < 2; ++k)
        for (int L = 0; L < 2; ++L)
          A(i + 2 * J, k + 2 * L) = lam * d(i, J) * d(k, L) +
                                    mu * (d(i, k) * d(J, L) + d(i, L) * d(J, k));
  return A;
}

double dyad_form(const Mat4& A, const Vec2& m, const Vec2& M) {
  Vec4 v;
  for (int i = 0; i < 2; ++i)
    for (int J = 0; J < 2; ++J) v(i + 2 * J) = m(i) * M(J);
  return v.dot(A * v);
}

}  // namespace

TEST_CASE("isotropic moduli give B equal to the shear modulus") {
  const double lam = 96.26, mu = 35.71;
  Rank1Result r = rank1_indicator(isotropic_moduli(lam, mu));
  CHECK(r.B == doctest::Approx(mu).epsilon(1e-10));
  // the minimizing mode is pure shear: m orthogonal to M
  CHECK(std::abs(r.m.dot(r.M)) < 1e-6);
  CHECK(r.m.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.M.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("indicator depends only on the major-symmetric part") {
  Mat4 A = isotropic_moduli(40.0, 11.0);
  // add an antisymmetric perturbation; dyad quadratic forms cannot see it
  Mat4 W = Mat4::Zero();
  W(0, 3) = 2.5;
  W(3, 0) = -2.5;
  W(1, 2) = -0.7;
  W(2, 1) = 0.7;
  Rank1Result r0 = rank1_indicator(A);
  Rank1Result r1 = rank1_indicator(A + W);
  CHECK(r1.B == doctest::Approx(r0.B).epsilon(1e-12));
}

TEST_CASE("eigenvalue inner minimum is never above the gridded one") {
  Mat4 A = isotropic_moduli(20.0, 7.0);
  A(0, 0) += 3.0;
  A(3, 3) -= 1.5;
  A(0, 3) += 0.8;
  A(3, 0) += 0.8;
  Rank1Options grid;
  grid.grid_inner = true;
  const double B_eig = rank1_indicator(A).B;
  const double B_grid = rank1_indicator(A, grid).B;
  CHECK(B_eig <= B_grid + 1e-12);
  CHECK(B_grid == doctest::Approx(B_eig).epsilon(1e-4));
}

TEST_CASE("constructed rank-1 deficient moduli are flagged") {
  Mat4 A = isotropic_moduli(50.0, 20.0);
  const double ang_m = 0.37, ang_M = 1.21;
  const Vec2 m(std::cos(ang_m), std::sin(ang_m));
  const Vec2 M(std::cos(ang_M), std::sin(ang_M));
  Vec4 dvec;
  for (int i = 0; i < 2; ++i)
    for (int J = 0; J < 2; ++J) dvec(i + 2 * J) = m(i) * M(J);
  // kill the quadratic form exactly along the chosen dyad (|dvec| = 1)
  const double q = dyad_form(A, m, M);
  A -= q * dvec * dvec.transpose();
  REQUIRE(std::abs(dyad_form(A, m, M)) < 1e-12);

  // the subtraction may push other dyads below zero as well; the indicator
  // must flag the loss and report a consistent minimizing dyad
  Rank1Result r = rank1_indicator(A);
  CHECK(r.B <= 1e-8);
  CHECK(dyad_form(A, r.m, r.M) == doctest::Approx(r.B).epsilon(1e-8));
}

TEST_CASE("indicator is invariant under simultaneous sign flip of the dyad") {
  Mat4 A = isotropic_moduli(33.0, 9.0);
  A(1, 1) += 2.0;
  Rank1Result r = rank1_indicator(A);
  CHECK(dyad_form(A, r.m, r.M) == doctest::Approx(r.B).epsilon(1e-9));
  CHECK(dyad_form(A, -r.m, -r.M) == doctest::Approx(r.B).epsilon(1e-9));
}
