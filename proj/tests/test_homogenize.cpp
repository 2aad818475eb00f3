#include <doctest.h>

#include <random>

#include "microstab/assembly.hpp"
#include "microstab/bloch.hpp"
#include "microstab/homogenize.hpp"
#include "microstab/meshgen.hpp"

using namespace microstab;

namespace {

Mat2 random_Fbar(std::mt19937& rng, double spread = 0.2) {
  std::uniform_real_distribution<double> d(-spread, spread);
  for (;;) {
    Mat2 F = Mat2::Identity();
    F(0, 0) += d(rng);
    F(0, 1) += d(rng);
    F(1, 0) += d(rng);
    F(1, 1) += d(rng);
    if (F.determinant() > 0.4) return F;
  }
}

}  // namespace

TEST_CASE("homogeneous RVE reproduces the material point") {
  const Material mat = Material::neo_hookean(166.67, 35.71);
  const RveMesh mesh = structured_cell(4, 4, Vec2(1, 0), Vec2(0.15, 1.05));
  Homogenizer hom(mesh, {mat});
  std::mt19937 rng(123);
  for (int trial = 0; trial < 3; ++trial) {
    const Mat2 Fbar = random_Fbar(rng);
    const RveSolution sol = hom.solve(Fbar);
    const PointResponse pt = evaluate(mat, Fbar, PointState{});
    CHECK((sol.macro.P - pt.P).norm() / std::max(1.0, pt.P.norm()) < 1e-10);
    CHECK((sol.macro.A - pt.A).norm() / pt.A.norm() < 1e-10);
    CHECK(sol.macro.psi == doctest::Approx(pt.psi).epsilon(1e-10));
    // The fluctuation vanishes: u is exactly affine.
    VecX affine = VecX::Zero(mesh.num_dofs());
    const Vec2 X0 = mesh.nodes[mesh.fixed_node];
    for (int n = 0; n < mesh.num_nodes(); ++n)
      affine.segment<2>(2 * n) =
          (Fbar - Mat2::Identity()) * (mesh.nodes[n] - X0);
    CHECK((sol.u - affine).norm() < 1e-9);
  }
}

TEST_CASE("homogenized tangent matches finite differences of the stress") {
  const RveMesh mesh = inclusion_cell(0.25, Vec2(1, 0), Vec2(0, 1), 8, 4, 2);
  const std::vector<Material> mats = {Material::neo_hookean(166.67, 35.71),
                                      Material::neo_hookean(11.597, 17.004)};
  Homogenizer hom(mesh, mats);
  Mat2 Fbar;
  Fbar << 1.12, 0.03, -0.02, 0.95;
  const RveSolution sol = hom.solve(Fbar);

  const double h = 1e-6;
  Mat4 A_fd;
  for (int k = 0; k < 2; ++k)
    for (int L = 0; L < 2; ++L) {
      Mat2 Fp = Fbar, Fm = Fbar;
      Fp(k, L) += h;
      Fm(k, L) -= h;
      const RveSolution sp = hom.solve(Fp, &sol);
      const RveSolution sm = hom.solve(Fm, &sol);
      A_fd.col(voigt4(k, L)) = (sp.macro.P - sm.macro.P) / (2 * h);
    }
  CHECK((A_fd - sol.macro.A).norm() / sol.macro.A.norm() < 1e-5);
}

TEST_CASE("multiplier stress equals volume-average stress") {
  const RveMesh mesh = hole_cell(0.3, Vec2(1, 0), Vec2(0, 1), 10, 5, 1.2);
  Homogenizer hom(mesh, {Material::neo_hookean(166.67, 35.71)});
  std::mt19937 rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    const RveSolution sol = hom.solve(random_Fbar(rng, 0.15));
    CHECK((sol.macro.P - sol.macro.P_volavg).norm() /
              std::max(1.0, sol.macro.P.norm()) <
          1e-8);
  }
}

TEST_CASE("tiling invariance of the macroscopic response") {
  const RveMesh unit = hole_cell(0.3, Vec2(1, 0), Vec2(0, 1), 8, 4, 1.2);
  Mat2 Fbar;
  Fbar << 1.15, 0.0, 0.0, 1.0;

  auto macro_of = [&](const RveMesh& m) {
    Homogenizer hom(m, {Material::neo_hookean(166.67, 35.71)});
    return hom.solve(Fbar).macro;
  };
  const MacroState m11 = macro_of(unit);
  for (auto [nx, ny] : {std::pair{1, 2}, {2, 1}, {2, 2}}) {
    const MacroState mt = macro_of(tile_mesh(unit, nx, ny));
    CHECK((mt.P - m11.P).norm() / std::max(1.0, m11.P.norm()) < 1e-8);
    CHECK((mt.A - m11.A).norm() / m11.A.norm() < 1e-8);
    CHECK(mt.psi == doctest::Approx(m11.psi).epsilon(1e-8));
  }
}

TEST_CASE("affine boundary conditions bound the periodic energy from above") {
  const RveMesh mesh = hole_cell(0.3, Vec2(1, 0), Vec2(0, 1), 10, 5, 1.2);
  Homogenizer hom(mesh, {Material::neo_hookean(166.67, 35.71)});
  Mat2 Fbar;
  Fbar << 1.1, 0.05, 0.0, 0.95;
  const RveSolution per = hom.solve(Fbar);
  const RveSolution aff = hom.solve_linear_displacement(Fbar);
  CHECK(aff.macro.psi >= per.macro.psi - 1e-12);
  // Both satisfy the multiplier/average identity.
  CHECK((aff.macro.P - aff.macro.P_volavg).norm() /
            std::max(1.0, aff.macro.P.norm()) <
        1e-8);
}

TEST_CASE("homogeneous affine and periodic solves coincide") {
  const RveMesh mesh = structured_cell(3, 3, Vec2(1, 0), Vec2(0, 1));
  Homogenizer hom(mesh, {Material::neo_hookean(166.67, 35.71)});
  Mat2 Fbar;
  Fbar << 1.2, 0.1, 0.0, 0.9;
  const RveSolution per = hom.solve(Fbar);
  const RveSolution aff = hom.solve_linear_displacement(Fbar);
  CHECK(aff.macro.psi == doctest::Approx(per.macro.psi).epsilon(1e-10));
  CHECK((aff.macro.P - per.macro.P).norm() < 1e-9);
}

TEST_CASE("elastoplastic RVE path") {
  const RveMesh mesh =
      promote_to_q9(structured_cell(3, 3, Vec2(1, 0), Vec2(0, 1)));
  const Material mat = Material::j2_plastic(164.21, 80.1938, 0.45, 0.12924);
  Homogenizer hom(mesh, {mat});

  RveSolution sol = hom.initial_solution();
  bool went_plastic = false;
  for (int step = 1; step <= 8; ++step) {
    Mat2 F = Mat2::Identity();
    F(0, 1) = 0.01 * step;
    sol = hom.solve(F, &sol);
    CHECK((sol.macro.P - sol.macro.P_volavg).norm() /
              std::max(1.0, sol.macro.P.norm()) <
          1e-8);
    if (sol.macro.plastic) {
      went_plastic = true;
      CHECK(sol.macro.max_yield_residual < 1e-10 * 0.45);
      CHECK(sol.macro.max_detCi_drift < 1e-8);
    }
  }
  CHECK(went_plastic);

  // A homogeneous plastic state still reproduces the material point.
  const PointResponse pt = [&] {
    PointState s{};
    PointResponse r;
    for (int step = 1; step <= 8; ++step) {
      Mat2 F = Mat2::Identity();
      F(0, 1) = 0.01 * step;
      r = evaluate(mat, F, s);
      s = r.state;
    }
    return r;
  }();
  CHECK((sol.macro.P - pt.P).norm() / std::max(1.0, pt.P.norm()) < 1e-8);
}

TEST_CASE("Newton failure diagnostics") {
  const RveMesh mesh = hole_cell(0.3, Vec2(1, 0), Vec2(0, 1), 6, 3);
  SolveOptions opts;
  opts.max_bisections = 1;
  Homogenizer hom(mesh, {Material::neo_hookean(166.67, 35.71)}, opts);
  Mat2 Fbar;
  Fbar << -0.5, 0.0, 0.0, 1.0;  // orientation-reversing target: must fail cleanly
  CHECK_THROWS_AS(hom.solve(Fbar), SolverError);
}

TEST_CASE("mixed-element tangent is consistent on an inhomogeneous mesh") {
  // A void forces a nonzero fluctuation, exercising the condensed Q9P3
  // tangent away from homogeneous states (where the projection is exact).
  const RveMesh mesh =
      promote_to_q9(hole_cell(0.3, Vec2(1, 0), Vec2(0, 1), 3, 2, 1.2));
  const std::vector<Material> mats = {Material::neo_hookean(17.5, 8.0)};
  const int n = mesh.num_dofs();

  std::mt19937 rng(5);
  std::normal_distribution<double> g(0.0, 0.002);
  VecX u(n);
  for (int i = 0; i < n; ++i) u(i) = g(rng);

  // The pressure-projected residual is not the gradient of a potential, so
  // its exact Jacobian has a nonsymmetric part; the assembled tangent must
  // match the symmetrized finite-difference Jacobian.
  const auto base = assemble(mesh, u, make_initial_states(mesh), mats, true, 1);
  const MatX K = MatX(base.K_T);
  MatX J(n, n);
  const double h = 1e-6;
  for (int j = 0; j < n; ++j) {
    VecX up = u, um = u;
    up(j) += h;
    um(j) -= h;
    const auto ap = assemble(mesh, up, make_initial_states(mesh), mats, false, 1);
    const auto am = assemble(mesh, um, make_initial_states(mesh), mats, false, 1);
    J.col(j) = (ap.F_int - am.F_int) / (2 * h);
  }
  CHECK((0.5 * (J + J.transpose()) - K).norm() / K.norm() < 1e-7);

  // The tangent at the stress-free state is positive semidefinite: a
  // periodic hole cell supports exactly the two rigid translations.
  const VecX u0 = VecX::Zero(mesh.num_dofs());
  const auto rest = assemble(mesh, u0, make_initial_states(mesh), mats, true, 1);
  BlochOperator op(mesh, rest.K_T);
  BlochOptions free_opts;
  free_opts.fix_translation_at_zero = false;
  free_opts.dense_limit = 1 << 30;
  const VecX s = op.spectrum({0.0, 0.0}, free_opts);
  CHECK(std::abs(s(0)) < 1e-10);
  CHECK(std::abs(s(1)) < 1e-10);
  CHECK(s(2) > 0.1);
}
