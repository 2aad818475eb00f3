#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "microstab/mesh.hpp"
#include "microstab/meshgen.hpp"

using namespace microstab;

namespace {
constexpr double kPi = std::numbers::pi;

RveMesh hexagon_three_rhombi() {
  // Regular hexagon (corner radius 1) split into three rhombi around the
  // center; hexagonal lattice translations a1, a2 tile the plane with it.
  RveMesh m;
  m.nodes.push_back(Vec2::Zero());
  for (int k = 0; k < 6; ++k)
    m.nodes.push_back(Vec2(std::cos(kPi / 3 * k), std::sin(kPi / 3 * k)));
  for (int r = 0; r < 3; ++r) {
    Element e;
    e.conn = {0, 1 + 2 * r, 1 + (2 * r + 1) % 6, 1 + (2 * r + 2) % 6};
    m.elements.push_back(e);
  }
  const double s3 = std::sqrt(3.0);
  m.lattice = make_lattice(Vec2(1.5, s3 / 2), Vec2(0.0, s3));
  m.fixed_node = 0;
  m.pairing = build_pairing(m);
  return m;
}
}  // namespace

TEST_CASE("reciprocal basis duality") {
  SUBCASE("unit square") {
    auto [b1, b2] = reciprocal_basis(Vec2(1, 0), Vec2(0, 1));
    CHECK(b1.x() == doctest::Approx(2 * kPi).epsilon(1e-14));
    CHECK(b1.y() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(b2.x() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(b2.y() == doctest::Approx(2 * kPi).epsilon(1e-14));
  }
  SUBCASE("60-degree rhombic lattice") {
    const Vec2 a1(1, 0), a2(0.5, std::sqrt(3.0) / 2);
    const LatticeSpec lat = make_lattice(a1, a2);
    CHECK(lat.a1.dot(lat.b1) == doctest::Approx(2 * kPi).epsilon(1e-14));
    CHECK(lat.a1.dot(lat.b2) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(lat.a2.dot(lat.b1) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(lat.a2.dot(lat.b2) == doctest::Approx(2 * kPi).epsilon(1e-14));
    CHECK(lat.duality_residual() < 1e-14);
  }
  SUBCASE("degenerate basis throws") {
    CHECK_THROWS_AS(reciprocal_basis(Vec2(1, 0), Vec2(2, 0)), MeshError);
  }
  SUBCASE("lattice coordinates invert the basis") {
    const LatticeSpec lat = make_lattice(Vec2(1.3, 0.2), Vec2(-0.4, 0.9));
    const Vec2 x = 0.37 * lat.a1 - 1.21 * lat.a2;
    const Vec2 st = lat.lattice_coords(x);
    CHECK(st.x() == doctest::Approx(0.37).epsilon(1e-12));
    CHECK(st.y() == doctest::Approx(-1.21).epsilon(1e-12));
  }
}

TEST_CASE("pairing counts") {
  SUBCASE("single square element has m = 3") {
    const RveMesh m = structured_cell(1, 1, Vec2(1, 0), Vec2(0, 1));
    CHECK(m.num_pairs() == 3);
  }
  SUBCASE("n x n node grid has m = 2(n-2) + 3") {
    for (int ne : {2, 3, 5, 8}) {
      const RveMesh m = structured_cell(ne, ne, Vec2(1, 0), Vec2(0, 1));
      const int n = ne + 1;  // nodes per side
      CHECK(m.num_pairs() == 2 * (n - 2) + 3);
    }
  }
  SUBCASE("quadratic promotion keeps corner structure") {
    const RveMesh m = promote_to_q9(structured_cell(3, 3, Vec2(1, 0), Vec2(0, 1)));
    // 6x6 nodal grid on the boundary: m = 2*(7-2) + 3 with edge nodes counted.
    CHECK(m.num_pairs() == 2 * (7 - 2) + 3);
  }
  SUBCASE("hexagon cell has four corner pairs") {
    const RveMesh m = hexagon_three_rhombi();
    CHECK(m.num_pairs() == 4);
    int corner_pairs = 0;
    for (const NodePair& p : m.pairing)
      if (std::abs(p.c1) + std::abs(p.c2) > 1) ++corner_pairs;
    // All hexagon-corner constraints involve combined translations or are
    // chained through a single class representative: 4 pairs total across
    // exactly two corner classes.
    CHECK(m.num_pairs() == 4);
    CHECK(corner_pairs >= 1);
    for (const NodePair& p : m.pairing) {
      const Vec2 L = p.c1 * m.lattice.a1 + p.c2 * m.lattice.a2;
      CHECK((m.nodes[p.pos] - m.nodes[p.neg] - L).norm() < 1e-12);
    }
  }
}

TEST_CASE("constraint operators") {
  const RveMesh m = structured_cell(4, 4, Vec2(1, 0), Vec2(0.2, 1.1));
  const ConstraintOperators ops = assemble_constraints(m);
  const int N = m.num_dofs();
  REQUIRE(ops.A1.rows() == 2);
  REQUIRE(ops.A2.rows() == 2 * m.num_pairs());
  REQUIRE(ops.A2.cols() == N);

  SUBCASE("[A1; A2] has full row rank") {
    MatX A = MatX::Zero(2 + 2 * m.num_pairs(), N);
    A.topRows(2) = MatX(ops.A1);
    A.bottomRows(2 * m.num_pairs()) = MatX(ops.A2);
    Eigen::ColPivHouseholderQR<MatX> qr(A.transpose());
    CHECK(qr.rank() == A.rows());
  }

  SUBCASE("rigid translation is periodic: A2 t = 0") {
    VecX t = VecX::Zero(N);
    for (int n = 0; n < m.num_nodes(); ++n) {
      t(2 * n) = 0.7;
      t(2 * n + 1) = -1.3;
    }
    CHECK((ops.A2 * t).norm() < 1e-12);
  }

  SUBCASE("affine field satisfies the jump relation") {
    Mat2 Fbar;
    Fbar << 1.2, 0.1, -0.05, 0.9;
    VecX u = VecX::Zero(N);
    for (int n = 0; n < m.num_nodes(); ++n)
      u.segment<2>(2 * n) = (Fbar - Mat2::Identity()) * m.nodes[n];
    const VecX h = ops.L_M * tensor_to_vec4(Fbar - Mat2::Identity());
    CHECK((ops.A2 * u - h).norm() < 1e-12);
  }
}

TEST_CASE("tiling") {
  const RveMesh unit = structured_cell(3, 3, Vec2(1, 0), Vec2(0, 1));
  const RveMesh t22 = tile_mesh(unit, 2, 2);
  CHECK(t22.lattice.cell_area() == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(t22.elements.size() == 4 * unit.elements.size());
  CHECK(t22.volume() == doctest::Approx(4.0 * unit.volume()).epsilon(1e-12));
  CHECK(t22.num_nodes() == 7 * 7);  // merged interfaces
  CHECK(t22.num_pairs() == 2 * (7 - 2) + 3);
}

TEST_CASE("mesh file round trip") {
  const RveMesh m = hole_cell(0.3, Vec2(1, 0), Vec2(0, 1), 8, 4, 1.2);
  std::ostringstream out;
  write_mesh_file(out, m);
  std::istringstream in(out.str());
  const RveMesh r = read_mesh_file(in);
  REQUIRE(r.num_nodes() == m.num_nodes());
  REQUIRE(r.elements.size() == m.elements.size());
  CHECK(r.num_pairs() == m.num_pairs());
  CHECK(r.fixed_node == m.fixed_node);
  double dmax = 0;
  for (int n = 0; n < m.num_nodes(); ++n)
    dmax = std::max(dmax, (r.nodes[n] - m.nodes[n]).norm());
  CHECK(dmax == 0.0);  // 17 significant digits round-trip exactly
  for (size_t e = 0; e < m.elements.size(); ++e) {
    CHECK(r.elements[e].conn == m.elements[e].conn);
    CHECK(r.elements[e].material == m.elements[e].material);
  }
}

TEST_CASE("mesh file errors carry line numbers") {
  std::istringstream bad("NODES 2\n0 0.0 0.0\n1 1.0 zz\n");
  CHECK_THROWS_AS(read_mesh_file(bad), MeshError);
}

TEST_CASE("generated cells are periodic and positively oriented") {
  auto check_mesh = [](const RveMesh& m) {
    REQUIRE(m.num_nodes() > 0);
    REQUIRE(!m.elements.empty());
    REQUIRE(m.num_pairs() > 0);
    for (const NodePair& p : m.pairing) {
      const Vec2 L = p.c1 * m.lattice.a1 + p.c2 * m.lattice.a2;
      CHECK((m.nodes[p.pos] - m.nodes[p.neg] - L).norm() < 1e-10);
    }
    for (const Element& e : m.elements) {
      double area2 = 0;
      const int nn = 4;  // shoelace over corners
      for (int a = 0; a < nn; ++a) {
        const Vec2& p = m.nodes[e.conn[a]];
        const Vec2& q = m.nodes[e.conn[(a + 1) % nn]];
        area2 += p.x() * q.y() - q.x() * p.y();
      }
      CHECK(area2 > 0);
    }
  };
  check_mesh(hole_cell(0.4, Vec2(1, 0), Vec2(0, 1), 12, 6, 1.3));
  check_mesh(square_void_cell(0.35, 0.0, Vec2(1, 0), Vec2(0, 1), 12, 6));
  check_mesh(inclusion_cell(0.25, Vec2(1, 0), Vec2(0, 1), 12, 6, 3));
  check_mesh(multi_feature_cell(24, 0.3));
  check_mesh(cross_bar_cell(24, 0.35, 0.08));
  check_mesh(hole_cell(0.3, Vec2(1, 0), Vec2(1, 1), 10, 5));  // parallelogram
}

TEST_CASE("hole cell area equals cell minus disk") {
  const RveMesh m = hole_cell(0.3, Vec2(1, 0), Vec2(0, 1), 48, 24, 1.1);
  double area = 0;
  for (const Element& e : m.elements) {
    double a2 = 0;
    for (int a = 0; a < 4; ++a) {
      const Vec2& p = m.nodes[e.conn[a]];
      const Vec2& q = m.nodes[e.conn[(a + 1) % 4]];
      a2 += p.x() * q.y() - q.x() * p.y();
    }
    area += 0.5 * a2;
  }
  CHECK(area == doctest::Approx(1.0 - kPi * 0.09).epsilon(2e-3));
  CHECK(m.volume() == doctest::Approx(1.0).epsilon(1e-14));  // voids included
}
