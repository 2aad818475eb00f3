#include <benchmark/benchmark.h>

#include "microstab/bloch.hpp"
#include "microstab/homogenize.hpp"
#include "microstab/meshgen.hpp"
#include "microstab/rank1.hpp"

using namespace microstab;

namespace {

RveMesh bench_mesh(int n_side) {
  return hole_cell(0.3, Vec2(1, 0), Vec2(0, 1), n_side, n_side / 2, 1.2);
}

void bm_assemble(benchmark::State& state) {
  const RveMesh mesh = bench_mesh(static_cast<int>(state.range(0)));
  const std::vector<Material> mats = {Material::neo_hookean(166.67, 35.71)};
  Homogenizer hom(mesh, mats);
  const RveSolution sol = hom.initial_solution();
  VecX u = sol.u;
  for (auto _ : state) {
    const AssembledSystem sys =
        assemble(mesh, u, sol.states, mats, true, 1);
    benchmark::DoNotOptimize(sys.energy);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(mesh.elements.size()));
}
BENCHMARK(bm_assemble)->Arg(16)->Arg(32);

void bm_homogenize(benchmark::State& state) {
  const RveMesh mesh = bench_mesh(static_cast<int>(state.range(0)));
  const std::vector<Material> mats = {Material::neo_hookean(166.67, 35.71)};
  Homogenizer hom(mesh, mats);
  Mat2 F;
  F << 1.05, 0.0, 0.0, 0.98;
  for (auto _ : state) {
    const RveSolution sol = hom.solve(F);
    benchmark::DoNotOptimize(sol.macro.psi);
  }
}
BENCHMARK(bm_homogenize)->Arg(16)->Arg(24);

void bm_bloch_point(benchmark::State& state) {
  const RveMesh mesh = bench_mesh(16);
  const std::vector<Material> mats = {Material::neo_hookean(166.67, 35.71)};
  Homogenizer hom(mesh, mats);
  Mat2 F;
  F << 1.0, 0.0, 0.0, 0.95;
  const RveSolution sol = hom.solve(F);
  const BlochOperator op(mesh, sol.K_T);
  BlochOptions o;
  o.method = state.range(0) == 0 ? BlochMethod::cond2 : BlochMethod::nullspace;
  double k = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(op.beta({k, 0.37}, o));
    k = k < 0.9 ? k + 0.01 : 0.1;
  }
}
BENCHMARK(bm_bloch_point)->Arg(0)->Arg(1);

void bm_rank1(benchmark::State& state) {
  Mat4 A = Mat4::Random();
  A = (A + A.transpose()).eval();
  A += 8.0 * Mat4::Identity();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rank1_indicator(A).B);
  }
}
BENCHMARK(bm_rank1);

}  // namespace

BENCHMARK_MAIN();
