#include "microstab/assembly.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace microstab {

ElementStates make_initial_states(const RveMesh& mesh) {
  ElementStates states(mesh.elements.size());
  for (size_t e = 0; e < mesh.elements.size(); ++e)
    states[e].resize(quad_points_per_element(mesh.elements[e].kind));
  return states;
}

AssembledSystem assemble(const RveMesh& mesh, const VecX& u,
                         const ElementStates& states,
                         const std::vector<Material>& materials,
                         bool need_tangent, int threads) {
  const int ne = static_cast<int>(mesh.elements.size());
  const int N = mesh.num_dofs();
  if (u.size() != N) throw SolverError("displacement vector size mismatch");
  if (static_cast<int>(states.size()) != ne)
    throw SolverError("state container size mismatch");
  for (const auto& el : mesh.elements)
    if (el.material < 0 || el.material >= static_cast<int>(materials.size()))
      throw MaterialError("element references unknown material id");

  std::vector<ElementResponse> responses(ne);
  threads = std::max(1, threads);
  if (threads == 1 || ne < 2 * threads) {
    for (int e = 0; e < ne; ++e)
      responses[e] = element_response(mesh, e, u, materials[mesh.elements[e].material],
                                      states[e], need_tangent);
  } else {
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr err;
    auto worker = [&] {
      try {
        for (int e = next.fetch_add(1); e < ne; e = next.fetch_add(1))
          responses[e] = element_response(mesh, e, u, materials[mesh.elements[e].material],
                                          states[e], need_tangent);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
  }

  AssembledSystem sys;
  sys.F_int = VecX::Zero(N);
  sys.new_states.resize(ne);
  std::vector<Triplet> trips;
  if (need_tangent) {
    size_t nnz = 0;
    for (const auto& r : responses) nnz += r.k.size();
    trips.reserve(nnz);
  }
  for (int e = 0; e < ne; ++e) {
    const auto& r = responses[e];
    const auto& conn = mesh.elements[e].conn;
    const int nn = static_cast<int>(conn.size());
    for (int a = 0; a < nn; ++a)
      for (int i = 0; i < 2; ++i) {
        const int row = 2 * conn[a] + i;
        sys.F_int(row) += r.f(2 * a + i);
        if (need_tangent)
          for (int b = 0; b < nn; ++b)
            for (int j = 0; j < 2; ++j)
              trips.emplace_back(row, 2 * conn[b] + j, r.k(2 * a + i, 2 * b + j));
      }
    sys.energy += r.energy;
    sys.P_integral += r.P_integral;
    sys.solid_volume += r.volume;
    sys.new_states[e] = r.new_states;
    sys.max_yield_residual = std::max(sys.max_yield_residual, r.max_yield_residual);
    sys.max_detCi_drift = std::max(sys.max_detCi_drift, r.max_detCi_drift);
    sys.plastic = sys.plastic || r.plastic;
  }
  if (need_tangent) {
    sys.K_T.resize(N, N);
    sys.K_T.setFromTriplets(trips.begin(), trips.end());
    sys.K_T.makeCompressed();
  }
  return sys;
}

}  // namespace microstab
