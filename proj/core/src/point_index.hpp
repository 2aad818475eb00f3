#pragma once

#include <cmath>
#include <unordered_map>
#include <utility>
#include <vector>

#include "microstab/types.hpp"

namespace microstab::detail {

// Spatial hash for tolerance-based point lookup.
class PointIndex {
 public:
  explicit PointIndex(double cell) : cell_(cell) {}

  void insert(const Vec2& p, int id) { grid_[key(p)].push_back({p, id}); }

  int find(const Vec2& p, double tol) const {
    const auto [gx, gy] = cellof(p);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy) {
        auto it = grid_.find(pack(gx + dx, gy + dy));
        if (it == grid_.end()) continue;
        for (const auto& [q, id] : it->second)
          if ((q - p).norm() <= tol) return id;
      }
    return -1;
  }

 private:
  std::pair<long long, long long> cellof(const Vec2& p) const {
    return {static_cast<long long>(std::floor(p.x() / cell_)),
            static_cast<long long>(std::floor(p.y() / cell_))};
  }
  static long long pack(long long x, long long y) {
    return x * 73856093LL ^ y * 19349669LL;
  }
  long long key(const Vec2& p) const {
    auto [x, y] = cellof(p);
    return pack(x, y);
  }
  double cell_;
  std::unordered_map<long long, std::vector<std::pair<Vec2, int>>> grid_;
};

}  // namespace microstab::detail
