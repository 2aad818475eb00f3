#include "microstab/rank1.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace microstab {

namespace {

constexpr double kPi = 3.14159265358979323846;

Mat2 acoustic_tensor(const Mat4& A, const Vec2& M) {
  Mat2 Q;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) {
      double s = 0;
      for (int J = 0; J < 2; ++J)
        for (int L = 0; L < 2; ++L)
          s += A(voigt4(i, J), voigt4(k, L)) * M(J) * M(L);
      Q(i, k) = s;
    }
  return Q;
}

// min_m m.Q.m over unit m, and the minimizer, via the symmetric part of Q.
std::pair<double, Vec2> inner_min(const Mat2& Q, const Rank1Options& opts) {
  if (opts.grid_inner) {
    double best = std::numeric_limits<double>::max();
    Vec2 bm = Vec2::UnitX();
    for (int i = 0; i < opts.inner_steps; ++i) {
      const double t = kPi * i / opts.inner_steps;
      const Vec2 m(std::cos(t), std::sin(t));
      const double v = m.dot(Q * m);
      if (v < best) {
        best = v;
        bm = m;
      }
    }
    return {best, bm};
  }
  const Mat2 S = 0.5 * (Q + Q.transpose());
  const double tr = S.trace();
  const double d = std::sqrt(std::pow(S(0, 0) - S(1, 1), 2) + 4 * S(0, 1) * S(0, 1));
  const double lam = 0.5 * (tr - d);
  Vec2 m;
  if (std::abs(S(0, 1)) > 1e-14 * (std::abs(tr) + d)) {
    m = Vec2(lam - S(1, 1), S(0, 1)).normalized();
  } else {
    m = S(0, 0) <= S(1, 1) ? Vec2::UnitX() : Vec2::UnitY();
  }
  return {lam, m};
}

}  // namespace

Rank1Result rank1_indicator(const Mat4& A, const Rank1Options& opts) {
  auto eval = [&](double alpha) {
    const Vec2 M(std::cos(alpha), std::sin(alpha));
    return inner_min(acoustic_tensor(A, M), opts).first;
  };

  double best_alpha = 0;
  double best = std::numeric_limits<double>::max();
  const int n = std::max(4, static_cast<int>(std::ceil(kPi / opts.angle_step)));
  for (int i = 0; i < n; ++i) {
    const double a = kPi * i / n;
    const double v = eval(a);
    if (v < best) {
      best = v;
      best_alpha = a;
    }
  }
  // Shrinking local grid around the best coarse angle.
  double half = kPi / n;
  for (int round = 0; round < opts.refine_rounds; ++round) {
    const double lo = best_alpha - half, hi = best_alpha + half;
    for (int i = 0; i <= 20; ++i) {
      const double a = lo + (hi - lo) * i / 20.0;
      const double v = eval(a);
      if (v < best) {
        best = v;
        best_alpha = a;
      }
    }
    half /= 10.0;
  }

  Rank1Result r;
  r.alpha = best_alpha;
  r.M = Vec2(std::cos(best_alpha), std::sin(best_alpha));
  const auto [lam, m] = inner_min(acoustic_tensor(A, r.M), opts);
  r.B = lam;
  r.m = m;
  return r;
}

}  // namespace microstab
