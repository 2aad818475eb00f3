#include "microstab/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace microstab {

namespace {

struct StabilityEval {
  SweepResult sweep;
  double B = std::numeric_limits<double>::infinity();
  double min_all = 0;
};

double min_all_of(const SweepResult& s) {
  return std::min({s.beta_min, s.beta_origin, s.beta_near_origin});
}

StabilityEval evaluate_stability(const RveMesh& mesh, const RveSolution& sol,
                                 const PathOptions& opts, const SpMat* metric) {
  StabilityEval ev;
  BlochOperator op(mesh, sol.K_T, metric);
  ev.sweep = sweep_beta(op, opts.sweep);
  if (opts.with_rank1) ev.B = rank1_indicator(sol.macro.A, opts.rank1).B;
  ev.min_all = min_all_of(ev.sweep);
  return ev;
}

double dist_to_origin(const WaveVector& k) {
  auto d1 = [](double x) {
    const double d = std::abs(x);
    return std::min(d, 1.0 - d);
  };
  return std::hypot(d1(k.k1), d1(k.k2));
}

}  // namespace

Mat2 path_deformation(const LoadPath& path, double lambda) {
  Mat2 S = Mat2::Identity();
  S(0, 0) = 1.0 + path.c1 * (lambda - 1.0);
  S(1, 1) = 1.0 + path.c2 * (lambda - 1.0);
  Mat2 Q;
  const double c = std::cos(path.theta), s = std::sin(path.theta);
  Q << c, -s, s, c;
  return Q * S * Q.transpose();
}

const char* to_string(WavelengthClass c) {
  switch (c) {
    case WavelengthClass::cell_periodic: return "cell_periodic";
    case WavelengthClass::finite: return "finite";
    case WavelengthClass::long_wavelength: return "long_wavelength";
    case WavelengthClass::tie: return "tie";
  }
  return "?";
}

WavelengthClass classify(const SweepResult& s, double B, bool b_crossed,
                         double tol_rel) {
  double beta_max = s.beta_origin;
  for (const SweepPoint& p : s.surface) beta_max = std::max(beta_max, p.beta);
  const double min_all = min_all_of(s);
  const double tol = tol_rel * std::max(beta_max - min_all, 1e-300);

  const bool origin_is_min = s.beta_origin <= min_all + tol;
  const bool near_is_min = s.beta_near_origin <= min_all + tol;
  const bool origin_continuous =
      std::abs(s.beta_origin - s.beta_near_origin) <= tol;
  const bool separate_grid_min =
      s.beta_min <= min_all + tol && dist_to_origin(s.k_min) > 0.05;

  if (origin_is_min && separate_grid_min) return WavelengthClass::tie;
  if (origin_is_min && origin_continuous) return WavelengthClass::cell_periodic;
  if (origin_is_min) return WavelengthClass::cell_periodic;
  if (near_is_min && !origin_is_min && (b_crossed || B <= tol))
    return WavelengthClass::long_wavelength;
  return WavelengthClass::finite;
}

PathResult run_path(const RveMesh& mesh, const std::vector<Material>& materials,
                    const LoadPath& path, const PathOptions& opts) {
  if (path.lambda_step == 0) throw ConfigError("load path step must be nonzero");
  const double dir = path.lambda_step > 0 ? 1.0 : -1.0;
  if (dir * (path.lambda_end - path.lambda_start) <= 0)
    throw ConfigError("load path schedule is not monotone toward lambda_end");

  PathOptions o = opts;
  if (o.with_rank1) o.solve.compute_tangent = true;
  Homogenizer hom(mesh, materials, o.solve);

  const bool need_metric = o.sweep.prefilter.norm == BlochNorm::gradient ||
                           o.sweep.eval.norm == BlochNorm::gradient;
  SpMat metric;
  if (need_metric) metric = gradient_metric(mesh);
  const SpMat* metric_ptr = need_metric ? &metric : nullptr;

  auto solve_at = [&](double lam, const RveSolution& warm) -> RveSolution {
    if (path.control == LoadControl::strain_driven)
      return hom.solve(path_deformation(path, lam), &warm);
    StressTarget t{path.theta, path.phi, lam};
    return solve_stress_driven(hom, t, &warm, o.stress).rve;
  };

  auto record_of = [&](double lam, const RveSolution& sol,
                       const StabilityEval& ev) {
    StepRecord r;
    r.lambda = lam;
    r.Fbar = sol.macro.Fbar;
    r.Pbar = sol.macro.P;
    r.psi = sol.macro.psi;
    r.beta_min = ev.sweep.beta_min;
    r.k_min = ev.sweep.k_min;
    r.beta_origin = ev.sweep.beta_origin;
    r.beta_near_origin = ev.sweep.beta_near_origin;
    r.B = ev.B;
    r.newton_iters = sol.macro.newton_iters;
    r.plastic = sol.macro.plastic;
    r.stable = ev.min_all > 0 && (!o.with_rank1 || ev.B > 0);
    return r;
  };

  PathResult out;
  RveSolution committed = hom.initial_solution();
  double lambda_stable = path.lambda_start;
  bool have_stable = false;

  RveSolution sol_unstable;
  StabilityEval ev_unstable;
  double lambda_unstable = 0;
  double B_stable = std::numeric_limits<double>::infinity();
  bool hit_unstable = false;

  const int check = std::max(1, o.check_interval);
  const double span = std::abs(path.lambda_end - path.lambda_start);
  const int nsteps = static_cast<int>(
      std::ceil(span / std::abs(path.lambda_step) - 1e-12));

  for (int step = 0; step <= nsteps; ++step) {
    const double lam =
        step == nsteps ? path.lambda_end
                       : path.lambda_start + step * path.lambda_step;
    RveSolution sol;
    try {
      sol = solve_at(lam, committed);
    } catch (const SolverError& e) {
      out.report.found = false;
      out.report.message =
          "equilibrium failure before instability at lambda = " +
          std::to_string(lam) + ": " + e.what();
      return out;
    }

    const bool scheduled = step % check == 0 || step == nsteps;
    if (!scheduled) {
      // Cheap monitor between full sweeps: the previous argmin and the
      // origin-limit probes only.
      StabilityEval ev;
      BlochOperator op(mesh, sol.K_T, metric_ptr);
      ev.sweep.k_min = out.history.empty() ? WaveVector{0.5, 0.0}
                                           : out.history.back().k_min;
      ev.sweep.beta_min = op.beta(ev.sweep.k_min, o.sweep.eval);
      ev.sweep.beta_origin = op.beta({0.0, 0.0}, o.sweep.eval);
      ev.sweep.beta_near_origin =
          op.beta({o.sweep.zone / 2, o.sweep.zone / 2}, o.sweep.eval);
      if (o.with_rank1) ev.B = rank1_indicator(sol.macro.A, o.rank1).B;
      ev.min_all = min_all_of(ev.sweep);
      if (ev.min_all > 0 && (!o.with_rank1 || ev.B > 0)) {
        out.history.push_back(record_of(lam, sol, ev));
        committed = sol;
        lambda_stable = lam;
        have_stable = true;
        B_stable = ev.B;
        continue;
      }
      // Suspicious: fall through to a full sweep at this step.
    }

    StabilityEval ev = evaluate_stability(mesh, sol, o, metric_ptr);
    out.history.push_back(record_of(lam, sol, ev));

    if (ev.min_all > 0 && (!o.with_rank1 || ev.B > 0)) {
      committed = sol;
      lambda_stable = lam;
      have_stable = true;
      B_stable = ev.B;
      continue;
    }

    hit_unstable = true;
    sol_unstable = sol;
    ev_unstable = ev;
    lambda_unstable = lam;
    break;
  }

  BifurcationReport& rep = out.report;
  if (!hit_unstable) {
    rep.found = false;
    rep.message = "no bifurcation found up to lambda = " +
                  std::to_string(path.lambda_end);
    return out;
  }

  if (!have_stable) {
    rep.found = true;
    rep.message = "unstable at the start of the load path";
    rep.lambda_c = rep.lambda_stable = rep.lambda_unstable = lambda_unstable;
  } else {
    double lo = lambda_stable, hi = lambda_unstable;
    double B_lo = B_stable;
    while (std::abs(hi - lo) > path.bisect_tol) {
      const double mid = 0.5 * (lo + hi);
      RveSolution sol_m;
      try {
        sol_m = solve_at(mid, committed);
      } catch (const SolverError&) {
        // Treat a failed probe as unstable: tighten from above.
        hi = mid;
        continue;
      }
      StabilityEval ev_m = evaluate_stability(mesh, sol_m, o, metric_ptr);
      out.history.push_back(record_of(mid, sol_m, ev_m));
      if (ev_m.min_all > 0 && (!o.with_rank1 || ev_m.B > 0)) {
        committed = sol_m;
        lo = mid;
        B_lo = ev_m.B;
      } else {
        hi = mid;
        sol_unstable = sol_m;
        ev_unstable = ev_m;
      }
    }
    rep.found = true;
    rep.lambda_stable = lo;
    rep.lambda_unstable = hi;
    rep.lambda_c = 0.5 * (lo + hi);
    rep.B_crossed_in_bracket =
        o.with_rank1 && B_lo > 0 && ev_unstable.B <= 0;
    B_stable = B_lo;
  }

  out.critical_sweep = ev_unstable.sweep;
  rep.beta_at_critical = ev_unstable.min_all;
  rep.B_at_critical = ev_unstable.B;
  rep.critical_k = ev_unstable.sweep.minimizers;
  rep.multiplicity = ev_unstable.sweep.multiplicity;
  rep.wave_class = classify(ev_unstable.sweep, ev_unstable.B,
                            rep.B_crossed_in_bracket, o.class_tol_rel);

  BlochOperator op(mesh, sol_unstable.K_T, metric_ptr);
  const int nm = std::min<int>(o.max_modes, rep.critical_k.size());
  for (int j = 0; j < nm; ++j) {
    VecXc mode;
    op.beta(rep.critical_k[j], o.sweep.eval, &mode);
    rep.real_modes.push_back(recover_real_mode(mode));
  }
  return out;
}

}  // namespace microstab
