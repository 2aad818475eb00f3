#include <chrono>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <thread>

#include <CLI11.hpp>

#include "microstab/config.hpp"
#include "microstab/continuation.hpp"
#include "microstab/meshgen.hpp"
#include "microstab/runio.hpp"

namespace ms = microstab;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

ms::Vec2 get_vec2(const ms::Config& cfg, const std::string& sec,
                  const std::string& key, const ms::Vec2& fallback) {
  if (!cfg.has(sec, key)) return fallback;
  const std::vector<double> v = cfg.get_list(sec, key);
  if (v.size() != 2)
    throw ms::ConfigError("[" + sec + "] " + key + ": expected two components");
  return ms::Vec2(v[0], v[1]);
}

ms::RveMesh build_mesh(const ms::Config& cfg) {
  const std::string sec = "mesh";
  ms::RveMesh mesh;
  if (cfg.has(sec, "file")) {
    mesh = ms::read_mesh_file(cfg.get(sec, "file"));
  } else {
    const std::string gen = cfg.get(sec, "generator");
    const ms::Vec2 a1 = get_vec2(cfg, sec, "a1", ms::Vec2(1, 0));
    const ms::Vec2 a2 = get_vec2(cfg, sec, "a2", ms::Vec2(0, 1));
    const int n_side = static_cast<int>(cfg.get_int_or(sec, "n_side", 24));
    const int n_rad = static_cast<int>(cfg.get_int_or(sec, "n_rad", 10));
    const double grading = cfg.get_double_or(sec, "grading", 1.0);
    if (gen == "structured") {
      mesh = ms::structured_cell(static_cast<int>(cfg.get_int(sec, "nx")),
                                 static_cast<int>(cfg.get_int(sec, "ny")), a1, a2);
    } else if (gen == "hole") {
      mesh = ms::hole_cell(cfg.get_double(sec, "radius"), a1, a2, n_side, n_rad,
                           grading);
    } else if (gen == "square_void") {
      mesh = ms::square_void_cell(cfg.get_double(sec, "half_diag"),
                                  cfg.get_double_or(sec, "rot_deg", 0.0) * kDeg,
                                  a1, a2, n_side, n_rad, grading);
    } else if (gen == "inclusion") {
      mesh = ms::inclusion_cell(cfg.get_double(sec, "radius"), a1, a2, n_side,
                                n_rad,
                                static_cast<int>(cfg.get_int_or(sec, "n_core", 4)),
                                grading);
    } else if (gen == "multi_feature") {
      mesh = ms::multi_feature_cell(static_cast<int>(cfg.get_int_or(sec, "n", 32)),
                                    cfg.get_double_or(sec, "d", 0.3));
    } else if (gen == "cross_bar") {
      mesh = ms::cross_bar_cell(static_cast<int>(cfg.get_int_or(sec, "n", 32)),
                                cfg.get_double(sec, "radius"),
                                cfg.get_double(sec, "bar_halfwidth"));
    } else {
      throw ms::ConfigError("unknown mesh generator: " + gen);
    }
  }
  const int tx = static_cast<int>(cfg.get_int_or(sec, "tiles_x", 1));
  const int ty = static_cast<int>(cfg.get_int_or(sec, "tiles_y", 1));
  if (tx != 1 || ty != 1) mesh = ms::tile_mesh(mesh, tx, ty);
  if (cfg.get_bool_or(sec, "quadratic", false)) mesh = ms::promote_to_q9(mesh);
  return mesh;
}

std::vector<ms::Material> build_materials(const ms::Config& cfg) {
  std::vector<ms::Material> mats;
  for (int id = 0;; ++id) {
    const std::string sec = "material." + std::to_string(id);
    if (!cfg.has_section(sec)) break;
    const std::string model = cfg.get_or(sec, "model", "neo_hookean");
    if (model == "neo_hookean") {
      mats.push_back(ms::Material::neo_hookean(cfg.get_double(sec, "kappa"),
                                               cfg.get_double(sec, "mu")));
    } else if (model == "j2_plasticity") {
      mats.push_back(ms::Material::j2_plastic(
          cfg.get_double(sec, "kappa"), cfg.get_double(sec, "mu"),
          cfg.get_double(sec, "sigma_y"), cfg.get_double_or(sec, "hardening", 0)));
    } else {
      throw ms::MaterialError("unknown material model: " + model);
    }
  }
  if (mats.empty()) throw ms::ConfigError("no [material.N] sections found");
  return mats;
}

ms::SolveOptions build_solve(const ms::Config& cfg, int threads) {
  ms::SolveOptions s;
  s.max_iters = static_cast<int>(cfg.get_int_or("solver", "max_iters", 25));
  s.tol = cfg.get_double_or("solver", "tol", 1e-10);
  s.max_bisections =
      static_cast<int>(cfg.get_int_or("solver", "max_bisections", 12));
  s.threads = threads;
  return s;
}

ms::BlochMethod parse_method(const std::string& s) {
  if (s == "cond1") return ms::BlochMethod::cond1;
  if (s == "cond2") return ms::BlochMethod::cond2;
  if (s == "nullspace") return ms::BlochMethod::nullspace;
  throw ms::ConfigError("unknown Bloch method: " + s);
}

ms::BlochNorm parse_norm(const std::string& s) {
  if (s == "none") return ms::BlochNorm::none;
  if (s == "count") return ms::BlochNorm::count;
  if (s == "gradient") return ms::BlochNorm::gradient;
  throw ms::ConfigError("unknown Bloch normalization: " + s);
}

ms::SweepSpec build_sweep(const ms::Config& cfg, int threads,
                          const std::string& method_override) {
  ms::SweepSpec sw;
  sw.n_main = static_cast<int>(cfg.get_int_or("sweep", "n_main", 20));
  sw.n_zone = static_cast<int>(cfg.get_int_or("sweep", "n_zone", 7));
  sw.zone = cfg.get_double_or("sweep", "zone", 0.01);
  sw.candidates = static_cast<int>(cfg.get_int_or("sweep", "candidates", 8));
  sw.merge_tol = cfg.get_double_or("sweep", "merge_tol", 1e-6);
  sw.prefilter.method = parse_method(cfg.get_or("sweep", "prefilter", "cond2"));
  sw.eval.method = parse_method(cfg.get_or("sweep", "eval", "nullspace"));
  sw.eval.norm = parse_norm(cfg.get_or("sweep", "norm", "none"));
  sw.threads = threads;
  if (!method_override.empty()) {
    sw.eval.method = parse_method(method_override);
    sw.prefilter.method = sw.eval.method;
  }
  return sw;
}

ms::LoadPath build_path(const ms::Config& cfg) {
  ms::LoadPath p;
  const std::string control = cfg.get_or("path", "control", "strain");
  if (control == "strain")
    p.control = ms::LoadControl::strain_driven;
  else if (control == "stress")
    p.control = ms::LoadControl::stress_driven;
  else
    throw ms::ConfigError("unknown path control: " + control);
  p.theta = cfg.get_double_or("path", "theta_deg", 0.0) * kDeg;
  p.c1 = cfg.get_double_or("path", "c1", 0.0);
  p.c2 = cfg.get_double_or("path", "c2", 1.0);
  p.phi = cfg.get_double_or("path", "phi_deg", 0.0) * kDeg;
  p.lambda_start = cfg.get_double_or("path", "lambda_start", 1.0);
  p.lambda_step = cfg.get_double_or("path", "lambda_step", -0.0025);
  p.lambda_end = cfg.get_double_or("path", "lambda_end", 0.8);
  p.bisect_tol = cfg.get_double_or("path", "bisect_tol", 1e-5);
  return p;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::string method;
  int threads = 0;  // 0 = hardware default
  bool deterministic = false;

  int resolved_threads() const {
    if (deterministic) return 1;
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
  }
};

void add_common(CLI::App* sub, CommonArgs& a, bool need_config = true) {
  auto* c = sub->add_option("--config", a.config_path, "configuration file");
  if (need_config) c->required();
  sub->add_option("--out", a.out_dir, "output directory");
  sub->add_option("--threads", a.threads, "worker thread count");
  sub->add_flag("--deterministic", a.deterministic,
                "single-threaded, bit-stable output");
}

fs::path ensure_out(const CommonArgs& a) {
  fs::path dir(a.out_dir);
  fs::create_directories(dir);
  return dir;
}

int cmd_mesh_info(const std::string& mesh_path) {
  const ms::RveMesh mesh = ms::read_mesh_file(mesh_path);
  std::cout << "nodes: " << mesh.num_nodes() << "\n";
  std::cout << "elements: " << mesh.elements.size() << "\n";
  std::cout << "pairs (m): " << mesh.pairing.size() << "\n";
  std::cout << "fixed node: " << mesh.fixed_node << "\n";
  std::cout << "a1 = (" << ms::format_full(mesh.lattice.a1.x()) << ", "
            << ms::format_full(mesh.lattice.a1.y()) << ")\n";
  std::cout << "a2 = (" << ms::format_full(mesh.lattice.a2.x()) << ", "
            << ms::format_full(mesh.lattice.a2.y()) << ")\n";
  std::cout << "cell area: " << ms::format_full(mesh.volume()) << "\n";
  std::cout << "duality residual: "
            << ms::format_full(mesh.lattice.duality_residual()) << "\n";
  std::cout << "corner pairs (|c1| + |c2| > 1):\n";
  for (const ms::NodePair& p : mesh.pairing)
    if (std::abs(p.c1) + std::abs(p.c2) > 1.5)
      std::cout << "  " << p.neg << " -> " << p.pos << "  (c1 = " << p.c1
                << ", c2 = " << p.c2 << ")\n";
  return 0;
}

int cmd_homogenize(const CommonArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  const ms::Config cfg = ms::Config::load(args.config_path);
  const ms::RveMesh mesh = build_mesh(cfg);
  const auto mats = build_materials(cfg);
  const int threads = args.resolved_threads();
  ms::Homogenizer hom(mesh, mats, build_solve(cfg, threads));

  std::vector<double> Fv = cfg.has("load", "F")
                               ? cfg.get_list("load", "F")
                               : std::vector<double>{1, 0, 0, 1};
  if (Fv.size() != 4)
    throw ms::ConfigError("[load] F: expected F11, F12, F21, F22");
  ms::Mat2 Fbar;
  Fbar << Fv[0], Fv[1], Fv[2], Fv[3];

  ms::RveSolution sol;
  const int steps = static_cast<int>(cfg.get_int_or("load", "steps", 1));
  ms::RveSolution warm = hom.initial_solution();
  for (int s = 1; s <= steps; ++s) {
    const ms::Mat2 Fs =
        ms::Mat2::Identity() + (static_cast<double>(s) / steps) *
                                   (Fbar - ms::Mat2::Identity());
    sol = hom.solve(Fs, &warm);
    warm = sol;
  }

  const fs::path out = ensure_out(args);
  ms::RunSummary sum;
  sum.tool = "microstab";
  sum.analysis = "homogenize";
  sum.config_echo = cfg.serialize();
  sum.macro = sol.macro;
  sum.threads = threads;
  sum.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ms::write_run_summary((out / "summary.txt").string(), sum);
  ms::write_csv((out / "macro.csv").string(),
                {"F11", "F22", "F12", "F21", "P11", "P21", "P12", "P22", "psi"},
                {{sol.macro.Fbar(0, 0), sol.macro.Fbar(1, 1),
                  sol.macro.Fbar(0, 1), sol.macro.Fbar(1, 0), sol.macro.P(0),
                  sol.macro.P(1), sol.macro.P(2), sol.macro.P(3),
                  sol.macro.psi}});
  std::vector<std::vector<double>> arow(4, std::vector<double>(4));
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) arow[r][c] = sol.macro.A(r, c);
  ms::write_csv((out / "moduli.csv").string(), {"A_1", "A_2", "A_3", "A_4"},
                arow);
  ms::write_mesh_file((out / "mesh_used.mesh").string(), mesh);
  std::cout << "P (11,21,12,22) = " << ms::format_table(sol.macro.P(0)) << ", "
            << ms::format_table(sol.macro.P(1)) << ", "
            << ms::format_table(sol.macro.P(2)) << ", "
            << ms::format_table(sol.macro.P(3))
            << "  psi = " << ms::format_table(sol.macro.psi) << "\n";
  return 0;
}

int cmd_stress_drive(const CommonArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  const ms::Config cfg = ms::Config::load(args.config_path);
  const ms::RveMesh mesh = build_mesh(cfg);
  const auto mats = build_materials(cfg);
  const int threads = args.resolved_threads();
  ms::Homogenizer hom(mesh, mats, build_solve(cfg, threads));

  ms::StressTarget target;
  target.theta = cfg.get_double_or("stress", "theta_deg", 0.0) * kDeg;
  target.phi = cfg.get_double_or("stress", "phi_deg", 0.0) * kDeg;
  target.lambda = cfg.get_double("stress", "lambda");
  const int steps = static_cast<int>(cfg.get_int_or("stress", "steps", 10));

  ms::StressDriveOptions sopt;
  sopt.tol = cfg.get_double_or("stress", "tol", 1e-9);

  ms::RveSolution warm = hom.initial_solution();
  ms::StressDriveResult res;
  for (int s = 1; s <= steps; ++s) {
    ms::StressTarget t = target;
    t.lambda = target.lambda * s / steps;
    res = ms::solve_stress_driven(hom, t, &warm, sopt);
    warm = res.rve;
  }

  const fs::path out = ensure_out(args);
  ms::RunSummary sum;
  sum.tool = "microstab";
  sum.analysis = "stress-drive";
  sum.config_echo = cfg.serialize();
  sum.macro = res.rve.macro;
  sum.threads = threads;
  sum.extra.emplace_back("stress_residual", ms::format_full(res.residual.norm()));
  sum.extra.emplace_back("outer_iters", std::to_string(res.iters));
  sum.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ms::write_run_summary((out / "summary.txt").string(), sum);
  ms::write_csv((out / "macro.csv").string(),
                {"lambda", "F11", "F22", "F12", "P11", "P21", "P12", "P22"},
                {{target.lambda, res.Fhat(0), res.Fhat(1), res.Fhat(2),
                  res.rve.macro.P(0), res.rve.macro.P(1), res.rve.macro.P(2),
                  res.rve.macro.P(3)}});
  std::cout << "F = (" << ms::format_table(res.Fhat(0)) << ", "
            << ms::format_table(res.Fhat(1)) << ", "
            << ms::format_table(res.Fhat(2)) << ")  residual = "
            << ms::format_full(res.residual.norm()) << "\n";
  return 0;
}

ms::PathOptions build_path_options(const ms::Config& cfg, int threads,
                                   const std::string& method_override) {
  ms::PathOptions po;
  po.solve = build_solve(cfg, threads);
  po.sweep = build_sweep(cfg, threads, method_override);
  po.stress.tol = cfg.get_double_or("stress", "tol", 1e-9);
  po.check_interval =
      static_cast<int>(cfg.get_int_or("stability", "check_interval", 1));
  po.class_tol_rel = cfg.get_double_or("stability", "class_tol_rel", 0.05);
  po.with_rank1 = cfg.get_bool_or("stability", "with_rank1", true);
  po.rank1.angle_step =
      cfg.get_double_or("stability", "rank1_angle_step",
                        std::numbers::pi / 720.0);
  return po;
}

int run_stability_once(const ms::Config& cfg, const CommonArgs& args,
                       const std::string& method, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const ms::RveMesh mesh = build_mesh(cfg);
  const auto mats = build_materials(cfg);
  const int threads = args.resolved_threads();
  const ms::LoadPath path = build_path(cfg);
  const ms::PathOptions po = build_path_options(cfg, threads, method);

  const ms::PathResult res = ms::run_path(mesh, mats, path, po);

  fs::create_directories(out);
  ms::RunSummary sum;
  sum.tool = "microstab";
  sum.analysis = method.empty() ? "stability" : "stability (" + method + ")";
  sum.config_echo = cfg.serialize();
  if (!res.history.empty()) {
    // Macro state of the last committed stable step.
    for (auto it = res.history.rbegin(); it != res.history.rend(); ++it)
      if (it->stable) {
        sum.macro.Fbar = it->Fbar;
        sum.macro.P = it->Pbar;
        sum.macro.psi = it->psi;
        break;
      }
  }
  sum.report = &res.report;
  sum.threads = threads;
  sum.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ms::write_run_summary((out / "summary.txt").string(), sum);
  ms::write_history_csv((out / "history.csv").string(), res.history);
  if (res.critical_sweep)
    ms::write_surface_csv((out / "surface.csv").string(), *res.critical_sweep);
  for (size_t j = 0; j < res.report.real_modes.size(); ++j)
    ms::write_mode_csv((out / ("mode_" + std::to_string(j) + ".csv")).string(),
                       mesh, res.report.real_modes[j]);
  ms::write_mesh_file((out / "mesh_used.mesh").string(), mesh);

  if (res.report.found) {
    std::cout << (method.empty() ? std::string("stability")
                                 : "stability [" + method + "]")
              << ": lambda_c = " << ms::format_full(res.report.lambda_c)
              << "  class = " << ms::to_string(res.report.wave_class)
              << "  multiplicity = " << res.report.multiplicity << "\n";
  } else {
    std::cout << "stability: " << res.report.message << "\n";
  }
  return 0;
}

int cmd_stability(const CommonArgs& args) {
  const ms::Config cfg = ms::Config::load(args.config_path);
  const fs::path out = ensure_out(args);
  if (args.method == "all") {
    for (const std::string m : {"nullspace", "cond1", "cond2"})
      run_stability_once(cfg, args, m, out / m);
    return 0;
  }
  return run_stability_once(cfg, args, args.method, out);
}

int cmd_sweep_compare(const CommonArgs& args) {
  const ms::Config cfg = ms::Config::load(args.config_path);
  const ms::RveMesh mesh = build_mesh(cfg);
  const auto mats = build_materials(cfg);
  const int threads = args.resolved_threads();
  ms::Homogenizer hom(mesh, mats, build_solve(cfg, threads));

  std::vector<double> Fv = cfg.has("load", "F")
                               ? cfg.get_list("load", "F")
                               : std::vector<double>{1, 0, 0, 1};
  if (Fv.size() != 4)
    throw ms::ConfigError("[load] F: expected F11, F12, F21, F22");
  ms::Mat2 Fbar;
  Fbar << Fv[0], Fv[1], Fv[2], Fv[3];
  ms::RveSolution warm = hom.initial_solution();
  const int steps = static_cast<int>(cfg.get_int_or("load", "steps", 5));
  ms::RveSolution sol;
  for (int s = 1; s <= steps; ++s) {
    const ms::Mat2 Fs =
        ms::Mat2::Identity() + (static_cast<double>(s) / steps) *
                                   (Fbar - ms::Mat2::Identity());
    sol = hom.solve(Fs, &warm);
    warm = sol;
  }

  ms::BlochOperator op(mesh, sol.K_T);
  const ms::SweepSpec sw = build_sweep(cfg, threads, "");
  const int n = sw.n_main;
  std::vector<std::vector<double>> rows;
  std::vector<double> mins(3, std::numeric_limits<double>::infinity());
  const ms::BlochMethod methods[3] = {ms::BlochMethod::nullspace,
                                      ms::BlochMethod::cond1,
                                      ms::BlochMethod::cond2};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const ms::WaveVector k{static_cast<double>(i) / n,
                             static_cast<double>(j) / n};
      std::vector<double> row{k.k1, k.k2};
      for (int m = 0; m < 3; ++m) {
        ms::BlochOptions o;
        o.method = methods[m];
        const double b = op.beta(k, o);
        row.push_back(b);
        mins[m] = std::min(mins[m], b);
      }
      rows.push_back(row);
    }
  const fs::path out = ensure_out(args);
  ms::write_csv((out / "sweep_compare.csv").string(),
                {"k1", "k2", "beta_nullspace", "beta_cond1", "beta_cond2"},
                rows);
  std::cout << "min beta: nullspace = " << ms::format_full(mins[0])
            << ", cond1 = " << ms::format_full(mins[1])
            << ", cond2 = " << ms::format_full(mins[2]) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"periodic-metamaterial homogenization and stability engine"};
  app.require_subcommand(1);

  std::string mesh_path;
  auto* info = app.add_subcommand("mesh-info", "mesh and pairing report");
  info->add_option("mesh", mesh_path, "mesh file")->required();

  CommonArgs hargs, sargs, targs, cargs;
  auto* hom = app.add_subcommand("homogenize", "strain-driven RVE solve");
  add_common(hom, hargs);
  auto* sd = app.add_subcommand("stress-drive", "stress-driven RVE solve");
  add_common(sd, sargs);
  auto* st = app.add_subcommand("stability", "load path with Bloch monitoring");
  add_common(st, targs);
  st->add_option("--method", targs.method,
                 "Bloch reduction: cond1|cond2|nullspace|all");
  auto* sc = app.add_subcommand("sweep-compare",
                                "all three Bloch reductions on one k-grid");
  add_common(sc, cargs);
  sc->add_option("--method", cargs.method, "ignored; always compares all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (info->parsed()) return cmd_mesh_info(mesh_path);
    if (hom->parsed()) return cmd_homogenize(hargs);
    if (sd->parsed()) return cmd_stress_drive(sargs);
    if (st->parsed()) return cmd_stability(targs);
    if (sc->parsed()) return cmd_sweep_compare(cargs);
  } catch (const ms::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ms::MeshError& e) {
    std::cerr << "mesh error: " << e.what() << "\n";
    return 3;
  } catch (const ms::MaterialError& e) {
    std::cerr << "material error: " << e.what() << "\n";
    return 4;
  } catch (const ms::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
