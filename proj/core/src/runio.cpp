#include "microstab/runio.hpp"

#include <cstdio>
#include <fstream>

#include "microstab/config.hpp"

namespace microstab {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output file: " + path);
  return out;
}

}  // namespace

std::string format_table(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out = open_out(path);
  for (size_t c = 0; c < columns.size(); ++c)
    out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw ConfigError("CSV row width does not match header: " + path);
    for (size_t c = 0; c < row.size(); ++c)
      out << (c ? "," : "") << format_full(row[c]);
    out << "\n";
  }
}

void write_surface_csv(const std::string& path, const SweepResult& sweep) {
  std::vector<std::vector<double>> rows;
  rows.reserve(sweep.surface.size());
  for (const SweepPoint& p : sweep.surface)
    rows.push_back({p.k.k1, p.k.k2, p.beta});
  write_csv(path, {"k1", "k2", "beta"}, rows);
}

void write_history_csv(const std::string& path,
                       const std::vector<StepRecord>& history) {
  std::vector<std::vector<double>> rows;
  rows.reserve(history.size());
  for (const StepRecord& r : history)
    rows.push_back({r.lambda, r.beta_min, r.k_min.k1, r.k_min.k2,
                    r.beta_origin, r.beta_near_origin, r.B,
                    r.Fbar(0, 0), r.Fbar(1, 1), r.Fbar(0, 1), r.Fbar(1, 0),
                    r.Pbar(0), r.Pbar(1), r.Pbar(2), r.Pbar(3), r.psi,
                    static_cast<double>(r.newton_iters),
                    r.plastic ? 1.0 : 0.0, r.stable ? 1.0 : 0.0});
  write_csv(path,
            {"lambda", "beta_min", "k1_min", "k2_min", "beta_origin",
             "beta_near_origin", "B", "F11", "F22", "F12", "F21", "P11", "P21",
             "P12", "P22", "psi", "newton_iters", "plastic", "stable"},
            rows);
}

void write_mode_csv(const std::string& path, const RveMesh& mesh,
                    const VecX& mode) {
  if (mode.size() != mesh.num_dofs())
    throw ConfigError("mode vector size does not match mesh");
  std::vector<std::vector<double>> rows;
  rows.reserve(mesh.num_nodes());
  for (int n = 0; n < mesh.num_nodes(); ++n)
    rows.push_back({static_cast<double>(n), mesh.nodes[n].x(), mesh.nodes[n].y(),
                    mode(2 * n), mode(2 * n + 1)});
  write_csv(path, {"node", "x", "y", "ux", "uy"}, rows);
}

void write_run_summary(const std::string& path, const RunSummary& s) {
  std::ofstream out = open_out(path);
  out << "tool: " << s.tool << "\n";
  out << "analysis: " << s.analysis << "\n";
  out << "threads: " << s.threads << "\n";
  out << "wall_seconds: " << format_full(s.wall_seconds) << "\n";
  for (const auto& [k, v] : s.extra) out << k << ": " << v << "\n";
  out << "\n[macro]\n";
  const Mat2& F = s.macro.Fbar;
  out << "F = [" << format_full(F(0, 0)) << ", " << format_full(F(0, 1))
      << "; " << format_full(F(1, 0)) << ", " << format_full(F(1, 1)) << "]\n";
  out << "P (11,21,12,22) = " << format_full(s.macro.P(0)) << ", "
      << format_full(s.macro.P(1)) << ", " << format_full(s.macro.P(2)) << ", "
      << format_full(s.macro.P(3)) << "\n";
  out << "psi = " << format_full(s.macro.psi) << "\n";
  out << "A =\n";
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c)
      out << (c ? ", " : "  ") << format_full(s.macro.A(r, c));
    out << "\n";
  }
  out << "newton_iters = " << s.macro.newton_iters << "\n";
  out << "residual = " << format_full(s.macro.residual) << "\n";
  out << "plastic = " << (s.macro.plastic ? "true" : "false") << "\n";

  if (s.report) {
    const BifurcationReport& r = *s.report;
    out << "\n[bifurcation]\n";
    out << "found = " << (r.found ? "true" : "false") << "\n";
    if (!r.message.empty()) out << "message = " << r.message << "\n";
    if (r.found) {
      out << "lambda_c = " << format_full(r.lambda_c) << "\n";
      out << "bracket = [" << format_full(r.lambda_stable) << ", "
          << format_full(r.lambda_unstable) << "]\n";
      out << "class = " << to_string(r.wave_class) << "\n";
      out << "multiplicity = " << r.multiplicity << "\n";
      out << "beta_at_critical = " << format_full(r.beta_at_critical) << "\n";
      out << "B_at_critical = " << format_full(r.B_at_critical) << "\n";
      out << "B_crossed_in_bracket = "
          << (r.B_crossed_in_bracket ? "true" : "false") << "\n";
      for (const WaveVector& k : r.critical_k)
        out << "critical_k = " << format_full(k.k1) << ", " << format_full(k.k2)
            << "\n";
    }
  }

  if (!s.config_echo.empty()) {
    out << "\n[config-echo]\n";
    out << s.config_echo;
    if (s.config_echo.back() != '\n') out << "\n";
  }
}

}  // namespace microstab
