#pragma once

#include <optional>
#include <string>
#include <vector>

#include "microstab/bloch.hpp"
#include "microstab/homogenize.hpp"
#include "microstab/rank1.hpp"
#include "microstab/stress_drive.hpp"

namespace microstab {

enum class LoadControl { strain_driven, stress_driven };

/// Load path parameterization.
///
/// Strain control: Fbar(lambda) = Q(theta) diag(s1, s2) Q(theta)^T with
/// s_i = 1 + c_i (lambda - 1); the defaults give uniaxial macroscopic
/// stretch diag(1, lambda). Stress control: principal Kirchhoff stress of
/// magnitude lambda at direction angle phi and orientation theta.
struct LoadPath {
  LoadControl control = LoadControl::strain_driven;
  double theta = 0;
  double c1 = 0, c2 = 1;  // strain control only
  double phi = 0;         // stress control only
  double lambda_start = 1.0;
  double lambda_step = -0.0025;
  double lambda_end = 0.8;
  double bisect_tol = 1e-5;
};

Mat2 path_deformation(const LoadPath& path, double lambda);

enum class WavelengthClass { cell_periodic, finite, long_wavelength, tie };

const char* to_string(WavelengthClass c);

struct StepRecord {
  double lambda = 0;
  Mat2 Fbar = Mat2::Identity();
  Vec4 Pbar = Vec4::Zero();
  double psi = 0;
  double beta_min = 0;         // min over the k-grid (k != 0)
  WaveVector k_min;
  double beta_origin = 0;      // k = 0, translation fixed
  double beta_near_origin = 0; // refined-zone probes
  double B = 0;                // rank-1 (long-wavelength) indicator
  int newton_iters = 0;
  bool plastic = false;
  bool stable = true;
};

struct BifurcationReport {
  bool found = false;
  double lambda_c = 0;
  double lambda_stable = 0;    // last stable lambda (bracket end)
  double lambda_unstable = 0;  // first unstable lambda (bracket end)
  WavelengthClass wave_class = WavelengthClass::finite;
  std::vector<WaveVector> critical_k;
  int multiplicity = 0;
  double beta_at_critical = 0;
  double B_at_critical = 0;
  bool B_crossed_in_bracket = false;  // B changed sign across the final bracket
  std::vector<VecX> real_modes;       // recovered modes at the critical k's
  std::string message;
};

struct PathOptions {
  SolveOptions solve;
  StressDriveOptions stress;
  SweepSpec sweep;
  Rank1Options rank1;
  int check_interval = 1;       // full sweep every this many steps
  double class_tol_rel = 0.05;  // relative tolerance of the classifier
  int max_modes = 4;            // modes recovered in the report
  bool with_rank1 = true;
};

struct PathResult {
  std::vector<StepRecord> history;
  BifurcationReport report;
  std::optional<SweepResult> critical_sweep;  // surface at the unstable bracket end
};

/// Classification from the critical-state sweep and rank-1 indicator.
/// `b_crossed` records whether B changed sign across the final bisection
/// bracket (the long-wavelength signature).
WavelengthClass classify(const SweepResult& sweep, double B, bool b_crossed,
                         double tol_rel);

/// Steps lambda along the path, monitoring the Bloch minimum and the rank-1
/// indicator; on the first sign change, bisects the bracket (restarting
/// material states from the last committed stable solution) and reports the
/// bifurcation.
PathResult run_path(const RveMesh& mesh, const std::vector<Material>& materials,
                    const LoadPath& path, const PathOptions& opts = {});

}  // namespace microstab
