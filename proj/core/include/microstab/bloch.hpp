#pragma once

#include <memory>
#include <vector>

#include "microstab/mesh.hpp"

namespace microstab {

/// Wavevector in reciprocal-basis coordinates: k = k1 b1 + k2 b2,
/// k1, k2 in [0, 1).
struct WaveVector {
  double k1 = 0;
  double k2 = 0;
  bool is_zero(double tol = 1e-14) const {
    return std::abs(k1) < tol && std::abs(k2) < tol;
  }
};

enum class BlochMethod { nullspace, cond1, cond2 };

/// Normalization of the eigenproblem:
///   none     - plain Hermitian eigenvalue of the reduced stiffness
///   count    - the multiplicity-counting diagonal/Gram pencil (G or D)
///   gradient - pencil against the projected gradient metric (the discrete
///              Rayleigh quotient of the stability functional)
enum class BlochNorm { none, count, gradient };

struct BlochOptions {
  BlochMethod method = BlochMethod::nullspace;
  BlochNorm norm = BlochNorm::none;
  bool fix_translation_at_zero = true;
  // Reduced systems larger than this use a sparse factorization path for the
  // smallest eigenvalue (inertia bisection + inverse iteration) instead of a
  // dense Hermitian solve. Full spectra always use the dense path.
  int dense_limit = 700;
};

/// Reduced Bloch eigenproblems of one tangent stiffness snapshot. Boundary
/// partitions and the interior factorization are precomputed so that each
/// wavevector costs only small dense algebra (condensation 2) or one dense
/// Hermitian solve (the other methods).
class BlochOperator {
 public:
  BlochOperator(const RveMesh& mesh, const SpMat& K_T,
                const SpMat* gradient_metric = nullptr);
  ~BlochOperator();
  BlochOperator(BlochOperator&&) noexcept;

  /// Smallest eigenvalue; optionally recovers the full complex mode (size N).
  double beta(const WaveVector& k, const BlochOptions& opts = {},
              VecXc* mode = nullptr) const;

  /// All eigenvalues, ascending.
  VecX spectrum(const WaveVector& k, const BlochOptions& opts = {}) const;

  int num_pairs() const;
  int reduced_size(const WaveVector& k, const BlochOptions& opts = {}) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Discrete gradient metric: v^T N v = integral of grad(v):grad(v).
SpMat gradient_metric(const RveMesh& mesh);

/// Phase choice maximizing the real part, normalized.
VecX recover_real_mode(const VecXc& mode);

struct SweepSpec {
  int n_main = 20;          // main grid over [0,1)^2
  int n_zone = 7;           // per refined zone near the origin
  double zone = 0.01;       // refined-zone extent
  BlochOptions prefilter{BlochMethod::cond2, BlochNorm::none, true};
  BlochOptions eval{BlochMethod::nullspace, BlochNorm::gradient, true};
  bool eval_full_surface = false;  // evaluate `eval` at every grid point
  int candidates = 8;       // prefilter minima re-evaluated with `eval`
  double merge_tol = 1e-6;  // eigenvalue tolerance for multiplicity count
  int threads = 1;
};

struct SweepPoint {
  WaveVector k;
  double beta = 0;
};

struct SweepResult {
  std::vector<SweepPoint> surface;     // prefilter (or full-eval) values
  double beta_min = 0;                 // minimum of `eval` over candidates
  WaveVector k_min;
  double beta_origin = 0;              // `eval` at k = 0 (translation fixed)
  double beta_near_origin = 0;         // min of `eval` over refined-zone probes
  std::vector<WaveVector> minimizers;  // distinct minima after conjugate merge
  int multiplicity = 0;
};

SweepResult sweep_beta(const BlochOperator& op, const SweepSpec& spec);

}  // namespace microstab
