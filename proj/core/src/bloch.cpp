#include "microstab/bloch.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "microstab/element.hpp"

namespace microstab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct BlockSet {
  // Dense boundary blocks.
  MatX Kaa, Kab, Kba, Kbb;
  // Dense boundary-interior couplings (rows boundary, cols interior).
  MatX Kai, Kbi;
  // Sparse interior block.
  SpMat Kii;
};

}  // namespace

struct BlochOperator::Impl {
  int N = 0;                       // total dofs
  int na = 0, nb = 0, ni = 0;      // master/slave/interior node counts
  std::vector<int> master_nodes;   // sorted unique
  std::vector<int> slave_nodes;    // one per pair, pairing order
  std::vector<int> interior_nodes;
  std::vector<int> pair_master;    // pair -> position in master_nodes
  std::vector<double> pair_c1, pair_c2;
  std::vector<int> slave_count;    // per master position
  std::vector<int> iloc;           // global node -> interior position or -1
  int fixed_interior = -1;         // interior position of the fixed node, or -1
  std::vector<int> cat, loc;       // dof -> category (0=a,1=b,2=i), local index

  BlockSet K;
  std::unique_ptr<BlockSet> Nm;    // gradient metric blocks, if provided
  SpMat Kfull;                     // full tangent, kept for the sparse path
  SpMat Nfull;                     // full gradient metric, if provided
  bool has_Nfull = false;

  Eigen::SparseLU<SpMat> luKii;
  bool kii_ok = false;
  MatX Xa, Xb;                     // Kii^{-1} Kia, Kii^{-1} Kib
  MatX Saa, Sab, Sba, Sbb;         // Kai*Xa etc.
  MatX Gaa, Gab, Gbb;              // Xa^T Xa etc.

  void extract_blocks(const SpMat& M, BlockSet& out) const;
  MatXc build_M(const WaveVector& k) const;
  SpMatC fold_sparse(const SpMat& A, const WaveVector& k,
                     const std::vector<int>& keep_pos, int nred,
                     const VecX* scale) const;
  MatXc reduced_dense(const BlockSet& B, const MatXc& M,
                      const std::vector<int>& keep) const;
  VecX eigs(const WaveVector& k, const BlochOptions& opts, bool smallest_only,
            VecXc* mode) const;
};

void BlochOperator::Impl::extract_blocks(const SpMat& M, BlockSet& out) const {
  out.Kaa = MatX::Zero(2 * na, 2 * na);
  out.Kab = MatX::Zero(2 * na, 2 * nb);
  out.Kba = MatX::Zero(2 * nb, 2 * na);
  out.Kbb = MatX::Zero(2 * nb, 2 * nb);
  out.Kai = MatX::Zero(2 * na, 2 * ni);
  out.Kbi = MatX::Zero(2 * nb, 2 * ni);
  std::vector<Triplet> tii;
  for (int c = 0; c < M.outerSize(); ++c)
    for (SpMat::InnerIterator it(M, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      const double v = it.value();
      const int cr = cat[r], cc = cat[c];
      const int lr = loc[r], lc = loc[c];
      if (cr == 0 && cc == 0)
        out.Kaa(lr, lc) += v;
      else if (cr == 0 && cc == 1)
        out.Kab(lr, lc) += v;
      else if (cr == 1 && cc == 0)
        out.Kba(lr, lc) += v;
      else if (cr == 1 && cc == 1)
        out.Kbb(lr, lc) += v;
      else if (cr == 0 && cc == 2)
        out.Kai(lr, lc) += v;
      else if (cr == 1 && cc == 2)
        out.Kbi(lr, lc) += v;
      else if (cr == 2 && cc == 2)
        tii.emplace_back(lr, lc, v);
      // (i, a) and (i, b) couplings follow from symmetry of M.
    }
  out.Kii.resize(2 * ni, 2 * ni);
  out.Kii.setFromTriplets(tii.begin(), tii.end());
}

MatXc BlochOperator::Impl::build_M(const WaveVector& k) const {
  MatXc M = MatXc::Zero(2 * nb, 2 * na);
  for (int p = 0; p < nb; ++p) {
    const double phi = kTwoPi * (k.k1 * pair_c1[p] + k.k2 * pair_c2[p]);
    const Complex ph(std::cos(phi), std::sin(phi));
    const int a = pair_master[p];
    M(2 * p, 2 * a) = ph;
    M(2 * p + 1, 2 * a + 1) = ph;
  }
  return M;
}

// Sparse reduced matrix on (master dofs, kept interior dofs): slave rows and
// columns are folded onto their masters with the Bloch phase, fixed interior
// dofs are dropped, and an optional real diagonal scaling is applied.
SpMatC BlochOperator::Impl::fold_sparse(const SpMat& A, const WaveVector& k,
                                        const std::vector<int>& keep_pos,
                                        int nred, const VecX* scale) const {
  std::vector<int> map(N, -1);
  std::vector<Complex> coef(N, Complex(1, 0));
  for (int d = 0; d < N; ++d) {
    if (cat[d] == 0) {
      map[d] = loc[d];
    } else if (cat[d] == 1) {
      const int p = loc[d] / 2;
      const double phi = kTwoPi * (k.k1 * pair_c1[p] + k.k2 * pair_c2[p]);
      map[d] = 2 * pair_master[p] + loc[d] % 2;
      coef[d] = Complex(std::cos(phi), std::sin(phi));
    } else {
      const int kp = keep_pos[loc[d]];
      if (kp >= 0) map[d] = 2 * na + kp;
    }
  }
  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(A.nonZeros());
  for (int c = 0; c < A.outerSize(); ++c)
    for (SpMat::InnerIterator it(A, c); it; ++it) {
      const int r = static_cast<int>(it.row());
      const int mr = map[r], mc = map[c];
      if (mr < 0 || mc < 0) continue;
      Complex v = std::conj(coef[r]) * it.value() * coef[c];
      if (scale) v *= (*scale)(mr) * (*scale)(mc);
      trips.emplace_back(mr, mc, v);
    }
  SpMatC out(nred, nred);
  out.setFromTriplets(trips.begin(), trips.end());
  SpMatC outH = SpMatC(out.adjoint());
  out = Complex(0.5, 0.0) * (out + outH);
  return out;
}

namespace {

// Smallest eigenvalue of the Hermitian pencil (A, B), B positive definite
// (identity when null). Inertia bisection with an LDLT factorization brackets
// the eigenvalue; inverse iteration with Rayleigh-quotient refinement then
// resolves it, and a final inertia check certifies that nothing lies below.
double sparse_smallest_eig(const SpMatC& A, const SpMatC* Bp, VecXc* mode) {
  const int n = static_cast<int>(A.rows());
  SpMatC B(n, n);
  if (Bp)
    B = *Bp;
  else
    B.setIdentity();

  Eigen::SimplicialLDLT<SpMatC, Eigen::Lower> ldlt;
  auto factorize = [&](double s) -> bool {
    double jitter = 1e-12 + 1e-8 * std::abs(s);
    for (int retry = 0; retry < 8; ++retry, jitter *= 10) {
      const double ss = retry == 0 ? s : s + jitter;
      SpMatC C = A - Complex(ss, 0.0) * B;
      ldlt.compute(C);
      if (ldlt.info() != Eigen::Success) continue;
      // Small pivots are legitimate for an indefinite shifted matrix; only a
      // breakdown (zero or non-finite pivot) forces a perturbed reattempt.
      const auto& D = ldlt.vectorD();
      bool broken = false;
      for (int j = 0; j < n && !broken; ++j) {
        const double d = D(j).real();
        if (d == 0.0 || !std::isfinite(d)) broken = true;
      }
      if (!broken) return true;
    }
    return false;
  };
  auto inertia = [&](double s) -> int {
    if (!factorize(s))
      throw SolverError("sparse Bloch factorization failed at every trial shift");
    const auto& D = ldlt.vectorD();
    int neg = 0;
    for (int j = 0; j < n; ++j)
      if (D(j).real() < 0) ++neg;
    return neg;
  };

  // Rayleigh quotients of unit vectors bound the smallest eigenvalue above.
  double hi0 = std::numeric_limits<double>::infinity();
  double sref = 0;
  for (int i = 0; i < n; ++i) {
    const double bi = B.coeff(i, i).real();
    if (bi <= 0) throw SolverError("Bloch normalization metric is not positive");
    const double r = A.coeff(i, i).real() / bi;
    hi0 = std::min(hi0, r);
    sref = std::max(sref, std::abs(r));
  }
  sref = std::max(sref, 1e-300);

  double hi = hi0 + 1e-10 * (1.0 + std::abs(hi0));
  double step = std::max(1.0, std::abs(hi));
  int guard = 0;
  while (inertia(hi) == 0 && guard++ < 64) {
    hi += step;
    step *= 2;
  }
  if (guard >= 64) throw SolverError("sparse Bloch bracketing failed (upper)");
  double lo = hi;
  step = std::max(1.0, std::abs(hi));
  guard = 0;
  do {
    lo -= step;
    step *= 2;
  } while (inertia(lo) > 0 && guard++ < 64);
  if (guard >= 64) throw SolverError("sparse Bloch bracketing failed (lower)");

  const double magn = std::max({std::abs(lo), std::abs(hi), 1e-12 * sref});
  double rho = 0.5 * (lo + hi);
  VecXc x;
  for (int outer = 0; outer < 4; ++outer) {
    while (hi - lo > 1e-6 * magn) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (inertia(mid) > 0)
        hi = mid;
      else
        lo = mid;
    }

    double sigma = hi;
    if (!factorize(sigma)) throw SolverError("sparse Bloch factorization failed");
    x.resize(n);
    for (int j = 0; j < n; ++j)
      x(j) = Complex(1.0 + 0.3 * std::sin(0.7 * j), 0.2 * std::cos(1.3 * j));
    rho = sigma;
    int stagnant = 0;
    for (int it = 0; it < 60; ++it) {
      const VecXc y = ldlt.solve(B * x);
      const double yn = std::sqrt(std::real(y.dot(B * y)));
      if (!(yn > 0) || !std::isfinite(yn)) break;
      x = y / yn;
      const VecXc Ax = A * x;
      const VecXc Bx = B * x;
      const double rho_prev = rho;
      rho = std::real(x.dot(Ax)) / std::real(x.dot(Bx));
      const double res = (Ax - Complex(rho, 0.0) * Bx).norm();
      if (res <= 1e-12 * std::max(Ax.norm(), std::abs(rho) * Bx.norm())) break;
      if (std::abs(rho - rho_prev) <= 1e-14 * std::max(std::abs(rho), 1e-6 * magn)) {
        if (++stagnant >= 2) {
          // Rayleigh-quotient restart, then give up once that stalls too.
          if (std::abs(rho - sigma) <= 1e-13 * magn || !factorize(rho)) break;
          sigma = rho;
          stagnant = 0;
        }
      } else {
        stagnant = 0;
      }
    }
    // The Rayleigh quotient never undershoots the smallest pencil eigenvalue,
    // and the inertia certificate below bounds it from the other side, so an
    // unconverged-but-finite quotient is still a valid upper estimate.
    if (!std::isfinite(rho)) rho = hi;

    // Certify: no pencil eigenvalue may lie below rho - delta.
    const double delta = std::max(1e-9 * magn, 1e-12 * std::abs(rho));
    if (rho - delta <= lo || inertia(rho - delta) == 0) {
      if (mode) *mode = x;
      return rho;
    }
    hi = rho - delta;
  }
  if (mode) *mode = x;
  return 0.5 * (lo + hi);
}

}  // namespace

// Dense reduced matrix on (master dofs, kept interior dofs) for the
// condensation-1 / null-space family. `keep` lists interior dof positions.
MatXc BlochOperator::Impl::reduced_dense(const BlockSet& B, const MatXc& M,
                                         const std::vector<int>& keep) const {
  const int nk = static_cast<int>(keep.size());
  const int n = 2 * na + nk;
  std::vector<int> keep_pos(2 * ni, -1);
  for (int j = 0; j < nk; ++j) keep_pos[keep[j]] = j;

  MatXc R = MatXc::Zero(n, n);
  R.topLeftCorner(2 * na, 2 * na) =
      B.Kaa + B.Kab * M + M.adjoint() * B.Kba + M.adjoint() * (B.Kbb * M);
  const MatXc Kai_hat = B.Kai + M.adjoint() * B.Kbi;
  for (int j = 0; j < nk; ++j)
    R.block(0, 2 * na + j, 2 * na, 1) = Kai_hat.col(keep[j]);
  R.bottomLeftCorner(nk, 2 * na) =
      R.topRightCorner(2 * na, nk).adjoint();
  for (int c = 0; c < B.Kii.outerSize(); ++c)
    for (SpMat::InnerIterator it(B.Kii, c); it; ++it) {
      const int rp = keep_pos[it.row()], cp = keep_pos[c];
      if (rp >= 0 && cp >= 0) R(2 * na + rp, 2 * na + cp) += it.value();
    }
  R = Complex(0.5, 0.0) * (R + R.adjoint()).eval();
  return R;
}

VecX BlochOperator::Impl::eigs(const WaveVector& k, const BlochOptions& opts,
                               bool smallest_only, VecXc* mode) const {
  BlochOptions o = opts;
  const bool at_zero = k.is_zero();
  if (at_zero && o.fix_translation_at_zero && o.method == BlochMethod::cond2) {
    // The interior condensation cannot reach interior dofs to pin; use the
    // null-space reduction, which has the same smallest eigenvalue.
    o.method = BlochMethod::nullspace;
    if (o.norm == BlochNorm::count) o.norm = BlochNorm::none;
  }

  const MatXc M = build_M(k);

  if (o.method == BlochMethod::cond2) {
    if (!kii_ok)
      throw SolverError("interior stiffness factorization failed; condensation 2 unavailable");
    if (o.norm == BlochNorm::gradient)
      throw SolverError("gradient normalization is not defined for condensation 2");
    MatXc K2 = K.Kaa + K.Kab * M + M.adjoint() * K.Kba + M.adjoint() * (K.Kbb * M) -
               (Saa + Sab * M + M.adjoint() * (Sba + Sbb * M));
    K2 = Complex(0.5, 0.0) * (K2 + K2.adjoint()).eval();
    VecX vals;
    MatXc vecs;
    if (o.norm == BlochNorm::count) {
      // W^* W = Gaa + Gab M + (Gab M)^* + M^* Gbb M with W = -(Xa + Xb M).
      MatXc D = MatXc::Identity(2 * na, 2 * na) + M.adjoint() * M + Gaa +
                Gab * M + (Gab * M).adjoint() + M.adjoint() * (Gbb * M);
      D = Complex(0.5, 0.0) * (D + D.adjoint()).eval();
      Eigen::GeneralizedSelfAdjointEigenSolver<MatXc> ges(K2, D);
      if (ges.info() != Eigen::Success) throw SolverError("Bloch pencil solve failed");
      vals = ges.eigenvalues();
      if (mode) vecs = ges.eigenvectors();
    } else {
      Eigen::SelfAdjointEigenSolver<MatXc> es(K2);
      if (es.info() != Eigen::Success) throw SolverError("Bloch eigensolve failed");
      vals = es.eigenvalues();
      if (mode) vecs = es.eigenvectors();
    }
    if (mode) {
      const VecXc va = vecs.col(0);
      const VecXc vb = M * va;
      const VecXc vi = -(Xa * va + Xb * vb);
      VecXc full = VecXc::Zero(N);
      for (int a = 0; a < na; ++a) full.segment<2>(2 * master_nodes[a]) = va.segment<2>(2 * a);
      for (int p = 0; p < nb; ++p) full.segment<2>(2 * slave_nodes[p]) = vb.segment<2>(2 * p);
      for (int j = 0; j < ni; ++j) full.segment<2>(2 * interior_nodes[j]) = vi.segment<2>(2 * j);
      *mode = full;
    }
    if (smallest_only) return vals.head(1);
    return vals;
  }

  // Dense family: condensation 1 and the null-space reduction.
  std::vector<int> keep;
  keep.reserve(2 * ni);
  const bool drop_fixed = at_zero && o.fix_translation_at_zero;
  if (drop_fixed && fixed_interior < 0)
    throw SolverError("translation-fixing node must be interior to the unit cell");
  for (int j = 0; j < 2 * ni; ++j) {
    if (drop_fixed && (j == 2 * fixed_interior || j == 2 * fixed_interior + 1)) continue;
    keep.push_back(j);
  }

  const int n = 2 * na + static_cast<int>(keep.size());

  // Diagonal counting weights: each master dof represents itself plus its
  // slaves; interior dofs represent themselves.
  VecX g = VecX::Ones(n);
  for (int a = 0; a < na; ++a) {
    g(2 * a) = 1.0 + slave_count[a];
    g(2 * a + 1) = 1.0 + slave_count[a];
  }

  VecX scale = VecX::Ones(n);
  if (o.method == BlochMethod::nullspace)
    scale = g.cwiseSqrt().cwiseInverse();

  if (o.norm == BlochNorm::gradient && !has_Nfull)
    throw SolverError("gradient metric was not supplied to the Bloch operator");

  const bool want_vecs = mode != nullptr;
  VecX vals;
  VecXc z;

  if (smallest_only && n > o.dense_limit) {
    std::vector<int> keep_pos(2 * ni, -1);
    for (size_t j = 0; j < keep.size(); ++j)
      keep_pos[keep[j]] = static_cast<int>(j);
    const VecX* sc = o.method == BlochMethod::nullspace ? &scale : nullptr;
    const SpMatC Ahat = fold_sparse(Kfull, k, keep_pos, n, sc);
    std::unique_ptr<SpMatC> Bhat;
    if (o.norm == BlochNorm::gradient) {
      Bhat = std::make_unique<SpMatC>(fold_sparse(Nfull, k, keep_pos, n, sc));
    } else if (o.norm == BlochNorm::count && o.method == BlochMethod::cond1) {
      Bhat = std::make_unique<SpMatC>(n, n);
      std::vector<Eigen::Triplet<Complex>> td;
      td.reserve(n);
      for (int j = 0; j < n; ++j) td.emplace_back(j, j, Complex(g(j), 0.0));
      Bhat->setFromTriplets(td.begin(), td.end());
    }
    vals.resize(1);
    vals(0) = sparse_smallest_eig(Ahat, Bhat.get(), want_vecs ? &z : nullptr);
  } else {
    MatXc R = reduced_dense(K, M, keep);
    if (o.method == BlochMethod::nullspace)
      R = scale.asDiagonal() * R * scale.asDiagonal();
    MatXc vecs;
    if (o.norm == BlochNorm::gradient) {
      MatXc Rn = reduced_dense(*Nm, M, keep);
      if (o.method == BlochMethod::nullspace)
        Rn = scale.asDiagonal() * Rn * scale.asDiagonal();
      Eigen::GeneralizedSelfAdjointEigenSolver<MatXc> ges(R, Rn);
      if (ges.info() != Eigen::Success) throw SolverError("Bloch pencil solve failed");
      vals = ges.eigenvalues();
      if (want_vecs) vecs = ges.eigenvectors();
    } else if (o.norm == BlochNorm::count && o.method == BlochMethod::cond1) {
      const MatXc G = g.cast<Complex>().asDiagonal();
      Eigen::GeneralizedSelfAdjointEigenSolver<MatXc> ges(R, G);
      if (ges.info() != Eigen::Success) throw SolverError("Bloch pencil solve failed");
      vals = ges.eigenvalues();
      if (want_vecs) vecs = ges.eigenvectors();
    } else {
      Eigen::SelfAdjointEigenSolver<MatXc> es(
          R, want_vecs ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
      if (es.info() != Eigen::Success) throw SolverError("Bloch eigensolve failed");
      vals = es.eigenvalues();
      if (want_vecs) vecs = es.eigenvectors();
    }
    if (want_vecs) z = vecs.col(0);
  }

  if (mode) {
    if (o.method == BlochMethod::nullspace) z = scale.asDiagonal() * z;
    const VecXc va = z.head(2 * na);
    const VecXc vb = M * va;
    VecXc full = VecXc::Zero(N);
    for (int a = 0; a < na; ++a) full.segment<2>(2 * master_nodes[a]) = va.segment<2>(2 * a);
    for (int p = 0; p < nb; ++p) full.segment<2>(2 * slave_nodes[p]) = vb.segment<2>(2 * p);
    for (size_t j = 0; j < keep.size(); ++j) {
      const int lp = keep[j];
      full(2 * interior_nodes[lp / 2] + lp % 2) = z(2 * na + static_cast<int>(j));
    }
    *mode = full;
  }
  if (smallest_only) return vals.head(1);
  return vals;
}

BlochOperator::BlochOperator(const RveMesh& mesh, const SpMat& K_T,
                             const SpMat* metric)
    : impl_(std::make_unique<Impl>()) {
  Impl& im = *impl_;
  im.N = mesh.num_dofs();
  if (K_T.rows() != im.N || K_T.cols() != im.N)
    throw SolverError("tangent stiffness size does not match mesh");
  if (mesh.pairing.empty())
    throw MeshError("mesh has no periodic pairing; cannot build Bloch operator");

  std::vector<int> masters;
  masters.reserve(mesh.pairing.size());
  for (const NodePair& p : mesh.pairing) masters.push_back(p.neg);
  std::sort(masters.begin(), masters.end());
  masters.erase(std::unique(masters.begin(), masters.end()), masters.end());
  im.master_nodes = masters;
  im.na = static_cast<int>(masters.size());
  std::unordered_map<int, int> mast_pos;
  for (int a = 0; a < im.na; ++a) mast_pos[masters[a]] = a;

  im.nb = static_cast<int>(mesh.pairing.size());
  im.slave_nodes.reserve(im.nb);
  im.pair_master.reserve(im.nb);
  im.slave_count.assign(im.na, 0);
  std::vector<char> is_boundary(mesh.num_nodes(), 0);
  for (int n : masters) is_boundary[n] = 1;
  for (const NodePair& p : mesh.pairing) {
    if (is_boundary[p.pos]) throw MeshError("node appears twice as a pairing slave");
    is_boundary[p.pos] = 1;
    im.slave_nodes.push_back(p.pos);
    const int a = mast_pos.at(p.neg);
    im.pair_master.push_back(a);
    im.slave_count[a]++;
    im.pair_c1.push_back(p.c1);
    im.pair_c2.push_back(p.c2);
  }

  im.iloc.assign(mesh.num_nodes(), -1);
  for (int n = 0; n < mesh.num_nodes(); ++n)
    if (!is_boundary[n]) {
      im.iloc[n] = static_cast<int>(im.interior_nodes.size());
      im.interior_nodes.push_back(n);
    }
  im.ni = static_cast<int>(im.interior_nodes.size());
  if (mesh.fixed_node >= 0) im.fixed_interior = im.iloc[mesh.fixed_node];

  // dof category: 0 = master (a), 1 = slave (b), 2 = interior (i)
  im.cat.assign(im.N, 2);
  im.loc.assign(im.N, -1);
  auto tag = [&](const std::vector<int>& nodes, int c) {
    for (size_t p = 0; p < nodes.size(); ++p)
      for (int d = 0; d < 2; ++d) {
        im.cat[2 * nodes[p] + d] = c;
        im.loc[2 * nodes[p] + d] = 2 * static_cast<int>(p) + d;
      }
  };
  tag(im.master_nodes, 0);
  tag(im.slave_nodes, 1);
  tag(im.interior_nodes, 2);

  im.Kfull = K_T;
  im.extract_blocks(K_T, im.K);
  if (metric) {
    im.Nm = std::make_unique<BlockSet>();
    im.extract_blocks(*metric, *im.Nm);
    im.Nfull = *metric;
    im.has_Nfull = true;
  }

  if (im.ni == 0) {
    im.kii_ok = true;
    im.Xa = MatX::Zero(0, 2 * im.na);
    im.Xb = MatX::Zero(0, 2 * im.nb);
    im.Saa = MatX::Zero(2 * im.na, 2 * im.na);
    im.Sab = MatX::Zero(2 * im.na, 2 * im.nb);
    im.Sba = MatX::Zero(2 * im.nb, 2 * im.na);
    im.Sbb = MatX::Zero(2 * im.nb, 2 * im.nb);
    im.Gaa = MatX::Zero(2 * im.na, 2 * im.na);
    im.Gab = MatX::Zero(2 * im.na, 2 * im.nb);
    im.Gbb = MatX::Zero(2 * im.nb, 2 * im.nb);
    return;
  }
  im.luKii.compute(im.K.Kii);
  im.kii_ok = im.luKii.info() == Eigen::Success;
  if (im.kii_ok) {
    im.Xa = im.luKii.solve(im.K.Kai.transpose());
    im.Xb = im.luKii.solve(im.K.Kbi.transpose());
    im.Saa = im.K.Kai * im.Xa;
    im.Sab = im.K.Kai * im.Xb;
    im.Sba = im.K.Kbi * im.Xa;
    im.Sbb = im.K.Kbi * im.Xb;
    im.Gaa = im.Xa.transpose() * im.Xa;
    im.Gab = im.Xa.transpose() * im.Xb;
    im.Gbb = im.Xb.transpose() * im.Xb;
  }
}

BlochOperator::~BlochOperator() = default;
BlochOperator::BlochOperator(BlochOperator&&) noexcept = default;

double BlochOperator::beta(const WaveVector& k, const BlochOptions& opts,
                           VecXc* mode) const {
  return impl_->eigs(k, opts, true, mode)(0);
}

VecX BlochOperator::spectrum(const WaveVector& k, const BlochOptions& opts) const {
  return impl_->eigs(k, opts, false, nullptr);
}

int BlochOperator::num_pairs() const { return impl_->nb; }

int BlochOperator::reduced_size(const WaveVector& k, const BlochOptions& opts) const {
  const bool at_zero = k.is_zero();
  if (opts.method == BlochMethod::cond2 &&
      !(at_zero && opts.fix_translation_at_zero))
    return 2 * impl_->na;
  const int drop = (at_zero && opts.fix_translation_at_zero) ? 2 : 0;
  return 2 * impl_->na + 2 * impl_->ni - drop;
}

SpMat gradient_metric(const RveMesh& mesh) {
  std::vector<Triplet> trips;
  double vol_solid = 0;
  for (int e = 0; e < static_cast<int>(mesh.elements.size()); ++e) {
    const MatX Ne = element_gradient_matrix(mesh, e, &vol_solid);
    const Element& el = mesh.elements[e];
    const int nn = nodes_per_element(el.kind);
    for (int a = 0; a < nn; ++a)
      for (int i = 0; i < 2; ++i)
        for (int b = 0; b < nn; ++b)
          for (int j = 0; j < 2; ++j)
            trips.emplace_back(2 * el.conn[a] + i, 2 * el.conn[b] + j,
                               Ne(2 * a + i, 2 * b + j));
  }
  SpMat N(mesh.num_dofs(), mesh.num_dofs());
  N.setFromTriplets(trips.begin(), trips.end());
  // Stiffness quadratic forms are compared against moduli homogenized per
  // cell volume (voids included); scaling the metric by the cell-to-solid
  // volume ratio keeps the normalized indicator an exact lower bound for the
  // macroscopic (rank-1) indicator in the long-wavelength limit.
  N *= mesh.volume() / vol_solid;
  return N;
}

VecX recover_real_mode(const VecXc& mode) {
  Complex s(0, 0);
  for (int j = 0; j < mode.size(); ++j) s += mode(j) * mode(j);
  const double phi = std::abs(s) > 0 ? -0.5 * std::arg(s) : 0.0;
  VecX v = (std::polar(1.0, phi) * mode).real();
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

namespace {

double wrapped_dist(const WaveVector& p, const WaveVector& q) {
  auto d1 = [](double a, double b) {
    double d = std::abs(a - b);
    return std::min(d, 1.0 - d);
  };
  return std::hypot(d1(p.k1, q.k1), d1(p.k2, q.k2));
}

WaveVector conj_canonical(const WaveVector& k) {
  auto wrap = [](double x) {
    double y = std::fmod(1.0 - x, 1.0);
    if (y < 0) y += 1.0;
    return y;
  };
  const WaveVector kc{wrap(k.k1), wrap(k.k2)};
  if (kc.k1 < k.k1 - 1e-12 ||
      (std::abs(kc.k1 - k.k1) <= 1e-12 && kc.k2 < k.k2 - 1e-12))
    return kc;
  return k;
}

void parallel_betas(const BlochOperator& op, const BlochOptions& opts,
                    const std::vector<WaveVector>& pts, std::vector<double>& out,
                    int threads) {
  out.assign(pts.size(), 0.0);
  const int nthreads = std::max(1, threads);
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const size_t j = next.fetch_add(1);
      if (j >= pts.size()) return;
      try {
        out[j] = op.beta(pts[j], opts);
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  if (nthreads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

SweepResult sweep_beta(const BlochOperator& op, const SweepSpec& spec) {
  std::vector<WaveVector> pts;
  const int n = std::max(1, spec.n_main);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == 0 && j == 0) continue;  // origin handled separately
      pts.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  const size_t zone_begin = pts.size();
  const int nz = std::max(1, spec.n_zone);
  const double z = spec.zone;
  auto small = [&](int i) { return z * (i + 1) / nz; };        // (0, z]
  auto large = [&](int j) { return z + (1.0 - z) * (j + 1) / nz; };  // (z, 1]
  for (int i = 0; i < nz; ++i)
    for (int j = 0; j < nz; ++j) pts.push_back({small(i), large(j)});
  for (int i = 0; i < nz; ++i)
    for (int j = 0; j < nz; ++j) pts.push_back({large(i), small(j)});
  for (int i = 0; i < nz; ++i)
    for (int j = 0; j < nz; ++j) pts.push_back({small(i), small(j)});

  std::vector<double> betas;
  parallel_betas(op, spec.eval_full_surface ? spec.eval : spec.prefilter, pts,
                 betas, spec.threads);

  SweepResult res;
  res.surface.resize(pts.size());
  for (size_t j = 0; j < pts.size(); ++j) res.surface[j] = {pts[j], betas[j]};

  // Re-evaluate the most promising points with the evaluation method.
  std::vector<size_t> order(pts.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return betas[a] < betas[b]; });
  const int ncand =
      std::min<int>(std::max(1, spec.candidates), static_cast<int>(order.size()));
  res.beta_min = std::numeric_limits<double>::infinity();
  for (int c = 0; c < ncand; ++c) {
    const size_t j = order[c];
    const double b = spec.eval_full_surface ? betas[j] : op.beta(pts[j], spec.eval);
    if (b < res.beta_min) {
      res.beta_min = b;
      res.k_min = pts[j];
    }
  }

  res.beta_origin = op.beta({0.0, 0.0}, spec.eval);

  // Near-origin probes: best refined-zone points, re-evaluated.
  std::vector<size_t> zorder;
  for (size_t j = zone_begin; j < pts.size(); ++j) zorder.push_back(j);
  std::sort(zorder.begin(), zorder.end(),
            [&](size_t a, size_t b) { return betas[a] < betas[b]; });
  res.beta_near_origin = std::numeric_limits<double>::infinity();
  const int nprobe = std::min<int>(ncand, static_cast<int>(zorder.size()));
  for (int c = 0; c < nprobe; ++c) {
    const size_t j = zorder[c];
    const double b = spec.eval_full_surface ? betas[j] : op.beta(pts[j], spec.eval);
    res.beta_near_origin = std::min(res.beta_near_origin, b);
  }

  // Distinct minimizers after merging k with 1-k (complex-conjugate modes).
  const double bmin = betas[order[0]];
  const double tol = std::max(spec.merge_tol, spec.merge_tol * std::abs(bmin));
  std::vector<WaveVector> close;
  for (size_t j = 0; j < pts.size(); ++j)
    if (betas[j] <= bmin + tol) close.push_back(conj_canonical(pts[j]));
  const double cluster_r = 1.5 / n;
  for (const WaveVector& k : close) {
    bool merged = false;
    for (const WaveVector& m : res.minimizers)
      if (wrapped_dist(k, m) <= cluster_r) {
        merged = true;
        break;
      }
    if (!merged) res.minimizers.push_back(k);
  }
  res.multiplicity = static_cast<int>(res.minimizers.size());
  return res;
}

}  // namespace microstab
