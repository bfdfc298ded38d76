#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "complex_builder.hpp"
#include "error.hpp"
#include "linalg.hpp"

namespace bihlab {

/// Numerical tolerances shared by the spectral and Helmholtz routines.
struct HodgeOptions {
  double tol_harm = 1e-8;    // harmonic threshold relative to the Laplacian norm estimate
  double tol_sub = 1e-10;    // relative Ritz residual for subspace iteration
  double tol_solver = 1e-13; // relative residual for conjugate gradients
  double gap_min = 1e2;
  double shift = 1e-10;      // shift-invert shift relative to the Laplacian norm estimate
  int nev = 8;
  std::uint64_t seed = 1;
};

/// A Hilbert complex in coordinates together with factorized mass matrices of every level.
class HodgeContext {
 public:
  explicit HodgeContext(CoordComplex c) : c_(std::move(c)) {
    for (int k = 0; k < 4; ++k) {
      mass_[k] = std::make_shared<SpdSolver>(c_.M[k]);
      diag_[k] = Vec(c_.M[k].diagonal());
    }
  }
  explicit HodgeContext(const HilbertComplex& hc) : HodgeContext(hc.coord()) {}

  const CoordComplex& complex() const { return c_; }
  int dim(int k) const { return c_.dim(k); }
  const ColSparse& M(int k) const { return c_.M[k]; }
  Vec solve_mass(int k, const Vec& b) const { return mass_[k]->solve(b); }
  Mat solve_mass(int k, const Mat& b) const { return mass_[k]->solve(b); }

  /// A_k: level k -> level k+1.
  Vec d(int k, const Vec& x) const { return solve_mass(k + 1, Vec(c_.C[k + 1] * x)); }
  /// Weighted adjoint A_k^*: level k+1 -> level k.
  Vec dstar(int k, const Vec& y) const { return solve_mass(k, Vec(c_.C[k + 1].transpose() * y)); }
  /// A_k^* A_k in dual form (C^T M^{-1} C); zero at the top level.
  Vec up(int k, const Vec& x) const {
    if (k >= 3 || dim(k + 1) == 0) return Vec::Zero(x.size());
    return c_.C[k + 1].transpose() * solve_mass(k + 1, Vec(c_.C[k + 1] * x));
  }
  /// M_k A_{k-1} A_{k-1}^* in dual form; zero at the bottom level.
  Vec down(int k, const Vec& x) const {
    if (k <= 0 || dim(k - 1) == 0) return Vec::Zero(x.size());
    return c_.C[k] * solve_mass(k - 1, Vec(c_.C[k].transpose() * x));
  }
  double inner(int k, const Vec& x, const Vec& y) const { return x.dot(c_.M[k] * y); }
  double norm(int k, const Vec& x) const { return std::sqrt(std::max(0.0, inner(k, x, x))); }
  const Vec& mass_diagonal(int k) const { return diag_[k]; }

 private:
  CoordComplex c_;
  std::array<std::shared_ptr<SpdSolver>, 4> mass_;
  std::array<Vec, 4> diag_;
};

/// Coordinates of a lattice vector in the level basis (weighted least squares).
inline Vec coords_from_lattice(const DofSpace& sp, const Vec& lattice) {
  SpdSolver s(sp.M);
  return s.solve(Vec(ColSparse(sp.B.transpose()) * (sp.G * lattice)));
}

/// Lowest eigenpairs of the weighted Hodge Laplacian  up + beta * down  at one level.
struct Spectrum {
  int level = 0;
  double beta = 1.0;
  Vec lambda;          // ascending
  Mat vectors;         // M-orthonormal coordinate vectors
  double norm_estimate = 0.0;
  double tau_harm = 0.0;
  int harmonic_dim = 0;
  double eigen_gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool dense = false;
};

namespace detail {

inline double laplacian_norm(const HodgeContext& hc, int k, double beta, std::uint64_t seed) {
  const int n = hc.dim(k);
  if (n == 0) return 0.0;
  Vec x = random_matrix(n, 1, seed ^ 0x9e3779b97f4a7c15ULL).col(0);
  x /= hc.norm(k, x);
  double est = 0.0;
  for (int it = 0; it < 60; ++it) {
    const Vec lx = hc.up(k, x) + beta * hc.down(k, x);
    const double rq = x.dot(lx);
    const Vec y = hc.solve_mass(k, lx);
    const double ny = hc.norm(k, y);
    if (ny == 0.0) return std::max(est, rq);
    const bool settled = it > 10 && std::abs(rq - est) <= 1e-3 * rq;
    est = rq;
    if (settled) break;
    x = y / ny;
  }
  return est;
}

inline Mat dense_laplacian(const HodgeContext& hc, int k, double beta) {
  const int n = hc.dim(k);
  Mat l(n, n);
  for (int j = 0; j < n; ++j) {
    Vec e = Vec::Zero(n);
    e(j) = 1.0;
    l.col(j) = hc.up(k, e) + beta * hc.down(k, e);
  }
  return 0.5 * (l + l.transpose());
}

inline void classify(Spectrum& s, double gap_min, bool require_gap) {
  const int m = static_cast<int>(s.lambda.size());
  int h = 0;
  while (h < m && s.lambda(h) <= s.tau_harm) ++h;
  s.harmonic_dim = h;
  if (h < m) {
    const double kept = h > 0 ? std::max(s.lambda(h - 1), s.tau_harm) : s.tau_harm;
    s.eigen_gap = kept > 0.0 ? s.lambda(h) / kept : std::numeric_limits<double>::infinity();
  } else {
    s.eigen_gap = std::numeric_limits<double>::infinity();
  }
  if (require_gap && s.eigen_gap < gap_min)
    throw Error(ErrorCode::NoSpectralGap, "eigen gap " + std::to_string(s.eigen_gap) + " at level " +
                                              std::to_string(s.level) + " is below " + std::to_string(gap_min));
}

}  // namespace detail

/// Computes the nev lowest eigenpairs of (up + beta*down) x = lambda M x by shift-invert subspace iteration
/// on the quasi-definite mixed system; levels small enough are handled by a dense eigensolver.
inline Spectrum low_spectrum(const HodgeContext& hc, int k, double beta, int nev, const HodgeOptions& opt,
                             double norm_estimate = -1.0) {
  Spectrum s;
  s.level = k;
  s.beta = beta;
  const int n = hc.dim(k);
  if (n == 0) return s;
  nev = std::min(nev, n);
  s.norm_estimate = norm_estimate > 0.0 ? norm_estimate : detail::laplacian_norm(hc, k, 1.0, opt.seed);
  s.tau_harm = opt.tol_harm * s.norm_estimate;
  const CoordComplex& c = hc.complex();

  if (n <= 300) {
    const Mat l = detail::dense_laplacian(hc, k, beta);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(l, Mat(c.M[k]));
    s.lambda = es.eigenvalues().head(nev);
    s.vectors = es.eigenvectors().leftCols(nev);
    s.dense = true;
    return s;
  }

  const double delta = opt.shift * std::max(s.norm_estimate, std::numeric_limits<double>::min());
  const int nd = k > 0 ? hc.dim(k - 1) : 0;
  const int nu = k < 3 ? hc.dim(k + 1) : 0;
  std::vector<int> sizes{n};
  std::vector<std::tuple<int, int, ColSparse>> blocks;
  blocks.emplace_back(0, 0, ColSparse(delta * c.M[k]));
  int next = 1;
  if (nd > 0) {
    sizes.push_back(nd);
    blocks.emplace_back(next, next, ColSparse((-1.0 / beta) * c.M[k - 1]));
    blocks.emplace_back(0, next, c.C[k]);
    ++next;
  }
  if (nu > 0) {
    sizes.push_back(nu);
    blocks.emplace_back(next, next, ColSparse(-1.0 * c.M[k + 1]));
    blocks.emplace_back(0, next, ColSparse(c.C[k + 1].transpose()));
  }
  QuasiDefiniteSolver qd;
  qd.factor(block_matrix(sizes, blocks));
  const int total = std::accumulate(sizes.begin(), sizes.end(), 0);

  // Converged leading Ritz pairs are locked and deflated; otherwise rounding in the harmonic directions, amplified
  // by 1/delta, sets a residual floor for the remaining pairs.
  const int p = std::min(n, std::max(2 * nev, nev + 8));
  Mat locked(n, 0);
  std::vector<double> locked_om;
  auto deflate = [&](Mat& x) {
    if (locked.cols() > 0) x -= locked * (locked.transpose() * (c.M[k] * x));
  };
  const int active = std::min(p, n);
  Mat q = random_matrix(n, active, opt.seed);
  const int max_iter = 1000;
  for (int it = 1; it <= max_iter; ++it) {
    const int width = std::min<int>(active, n - static_cast<int>(locked.cols()));
    if (q.cols() > width) q.conservativeResize(Eigen::NoChange, width);
    deflate(q);
    q = m_orthonormalize(q, c.M[k]);
    deflate(q);
    q = m_orthonormalize(q, c.M[k]);
    Mat rhs = Mat::Zero(total, q.cols());
    rhs.topRows(n) = c.M[k] * q;
    Mat y = qd.solve(rhs).topRows(n);
    deflate(y);
    Mat hm = q.transpose() * (c.M[k] * y);
    hm = 0.5 * (hm + hm.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(hm);
    const Vec om = es.eigenvalues().reverse();
    const Mat w = es.eigenvectors().rowwise().reverse();
    const Mat yw = y * w;
    const Mat qw = q * w;
    int newly = 0;
    const int need = nev - static_cast<int>(locked.cols());
    while (newly < need && newly < qw.cols()) {
      const Vec r = yw.col(newly) - om(newly) * qw.col(newly);
      if (hc.norm(k, r) > opt.tol_sub * std::abs(om(newly))) break;
      ++newly;
    }
    s.iterations = it;
    if (newly > 0) {
      const Eigen::Index l0 = locked.cols();
      locked.conservativeResize(Eigen::NoChange, l0 + newly);
      locked.rightCols(newly) = qw.leftCols(newly);
      for (int i = 0; i < newly; ++i) locked_om.push_back(om(i));
    }
    if (static_cast<int>(locked.cols()) >= nev) {
      std::vector<int> order(locked_om.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return locked_om[a] > locked_om[b]; });
      s.lambda.resize(nev);
      s.vectors.resize(n, nev);
      for (int i = 0; i < nev; ++i) {
        s.lambda(i) = 1.0 / locked_om[order[i]] - delta;
        s.vectors.col(i) = locked.col(order[i]);
      }
      return s;
    }
    q = yw.rightCols(yw.cols() - newly);
  }
  throw Error(ErrorCode::SolverDiverged, "subspace iteration did not converge at level " + std::to_string(k));
}

/// Orthonormal basis of the harmonic fields at one level.
struct HarmonicBasis {
  int level = 0;
  Mat coords;          // M-orthonormal columns
  Vec eigenvalues;     // computed low spectrum (harmonic ones first)
  double eigen_gap = 0.0;
  double tau_harm = 0.0;
  double norm_estimate = 0.0;
  int dim() const { return static_cast<int>(coords.cols()); }
};

inline HarmonicBasis harmonic_fields(const HodgeContext& hc, int k, const HodgeOptions& opt = {}) {
  HarmonicBasis hb;
  hb.level = k;
  const int n = hc.dim(k);
  if (n == 0) return hb;
  const double est = detail::laplacian_norm(hc, k, 1.0, opt.seed);
  int nev = opt.nev;
  for (;;) {
    Spectrum s = low_spectrum(hc, k, 1.0, nev, opt, est);
    detail::classify(s, opt.gap_min, false);
    const int m = static_cast<int>(s.lambda.size());
    if (s.harmonic_dim == m && m < n) {
      nev = std::min(n, 2 * nev);
      continue;
    }
    detail::classify(s, opt.gap_min, true);
    hb.coords = s.vectors.leftCols(s.harmonic_dim);
    hb.eigenvalues = s.lambda;
    hb.eigen_gap = s.eigen_gap;
    hb.tau_harm = s.tau_harm;
    hb.norm_estimate = s.norm_estimate;
    return hb;
  }
}

inline Vec harmonic_projection(const HodgeContext& hc, const HarmonicBasis& hb, const Vec& x) {
  if (hb.dim() == 0) return Vec::Zero(x.size());
  return hb.coords * (hb.coords.transpose() * (hc.M(hb.level) * x));
}

/// Optimal Friedrichs/Poincare constants c_i = 1/sigma_min^+(A_i) with attaining vectors at level i.
struct PoincareReport {
  std::array<double, 3> c{};
  std::array<double, 3> sigma_min{};
  std::array<double, 3> gap{};
  std::array<double, 3> beta{};
  std::array<Vec, 3> attaining;
};

namespace detail {

/// Smallest nonzero eigenvalue of A_i^* A_i with its eigenvector, from the lowest non-harmonic mode at a level
/// whose Laplacian has only one nonzero part.
inline void single_part_constant(const HodgeContext& hc, int level, const HodgeOptions& opt, double& lambda,
                                 Vec& vec, double& gap) {
  const double est = laplacian_norm(hc, level, 1.0, opt.seed);
  int nev = opt.nev;
  for (;;) {
    Spectrum s = low_spectrum(hc, level, 1.0, nev, opt, est);
    classify(s, opt.gap_min, false);
    if (s.harmonic_dim == s.lambda.size() && s.lambda.size() < hc.dim(level)) {
      nev *= 2;
      continue;
    }
    classify(s, opt.gap_min, true);
    if (s.harmonic_dim == s.lambda.size()) throw Error(ErrorCode::NoSpectralGap, "operator vanishes identically");
    lambda = s.lambda(s.harmonic_dim);
    vec = s.vectors.col(s.harmonic_dim);
    gap = s.eigen_gap;
    return;
  }
}

}  // namespace detail

inline PoincareReport poincare_constants(const HodgeContext& hc, const HodgeOptions& opt = {}) {
  PoincareReport pr;
  double lam = 0.0;
  Vec v;
  double gap = 0.0;

  detail::single_part_constant(hc, 0, opt, lam, v, gap);
  pr.sigma_min[0] = std::sqrt(lam);
  pr.c[0] = 1.0 / pr.sigma_min[0];
  pr.attaining[0] = v;
  pr.gap[0] = gap;
  pr.beta[0] = 1.0;

  detail::single_part_constant(hc, 3, opt, lam, v, gap);
  pr.sigma_min[2] = std::sqrt(lam);
  pr.c[2] = 1.0 / pr.sigma_min[2];
  Vec x2 = hc.dstar(2, v);
  pr.attaining[2] = x2 / hc.norm(2, x2);
  pr.gap[2] = gap;
  pr.beta[2] = 1.0;

  // Level 1 carries both parts; the down part is scaled by beta until the lowest non-harmonic mode is of up type.
  const double est = detail::laplacian_norm(hc, 1, 1.0, opt.seed);
  double beta = 1.0;
  for (int round = 0; round < 8; ++round, beta *= 1e2) {
    Spectrum s = low_spectrum(hc, 1, beta, opt.nev, opt, est);
    detail::classify(s, opt.gap_min, false);
    int found = -1;
    bool ambiguous = false;
    for (int i = s.harmonic_dim; i < s.lambda.size(); ++i) {
      const Vec x = s.vectors.col(i);
      const double f = x.dot(hc.up(1, x)) / s.lambda(i);
      if (f >= 0.99) {
        found = i;
        break;
      }
      if (f > 0.01) {
        ambiguous = true;
        break;
      }
    }
    if (found < 0 || ambiguous) continue;
    const double lower_up = s.harmonic_dim > 0 ? std::max(s.lambda(s.harmonic_dim - 1), s.tau_harm) : s.tau_harm;
    pr.sigma_min[1] = std::sqrt(s.lambda(found));
    pr.c[1] = 1.0 / pr.sigma_min[1];
    pr.attaining[1] = s.vectors.col(found);
    pr.gap[1] = s.lambda(found) / lower_up;
    pr.beta[1] = beta;
    if (pr.gap[1] < opt.gap_min) throw Error(ErrorCode::NoSpectralGap, "no gap below the level-1 Poincare eigenvalue");
    return pr;
  }
  throw Error(ErrorCode::SolverDiverged, "could not isolate the lowest up-type mode at level 1");
}

/// Orthogonal Helmholtz decomposition x = range + harmonic + corange at a level.
struct DecompositionResult {
  Vec range_part, harmonic_part, corange_part;
  double residual = 0.0;
  double orthogonality_defect = 0.0;
  int iterations = 0;
};

namespace detail {

inline int cg_cap(int n) { return std::max(50, static_cast<int>(50.0 * std::sqrt(static_cast<double>(n)))); }

/// Column-wise diagonal of C^T D^{-1} C with D the mass diagonal; used as the CG preconditioner.
inline Vec normal_diagonal(const ColSparse& c, const Vec& mdiag) {
  Vec d = Vec::Zero(c.cols());
  for (int j = 0; j < c.outerSize(); ++j)
    for (ColSparse::InnerIterator it(c, j); it; ++it) d(j) += it.value() * it.value() / mdiag(it.row());
  return d;
}

/// Largest column norm of c, a lower bound for its spectral norm.
inline double max_column_norm(const ColSparse& c) {
  double m = 0.0;
  for (int j = 0; j < c.outerSize(); ++j) {
    double s = 0.0;
    for (ColSparse::InnerIterator it(c, j); it; ++it) s += it.value() * it.value();
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

}  // namespace detail

/// M-orthogonal projection onto the range of A_{k-1}; returns the projection.
inline Vec range_projection(const HodgeContext& hc, int k, const Vec& x, const HodgeOptions& opt, int* iters = nullptr) {
  if (k == 0 || hc.dim(k - 1) == 0) return Vec::Zero(x.size());
  const ColSparse& ck = hc.complex().C[k];
  const ColSparse ckt = ck.transpose();
  const Vec b = ckt * x;
  const Vec dg = detail::normal_diagonal(ck, hc.mass_diagonal(k));
  auto res = pcg([&](const Vec& p) { return Vec(ckt * hc.solve_mass(k, Vec(ck * p))); }, b, dg, opt.tol_solver,
                 detail::cg_cap(hc.dim(k - 1)), detail::max_column_norm(ckt) * x.norm());
  if (iters) *iters += res.iterations;
  return hc.solve_mass(k, Vec(ck * res.x));
}

/// M-orthogonal projection onto the range of A_k^*.
inline Vec corange_projection(const HodgeContext& hc, int k, const Vec& x, const HodgeOptions& opt,
                              int* iters = nullptr) {
  if (k == 3 || hc.dim(k + 1) == 0) return Vec::Zero(x.size());
  const ColSparse& c1 = hc.complex().C[k + 1];
  const ColSparse c1t = c1.transpose();
  const Vec b = c1 * x;
  const Vec dg = detail::normal_diagonal(c1t, hc.mass_diagonal(k));
  auto res = pcg([&](const Vec& w) { return Vec(c1 * hc.solve_mass(k, Vec(c1t * w))); }, b, dg, opt.tol_solver,
                 detail::cg_cap(hc.dim(k + 1)), detail::max_column_norm(c1t) * x.norm());
  if (iters) *iters += res.iterations;
  return hc.solve_mass(k, Vec(c1t * res.x));
}

inline DecompositionResult helmholtz(const HodgeContext& hc, int k, const HarmonicBasis& hb, const Vec& x,
                                     const HodgeOptions& opt = {}) {
  DecompositionResult r;
  r.range_part = range_projection(hc, k, x, opt, &r.iterations);
  r.corange_part = corange_projection(hc, k, x, opt, &r.iterations);
  r.harmonic_part = harmonic_projection(hc, hb, x);
  const double nx = hc.norm(k, x);
  if (nx == 0.0) return r;
  r.residual = hc.norm(k, Vec(x - r.range_part - r.harmonic_part - r.corange_part)) / nx;
  const double a = std::abs(hc.inner(k, r.range_part, r.harmonic_part));
  const double b = std::abs(hc.inner(k, r.range_part, r.corange_part));
  const double c = std::abs(hc.inner(k, r.harmonic_part, r.corange_part));
  r.orthogonality_defect = std::max({a, b, c}) / (nx * nx);
  return r;
}

/// Minimal-norm solution of A_k x = y (x orthogonal to ker A_k); NotInRange if y is not in the range.
inline Vec potential_solve(const HodgeContext& hc, int k, const Vec& y, double tol, const HodgeOptions& opt = {}) {
  const double ny = hc.norm(k + 1, y);
  if (ny == 0.0) return Vec::Zero(hc.dim(k));
  const Vec r = range_projection(hc, k + 1, y, opt);
  const double miss = hc.norm(k + 1, Vec(y - r)) / ny;
  if (miss > tol) throw Error(ErrorCode::NotInRange, "right-hand side leaves the range by " + std::to_string(miss));
  const ColSparse& c1 = hc.complex().C[k + 1];
  const ColSparse c1t = c1.transpose();
  const Vec b = hc.M(k + 1) * r;
  const Vec dg = detail::normal_diagonal(c1t, hc.mass_diagonal(k));
  auto res = pcg([&](const Vec& w) { return Vec(c1 * hc.solve_mass(k, Vec(c1t * w))); }, b, dg, opt.tol_solver,
                 detail::cg_cap(hc.dim(k + 1)));
  const Vec x = hc.solve_mass(k, Vec(c1t * res.x));
  const double err = hc.norm(k + 1, Vec(hc.d(k, x) - y)) / ny;
  if (err > tol) throw Error(ErrorCode::NotInRange, "potential residual " + std::to_string(err) + " exceeds tolerance");
  return x;
}

struct CombinedEstimateReport {
  int level = 1;
  int samples = 0;
  double max_ratio = 0.0;
  double extremal_ratio = 0.0;
};

/// ||x||^2 <= c_k^2 ||A_k x||^2 + c_{k-1}^2 ||A_{k-1}^* x||^2 on harmonic-free samples; tight at A_{k-1} of the
/// c_{k-1} attaining vector.
inline double combined_ratio(const HodgeContext& hc, int k, const PoincareReport& pr, const Vec& x) {
  const double nx2 = hc.inner(k, x, x);
  if (nx2 == 0.0) return 0.0;
  const double up = x.dot(hc.up(k, x));
  const double down = x.dot(hc.down(k, x));
  return nx2 / (pr.c[k] * pr.c[k] * up + pr.c[k - 1] * pr.c[k - 1] * down);
}

inline CombinedEstimateReport combined_estimate_check(const HodgeContext& hc, int k, const PoincareReport& pr,
                                                      const HarmonicBasis& hb, int samples, std::uint64_t seed) {
  CombinedEstimateReport rep;
  rep.level = k;
  rep.samples = samples;
  const Mat xs = random_matrix(hc.dim(k), samples, seed);
  for (int i = 0; i < samples; ++i) {
    Vec x = xs.col(i);
    x -= harmonic_projection(hc, hb, x);
    rep.max_ratio = std::max(rep.max_ratio, combined_ratio(hc, k, pr, x));
  }
  const Vec ext = hc.d(k - 1, pr.attaining[k - 1]);
  rep.extremal_ratio = combined_ratio(hc, k, pr, ext);
  return rep;
}

/// Orthogonal projector onto ker A_k, with the alternative-projection checks against a harmonic pre-basis.
struct KernelProjectorReport {
  int level = 0;
  double idempotence = 0.0;      // max ||pi(pi x) - pi x|| / ||x||
  double self_adjointness = 0.0; // max |<pi x, y> - <x, pi y>| / (||x|| ||y||)
  double prebasis_min_sv = 0.0;  // smallest singular value of the Gram of the pre-basis against Harm
  double range_distance = 0.0;   // max distance of (ker cap B-perp) samples from range A_{k-1}
  double kernel_defect = 0.0;    // max ||A_k pi x|| / ||x||
};

inline Vec kernel_projection(const HodgeContext& hc, int k, const Vec& x, const HodgeOptions& opt = {}) {
  return x - corange_projection(hc, k, x, opt);
}

inline KernelProjectorReport kernel_projector_check(const HodgeContext& hc, int k, const HarmonicBasis& hb,
                                                    const Mat& prebasis, int samples, std::uint64_t seed,
                                                    const HodgeOptions& opt = {}) {
  KernelProjectorReport rep;
  rep.level = k;
  const int n = hc.dim(k);
  if (hb.dim() > 0) {
    const Mat g = hb.coords.transpose() * (hc.M(k) * prebasis);
    Eigen::JacobiSVD<Mat> svd(g);
    rep.prebasis_min_sv = svd.singularValues().minCoeff();
  } else {
    rep.prebasis_min_sv = 1.0;
  }
  const Mat xs = random_matrix(n, 2 * samples, seed);
  Mat bq;
  if (prebasis.cols() > 0) bq = m_orthonormalize(prebasis, hc.M(k));
  for (int i = 0; i < samples; ++i) {
    const Vec x = xs.col(2 * i), y = xs.col(2 * i + 1);
    const double nx = hc.norm(k, x), ny = hc.norm(k, y);
    const Vec px = kernel_projection(hc, k, x, opt);
    const Vec py = kernel_projection(hc, k, y, opt);
    const Vec ppx = kernel_projection(hc, k, px, opt);
    rep.idempotence = std::max(rep.idempotence, hc.norm(k, Vec(ppx - px)) / nx);
    rep.self_adjointness = std::max(rep.self_adjointness, std::abs(hc.inner(k, px, y) - hc.inner(k, x, py)) / (nx * ny));
    if (k < 3) rep.kernel_defect = std::max(rep.kernel_defect, hc.norm(k + 1, hc.d(k, px)) / nx);
    Vec z = px;
    if (bq.cols() > 0) z -= bq * (bq.transpose() * (hc.M(k) * z));
    const double nz = hc.norm(k, z);
    if (nz > 0.0) {
      const Vec rz = range_projection(hc, k, z, opt);
      rep.range_distance = std::max(rep.range_distance, hc.norm(k, Vec(z - rz)) / nz);
    }
  }
  return rep;
}

/// Harmonic dimensions for identity, a scalar multiple and seeded random admissible weights.
struct WeightStudy {
  std::vector<std::string> labels;
  std::vector<std::array<int, 2>> dims;  // levels 1 and 2
  bool all_equal = true;
};

inline WeightStudy weight_independence_study(Which which, const VoxelDomain& dom, const BoundaryPartition& part,
                                             const std::vector<std::uint64_t>& seeds, double cond = 1e2,
                                             const BuildOptions& bopt = {}, const HodgeOptions& opt = {}) {
  WeightStudy st;
  auto run = [&](const std::string& label, const Weight& eps, const Weight& mu) {
    const HilbertComplex hc = build_complex(which, dom, part, eps, mu, bopt);
    const HodgeContext ctx(hc);
    st.labels.push_back(label);
    st.dims.push_back({harmonic_fields(ctx, 1, opt).dim(), harmonic_fields(ctx, 2, opt).dim()});
  };
  run("identity", Weight::identity(6), Weight::identity(8));
  run("scaled-2", Weight::scaled(6, 2.0), Weight::scaled(8, 2.0));
  const int nn = dom.grid.num_nodes();
  for (auto s : seeds)
    run("random-" + std::to_string(s), Weight::random(6, nn, s, cond), Weight::random(8, nn, s + 7919, cond));
  for (const auto& d : st.dims)
    if (d != st.dims.front()) st.all_equal = false;
  return st;
}

/// Orthogonal projector onto a polynomial end term and its complement, applied to lattice vectors of the level.
struct EndProjector {
  const PolynomialSpace* space = nullptr;
  const DofSpace* level = nullptr;

  /// Coordinates (in the mass-orthonormal polynomial basis) of the projection of a lattice vector.
  Vec coefficients(const Vec& lattice) const {
    if (!space->active) return Vec();
    return space->basis.transpose() * (level->G * lattice);
  }
  Vec project(const Vec& lattice) const {
    if (!space->active) return Vec::Zero(lattice.size());
    return space->basis * coefficients(lattice);
  }
  Vec complement(const Vec& lattice) const { return lattice - project(lattice); }
};

inline std::array<EndProjector, 2> end_projectors(const HilbertComplex& hc) {
  return {EndProjector{&hc.head, &hc.levels[0]}, EndProjector{&hc.tail, &hc.levels[3]}};
}

}  // namespace bihlab
