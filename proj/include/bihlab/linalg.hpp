#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "diff_ops.hpp"
#include "error.hpp"

namespace bihlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Worker count: hardware concurrency capped by the BIHLAB_THREADS environment variable.
inline int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("BIHLAB_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

/// Runs f(i) for i in [0, n) on up to worker_count() threads; each index is handled by exactly one worker.
inline void parallel_for(int n, const std::function<void(int)>& f) {
  const int w = std::min(worker_count(), n);
  if (w <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < w; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += w) f(i);
    });
  for (auto& th : pool) th.join();
}

/// Cached factorization of a symmetric positive definite sparse matrix.
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(const ColSparse& a) { factor(a); }
  void factor(const ColSparse& a) {
    n_ = static_cast<int>(a.rows());
    if (n_ == 0) return;
    ldlt_.compute(a);
    if (ldlt_.info() != Eigen::Success || (ldlt_.vectorD().array() <= 0.0).any())
      throw Error(ErrorCode::WeightNotSPD, "mass matrix is not positive definite");
  }
  Vec solve(const Vec& b) const { return n_ == 0 ? Vec(b) : Vec(ldlt_.solve(b)); }
  Mat solve(const Mat& b) const { return n_ == 0 ? Mat(b) : Mat(ldlt_.solve(b)); }

 private:
  int n_ = 0;
  Eigen::SimplicialLDLT<ColSparse> ldlt_;
};

/// Cached LDL^T factorization of a symmetric quasi-definite sparse matrix. Pivots of the tiny shifted block can
/// lose digits under fill-reducing orderings, so solves are followed by iterative refinement.
class QuasiDefiniteSolver {
 public:
  void factor(const ColSparse& a) {
    a_ = a;
    ldlt_.compute(a);
    if (ldlt_.info() != Eigen::Success) throw Error(ErrorCode::SolverDiverged, "LDL^T factorization failed");
  }
  Mat solve(const Mat& b, int refinements = 4, double tol = 1e-14) const {
    Mat x = ldlt_.solve(b);
    const double nb = b.norm();
    for (int r = 0; r < refinements && nb > 0.0; ++r) {
      const Mat res = b - a_ * x;
      if (res.norm() <= tol * nb) break;
      x += ldlt_.solve(res);
    }
    return x;
  }

 private:
  ColSparse a_;
  Eigen::SimplicialLDLT<ColSparse, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

/// Symmetric block matrix from square diagonal blocks and off-diagonal couplings (lower part stored in full).
inline ColSparse block_matrix(const std::vector<int>& sizes, const std::vector<std::tuple<int, int, ColSparse>>& blocks) {
  std::vector<int> off(sizes.size() + 1, 0);
  for (std::size_t i = 0; i < sizes.size(); ++i) off[i + 1] = off[i] + sizes[i];
  Triplets t;
  for (const auto& [bi, bj, m] : blocks)
    for (int c = 0; c < m.outerSize(); ++c)
      for (ColSparse::InnerIterator it(m, c); it; ++it) {
        t.emplace_back(off[bi] + it.row(), off[bj] + it.col(), it.value());
        if (bi != bj) t.emplace_back(off[bj] + it.col(), off[bi] + it.row(), it.value());
      }
  ColSparse a(off.back(), off.back());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

struct CgResult {
  Vec x;
  int iterations = 0;
  double rel_residual = 0.0;
};

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// Preconditioned conjugate gradients for a symmetric positive semidefinite operator with a consistent right-hand side.
/// On singular systems rounding leaves a small inconsistent component in b; once the residual stops falling the
/// iteration drifts along the kernel. The best iterate is kept, and the run ends when the residual exceeds 1e3 times
/// its best value or has not improved for `patience` steps. The best iterate is returned if its residual is at most
/// `floor` times max(||b||, bscale); otherwise SolverDiverged is raised. Callers pass bscale ~ ||C|| ||x|| when b = C x
/// may vanish up to rounding, so that a right-hand side made of rounding noise is not mistaken for divergence.
inline CgResult pcg(const std::function<Vec(const Vec&)>& apply, const Vec& b, const Vec& diag, double tol, int max_iter,
                    double bscale = 0.0, double floor = 1e-10, int patience = 250) {
  CgResult res;
  res.x = Vec::Zero(b.size());
  const double bn = b.norm();
  if (bn == 0.0) return res;
  Vec r = b;
  Vec inv = diag.unaryExpr([](double d) { return d > 0.0 ? 1.0 / d : 1.0; });
  Vec z = inv.cwiseProduct(r);
  Vec p = z;
  double rz = r.dot(z);
  Vec best = res.x;
  double best_res = 1.0;
  int best_it = 0;
  auto finish = [&](int it) {
    res.iterations = it;
    if (best_res * bn > floor * std::max(bn, bscale))
      throw Error(ErrorCode::SolverDiverged, "conjugate gradients stalled at relative residual " + sci(best_res));
    res.x = best;
    res.rel_residual = best_res;
    return res;
  };
  for (int it = 1; it <= max_iter; ++it) {
    const Vec ap = apply(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) return finish(it);
    const double alpha = rz / pap;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rel = r.norm() / bn;
    if (rel < best_res) {
      best_res = rel;
      best = res.x;
      best_it = it;
    }
    if (rel <= tol) {
      res.iterations = it;
      res.rel_residual = rel;
      return res;
    }
    if (rel > 1e3 * best_res || it - best_it > patience) return finish(it);
    z = inv.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  if (best_res * bn > floor * std::max(bn, bscale))
    throw Error(ErrorCode::SolverDiverged, "conjugate gradients reached the iteration cap with relative residual " +
                                               sci(best_res));
  return finish(max_iter);
}

/// Seeded standard normal matrix.
inline Mat random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = normal(rng);
  return m;
}

/// M-orthonormalizes the columns of X by Gram-Schmidt with one reorthogonalization; a column that is numerically
/// dependent on the previous ones is replaced by a seeded random vector, so the block keeps its width.
inline Mat m_orthonormalize(const Mat& x, const ColSparse& m, std::uint64_t seed = 0x5eed) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Mat q(n, p), mq(n, p);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (Eigen::Index j = 0; j < p; ++j) {
    Vec v = x.col(j);
    for (int attempt = 0; attempt < 4; ++attempt) {
      double n0 = std::sqrt(std::max(0.0, v.dot(m * v)));
      if (n0 > 0.0) {
        v /= n0;
        for (int pass = 0; pass < 2; ++pass)
          if (j > 0) v -= q.leftCols(j) * (mq.leftCols(j).transpose() * v);
        const Vec mv = m * v;
        const double n1 = std::sqrt(std::max(0.0, v.dot(mv)));
        if (n1 > 1e-8) {
          q.col(j) = v / n1;
          mq.col(j) = mv / n1;
          break;
        }
      }
      for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
      if (attempt == 3) throw Error(ErrorCode::RankDeficient, "cannot extend an M-orthonormal block");
    }
  }
  return q;
}

}  // namespace bihlab
