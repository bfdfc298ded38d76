#pragma once

#include <lapacke.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "complex_builder.hpp"
#include "error.hpp"
#include "linalg.hpp"

namespace bihlab {

/// Full singular value decomposition through LAPACK dgesdd: singular values descending and all right singular vectors.
inline void dense_svd_right(const Mat& a, Vec& s, Mat& v) {
  const int m = static_cast<int>(a.rows()), n = static_cast<int>(a.cols());
  Mat work = a;
  s.resize(std::min(m, n));
  Mat u(m, m);
  Mat vt(n, n);
  if (m == 0 || n == 0) {
    v = Mat::Identity(n, n);
    return;
  }
  const lapack_int info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'A', m, n, work.data(), m, s.data(), u.data(), m,
                                         vt.data(), n);
  if (info != 0) throw Error(ErrorCode::RankDeficient, "dgesdd failed with info " + std::to_string(info));
  v = vt.transpose();
}

/// Orthonormal lattice basis of the weak boundary-condition space at level k: lattice fields whose
/// integration-by-parts residual against every Gamma_n test output of d_k vanishes. Columns no constraint touches
/// pass through unchanged; the constrained block is handled by a dense SVD with a relative rank cut.
struct WeakSpace {
  Mat basis;
  double gap = std::numeric_limits<double>::infinity();
  int constraints = 0;
};

inline WeakSpace weak_bc_space(const HilbertComplex& hc, int k, double tau_sub = 1e-8, double gap_min = 1e2) {
  if (k < 0 || k > 2) throw Error(ErrorCode::ShapeMismatch, "weak spaces are defined for levels 0..2");
  if (hc.model != BoundaryModel::Staggered) throw Error(ErrorCode::ConfigError, "weak spaces need the staggered model");
  const SparseOp& leak = hc.leak[k];
  const int n = hc.levels[k].lattice_size();
  std::vector<int> touched_of(n, -1), touched, free;
  for (int r = 0; r < leak.outerSize(); ++r)
    for (SparseOp::InnerIterator it(leak, r); it; ++it)
      if (it.value() != 0.0 && touched_of[it.col()] < 0) {
        touched_of[it.col()] = static_cast<int>(touched.size());
        touched.push_back(static_cast<int>(it.col()));
      }
  for (int j = 0; j < n; ++j)
    if (touched_of[j] < 0) free.push_back(j);

  WeakSpace ws;
  ws.constraints = static_cast<int>(leak.rows());
  const int t = static_cast<int>(touched.size());
  Mat null_block(t, 0);
  if (t > 0) {
    Mat a = Mat::Zero(leak.rows(), t);
    for (int r = 0; r < leak.outerSize(); ++r)
      for (SparseOp::InnerIterator it(leak, r); it; ++it) a(r, touched_of[it.col()]) += it.value();
    Vec s;
    Mat v;
    dense_svd_right(a, s, v);
    const double thr = tau_sub * (s.size() ? s(0) : 0.0);
    int rank = 0;
    while (rank < s.size() && s(rank) > thr) ++rank;
    if (rank > 0) {
      const double below = rank < s.size() ? std::max(s(rank), std::numeric_limits<double>::min()) : thr;
      ws.gap = s(rank - 1) / below;
    }
    if (ws.gap < gap_min)
      throw Error(ErrorCode::RankDeficient, "singular value gap " + std::to_string(ws.gap) + " at the weak-space rank cut");
    null_block = v.rightCols(t - rank);
  }
  ws.basis = Mat::Zero(n, static_cast<Eigen::Index>(free.size()) + null_block.cols());
  for (std::size_t i = 0; i < free.size(); ++i) ws.basis(free[i], static_cast<Eigen::Index>(i)) = 1.0;
  for (int c = 0; c < null_block.cols(); ++c)
    for (int i = 0; i < t; ++i) ws.basis(touched[i], static_cast<Eigen::Index>(free.size()) + c) = null_block(i, c);
  return ws;
}

struct WeakStrongComparison {
  int level = 0;
  std::string op_name;
  int dim_strong = 0;
  int dim_weak = 0;
  double sin_max_angle = 0.0;    // largest principal angle between the two subspaces
  double strong_in_weak = 0.0;   // residual of the strong basis after projection onto the weak space
  double gap = 0.0;
  bool pass = false;
};

/// Largest principal-angle sine between the column spans of two orthonormal bases of equal dimension.
inline double max_angle_sine(const Mat& qa, const Mat& qb) {
  if (qa.cols() == 0 && qb.cols() == 0) return 0.0;
  if (qa.cols() != qb.cols()) return 1.0;
  const Mat r = qb - qa * (qa.transpose() * qb);
  const Mat g = r.transpose() * r;
  Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

inline WeakStrongComparison compare_weak_strong(const HilbertComplex& hc, int k, double angle_tol = 1e-6,
                                                double tau_sub = 1e-8) {
  WeakStrongComparison cmp;
  cmp.level = k;
  cmp.op_name = hc.def.op_names[k];
  const WeakSpace ws = weak_bc_space(hc, k, tau_sub);
  cmp.gap = ws.gap;
  cmp.dim_weak = static_cast<int>(ws.basis.cols());
  const Mat b = Mat(hc.levels[k].B);
  Eigen::HouseholderQR<Mat> qr(b);
  const Mat qs = qr.householderQ() * Mat::Identity(b.rows(), b.cols());
  cmp.dim_strong = static_cast<int>(b.cols());
  const Mat res = qs - ws.basis * (ws.basis.transpose() * qs);
  cmp.strong_in_weak = qs.cols() ? res.cwiseAbs().maxCoeff() : 0.0;
  cmp.sin_max_angle = max_angle_sine(ws.basis, qs);
  cmp.pass = cmp.dim_weak == cmp.dim_strong && cmp.sin_max_angle < angle_tol;
  return cmp;
}

}  // namespace bihlab
