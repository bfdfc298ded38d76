#pragma once

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "hodge_lab.hpp"

namespace bihlab {

/// Symmetric eigendecomposition through LAPACK dsyevd; eigenvalues ascending.
inline void dense_symmetric_eigen(const Mat& a, Vec& values, Mat& vectors) {
  const int n = static_cast<int>(a.rows());
  vectors = a;
  values.resize(n);
  if (n == 0) return;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, vectors.data(), n, values.data());
  if (info != 0) throw Error(ErrorCode::SolverDiverged, "dsyevd failed with info " + std::to_string(info));
}

/// Dense reference for one level: ranks, harmonic dimension, smallest nonzero eigenvalue of A_k^* A_k and
/// orthogonal Helmholtz projectors, all from full eigendecompositions in mass-orthonormal coordinates.
struct DenseLevelOracle {
  int level = 0;
  int dim = 0;
  int rank_up = 0;
  int rank_down = 0;
  int harmonic_dim = 0;
  double lambda_up_min = std::numeric_limits<double>::infinity();  // smallest nonzero eigenvalue of A_k^* A_k
  double tau = 0.0;
  double gap = std::numeric_limits<double>::infinity();
  Mat chol;      // lower Cholesky factor of M_k
  Mat v_up;      // orthonormal basis (in L^T x coordinates) of range A_k^*
  Mat v_down;    // orthonormal basis of range A_{k-1}
  Vec up_spectrum;

  int harmonic() const { return harmonic_dim; }
  Vec project(const Mat& v, const Vec& x) const {
    const Vec y = chol.transpose() * x;
    return chol.transpose().triangularView<Eigen::Upper>().solve(Vec(v * (v.transpose() * y)));
  }
  Vec range_part(const Vec& x) const { return project(v_down, x); }
  Vec corange_part(const Vec& x) const { return project(v_up, x); }
  Vec harmonic_part(const Vec& x) const { return x - range_part(x) - corange_part(x); }
};

namespace detail {

inline Mat dense_chol(const ColSparse& m) {
  Eigen::LLT<Mat> llt{Mat(m)};
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::WeightNotSPD, "mass matrix is not positive definite");
  return llt.matrixL();
}

/// Eigenvalues of a Gram matrix above tau with their eigenvectors; raises NoSpectralGap on an ambiguous cut.
inline int dense_rank(const Vec& ev, double tau, double gap_min, double& gap) {
  const int n = static_cast<int>(ev.size());
  int r = 0;
  for (int i = 0; i < n; ++i)
    if (ev(i) > tau) ++r;
  const int z = n - r;
  if (r > 0) {
    const double kept = z > 0 ? std::max(ev(z - 1), tau) : tau;
    gap = std::min(gap, ev(z) / kept);
  }
  if (gap < gap_min) throw Error(ErrorCode::NoSpectralGap, "dense oracle rank cut is ambiguous");
  return r;
}

}  // namespace detail

inline DenseLevelOracle dense_oracle(const HodgeContext& hc, int k, const HodgeOptions& opt = {}) {
  DenseLevelOracle o;
  o.level = k;
  o.dim = hc.dim(k);
  const int n = o.dim;
  if (n == 0) return o;
  const CoordComplex& c = hc.complex();
  o.chol = detail::dense_chol(c.M[k]);
  auto reduced = [&](int j) -> Mat {  // L_{j+1}^{-1} C_{j+1} L_j^{-T}
    const Mat lj = j == k ? o.chol : detail::dense_chol(c.M[j]);
    const Mat lj1 = j + 1 == k ? o.chol : detail::dense_chol(c.M[j + 1]);
    Mat a = Mat(c.C[j + 1]);
    a = lj1.triangularView<Eigen::Lower>().solve(a);
    a = lj.triangularView<Eigen::Lower>().solve(Mat(a.transpose())).transpose();
    return a;
  };
  Mat up = Mat::Zero(n, n), down = Mat::Zero(n, n);
  if (k < 3 && hc.dim(k + 1) > 0) {
    const Mat a = reduced(k);
    up = a.transpose() * a;
  }
  if (k > 0 && hc.dim(k - 1) > 0) {
    const Mat a = reduced(k - 1);
    down = a * a.transpose();
  }
  Vec eu, ed;
  Mat vu, vd;
  dense_symmetric_eigen(up, eu, vu);
  dense_symmetric_eigen(down, ed, vd);
  const double lmax = std::max(eu.size() ? eu.maxCoeff() : 0.0, ed.size() ? ed.maxCoeff() : 0.0);
  o.tau = opt.tol_harm * lmax;
  o.rank_up = detail::dense_rank(eu, o.tau, opt.gap_min, o.gap);
  o.rank_down = detail::dense_rank(ed, o.tau, opt.gap_min, o.gap);
  o.harmonic_dim = n - o.rank_up - o.rank_down;
  o.v_up = vu.rightCols(o.rank_up);
  o.v_down = vd.rightCols(o.rank_down);
  o.up_spectrum = eu;
  if (o.rank_up > 0) o.lambda_up_min = eu(n - o.rank_up);
  return o;
}

}  // namespace bihlab
