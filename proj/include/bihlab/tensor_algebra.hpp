#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "error.hpp"
#include "rational.hpp"

namespace bihlab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Symmetric tensor stored by entries in the order 11, 22, 33, 12, 13, 23.
using SymMat3 = Eigen::Matrix<double, 6, 1>;
/// Deviatoric tensor stored by entries 11, 12, 13, 21, 22, 23, 31, 32; entry 33 is -(11+22).
using DevMat3 = Eigen::Matrix<double, 8, 1>;
using RationalMatrix = std::vector<std::vector<Rational>>;

inline constexpr std::array<std::pair<int, int>, 6> kSymIndex{
    {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};
inline constexpr std::array<std::pair<int, int>, 8> kDevIndex{
    {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 0}, {2, 1}}};

/// Position of entry (r, c) in the row-major flattening of a 3x3 matrix.
constexpr int flat(int r, int c) { return 3 * r + c; }

constexpr double kTauAlg = 1e-12;

inline Mat3 spn(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v(2), v(1), v(2), 0.0, -v(0), -v(1), v(0), 0.0;
  return m;
}

inline Mat3 sym(const Mat3& m) { return 0.5 * (m + m.transpose()); }
inline Mat3 skw(const Mat3& m) { return 0.5 * (m - m.transpose()); }
inline double tr(const Mat3& m) { return m.trace(); }
inline Mat3 dev(const Mat3& m) { return m - (m.trace() / 3.0) * Mat3::Identity(); }

/// Inverse of spn on skew matrices. Throws NotSkew when the symmetric part is not negligible.
inline Vec3 spn_inv(const Mat3& m, double tol = kTauAlg) {
  const double s = sym(m).norm();
  if (s > tol * m.norm()) throw Error(ErrorCode::NotSkew, "spn_inv on a matrix with nonzero symmetric part");
  const Mat3 k = skw(m);
  return Vec3(k(2, 1), k(0, 2), k(1, 0));
}

inline Mat3 iota_S(const SymMat3& x) {
  Mat3 m;
  for (int c = 0; c < 6; ++c) {
    const auto [a, b] = kSymIndex[c];
    m(a, b) = x(c);
    m(b, a) = x(c);
  }
  return m;
}

inline SymMat3 iota_S_adj(const Mat3& m) {
  SymMat3 x;
  for (int c = 0; c < 6; ++c) {
    const auto [a, b] = kSymIndex[c];
    x(c) = 0.5 * (m(a, b) + m(b, a));
  }
  return x;
}

inline Mat3 iota_T(const DevMat3& x) {
  Mat3 m;
  for (int c = 0; c < 8; ++c) {
    const auto [a, b] = kDevIndex[c];
    m(a, b) = x(c);
  }
  m(2, 2) = -x(0) - x(4);
  return m;
}

inline DevMat3 iota_T_adj(const Mat3& m) {
  const Mat3 d = dev(m);
  DevMat3 x;
  for (int c = 0; c < 8; ++c) {
    const auto [a, b] = kDevIndex[c];
    x(c) = d(a, b);
  }
  return x;
}

/// Gram matrix of the symmetric storage: <iota_S x, iota_S y>_F = x^T G y.
inline Eigen::Matrix<double, 6, 6> sym_gram() {
  Eigen::Matrix<double, 6, 6> g = Eigen::Matrix<double, 6, 6>::Zero();
  for (int c = 0; c < 6; ++c) g(c, c) = c < 3 ? 1.0 : 2.0;
  return g;
}

/// Gram matrix of the deviatoric storage, iota_T^T iota_T.
inline Eigen::Matrix<double, 8, 8> dev_gram() {
  Eigen::Matrix<double, 8, 8> g = Eigen::Matrix<double, 8, 8>::Identity();
  g(0, 0) = 2.0;
  g(4, 4) = 2.0;
  g(0, 4) = 1.0;
  g(4, 0) = 1.0;
  return g;
}

inline double sym_inner(const SymMat3& x, const SymMat3& y) { return x.dot(sym_gram() * y); }
inline double dev_inner(const DevMat3& x, const DevMat3& y) { return x.dot(dev_gram() * y); }

/// Exact 9x6 matrix of iota_S acting on flattened tensors.
inline RationalMatrix iota_S_rational() {
  RationalMatrix m(9, std::vector<Rational>(6));
  for (int c = 0; c < 6; ++c) {
    const auto [a, b] = kSymIndex[c];
    m[flat(a, b)][c] = 1;
    m[flat(b, a)][c] = 1;
  }
  return m;
}

/// Exact 6x9 matrix of iota_S^*, the Gram-weighted adjoint of iota_S.
inline RationalMatrix iota_S_adj_rational() {
  RationalMatrix m(6, std::vector<Rational>(9));
  for (int c = 0; c < 6; ++c) {
    const auto [a, b] = kSymIndex[c];
    if (a == b) {
      m[c][flat(a, a)] = 1;
    } else {
      m[c][flat(a, b)] = Rational(1, 2);
      m[c][flat(b, a)] = Rational(1, 2);
    }
  }
  return m;
}

inline RationalMatrix iota_T_rational() {
  RationalMatrix m(9, std::vector<Rational>(8));
  for (int c = 0; c < 8; ++c) {
    const auto [a, b] = kDevIndex[c];
    m[flat(a, b)][c] = 1;
  }
  m[flat(2, 2)][0] = -1;
  m[flat(2, 2)][4] = -1;
  return m;
}

inline RationalMatrix iota_T_adj_rational() {
  RationalMatrix m(8, std::vector<Rational>(9));
  for (int c = 0; c < 8; ++c) {
    const auto [a, b] = kDevIndex[c];
    if (a != b) {
      m[c][flat(a, b)] = 1;
      continue;
    }
    const int o = a == 0 ? 1 : 0;
    m[c][flat(a, a)] = Rational(2, 3);
    m[c][flat(o, o)] = Rational(-1, 3);
    m[c][flat(2, 2)] = Rational(-1, 3);
  }
  return m;
}

inline Eigen::MatrixXd to_dense(const RationalMatrix& m) {
  Eigen::MatrixXd d(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c) d(r, c) = m[r][c].to_double();
  return d;
}

/// Factor L with L^T L equal to the storage Gram of a component space of size 1, 3, 6 or 8.
inline Eigen::MatrixXd isometry_factor(int ncomp) {
  if (ncomp == 6) return Eigen::MatrixXd(sym_gram()).llt().matrixU();
  if (ncomp == 8) return Eigen::MatrixXd(dev_gram()).llt().matrixU();
  return Eigen::MatrixXd::Identity(ncomp, ncomp);
}

inline Eigen::MatrixXd storage_gram(int ncomp) {
  if (ncomp == 6) return sym_gram();
  if (ncomp == 8) return dev_gram();
  return Eigen::MatrixXd::Identity(ncomp, ncomp);
}

}  // namespace bihlab
