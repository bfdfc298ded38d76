#pragma once

#include <array>
#include <map>
#include <numeric>
#include <utility>

#include "rational.hpp"
#include "tensor_algebra.hpp"

namespace bihlab {

using MultiIndex = std::array<int, 3>;

inline MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline int order(const MultiIndex& b) { return b[0] + b[1] + b[2]; }
inline MultiIndex unit_index(int axis) {
  MultiIndex e{0, 0, 0};
  e[axis] = 1;
  return e;
}

// A constant-coefficient differential operator between component spaces, stored exactly:
// entry (out, in) is a polynomial sum_beta c_beta d^beta in the commuting partials.
class Symbol {
 public:
  using Poly = std::map<MultiIndex, Rational>;
  using Key = std::pair<int, int>;

  Symbol() = default;
  Symbol(int rows, int cols) : rows_(rows), cols_(cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::map<Key, Poly>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  void add_term(int out, int in, const MultiIndex& beta, const Rational& c) {
    if (c.is_zero()) return;
    auto& poly = terms_[{out, in}];
    Rational& slot = poly[beta];
    slot += c;
    if (slot.is_zero()) {
      poly.erase(beta);
      if (poly.empty()) terms_.erase({out, in});
    }
  }

  static Symbol from_matrix(const RationalMatrix& m) {
    Symbol s(static_cast<int>(m.size()), m.empty() ? 0 : static_cast<int>(m[0].size()));
    for (int r = 0; r < s.rows_; ++r)
      for (int c = 0; c < s.cols_; ++c) s.add_term(r, c, {0, 0, 0}, m[r][c]);
    return s;
  }

  static Symbol identity(int n) {
    Symbol s(n, n);
    for (int i = 0; i < n; ++i) s.add_term(i, i, {0, 0, 0}, 1);
    return s;
  }

  /// Composition (*this) o other.
  Symbol operator*(const Symbol& other) const {
    Symbol s(rows_, other.cols_);
    for (const auto& [ka, pa] : terms_)
      for (const auto& [kb, pb] : other.terms_) {
        if (ka.second != kb.first) continue;
        for (const auto& [ba, ca] : pa)
          for (const auto& [bb, cb] : pb) s.add_term(ka.first, kb.second, ba + bb, ca * cb);
      }
    return s;
  }

  Symbol operator+(const Symbol& other) const {
    Symbol s = *this;
    for (const auto& [k, p] : other.terms_)
      for (const auto& [b, c] : p) s.add_term(k.first, k.second, b, c);
    return s;
  }

  Symbol operator*(const Rational& f) const {
    Symbol s(rows_, cols_);
    for (const auto& [k, p] : terms_)
      for (const auto& [b, c] : p) s.add_term(k.first, k.second, b, c * f);
    return s;
  }

  Symbol operator-(const Symbol& other) const { return *this + other * Rational(-1); }

  /// Highest total derivative order appearing in any entry.
  int max_order() const {
    int o = 0;
    for (const auto& [k, p] : terms_)
      for (const auto& [b, c] : p) o = std::max(o, order(b));
    return o;
  }

  /// Least common multiple of all coefficient denominators.
  std::int64_t lcd() const {
    std::int64_t l = 1;
    for (const auto& [k, p] : terms_)
      for (const auto& [b, c] : p) l = std::lcm(l, c.den());
    return l;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::map<Key, Poly> terms_;
};

namespace sym_ops {

inline int levi_civita(int i, int j, int k) { return ((i - j) * (j - k) * (k - i)) / 2; }

inline Symbol partial(int axis) {
  Symbol s(1, 1);
  s.add_term(0, 0, unit_index(axis), 1);
  return s;
}

inline Symbol grad() {
  Symbol s(3, 1);
  for (int k = 0; k < 3; ++k) s.add_term(k, 0, unit_index(k), 1);
  return s;
}

inline Symbol rot() {
  Symbol s(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        if (const int e = levi_civita(i, j, k)) s.add_term(i, k, unit_index(j), e);
  return s;
}

inline Symbol div() {
  Symbol s(1, 3);
  for (int j = 0; j < 3; ++j) s.add_term(0, j, unit_index(j), 1);
  return s;
}

/// (Grad v)_ij = d_j v_i, flattened row-major.
inline Symbol Grad() {
  Symbol s(9, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s.add_term(flat(i, j), i, unit_index(j), 1);
  return s;
}

/// Row-wise rotation: (Rot M)_ij = sum_kl eps_jkl d_k M_il.
inline Symbol Rot() {
  Symbol s(9, 9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          if (const int e = levi_civita(j, k, l)) s.add_term(flat(i, j), flat(i, l), unit_index(k), e);
  return s;
}

/// Row-wise divergence: (Div M)_i = sum_j d_j M_ij.
inline Symbol Div() {
  Symbol s(3, 9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s.add_term(i, flat(i, j), unit_index(j), 1);
  return s;
}

inline Symbol transpose9() {
  Symbol s(9, 9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s.add_term(flat(j, i), flat(i, j), {0, 0, 0}, 1);
  return s;
}

inline Symbol iS() { return Symbol::from_matrix(iota_S_rational()); }
inline Symbol iS_adj() { return Symbol::from_matrix(iota_S_adj_rational()); }
inline Symbol iT() { return Symbol::from_matrix(iota_T_rational()); }
inline Symbol iT_adj() { return Symbol::from_matrix(iota_T_adj_rational()); }

inline Symbol Gradgrad_S() { return iS_adj() * Grad() * grad(); }
inline Symbol Rot_S() { return iT_adj() * Rot() * iS(); }
inline Symbol Div_T() { return Div() * iT(); }
inline Symbol devGrad_T() { return iT_adj() * Grad(); }
inline Symbol symRot_T() { return iS_adj() * Rot() * iT(); }
inline Symbol divDiv_S() { return div() * Div() * iS(); }

}  // namespace sym_ops
}  // namespace bihlab
