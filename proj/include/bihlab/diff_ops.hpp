#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <random>
#include <ostream>
#include <string>
#include <vector>

#include "domain_grid.hpp"
#include "error.hpp"
#include "symbol.hpp"
#include "tensor_algebra.hpp"

namespace bihlab {

using SparseOp = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using ColSparse = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

enum class Rank { Scalar, Vector, Sym, Dev };

inline int num_components(Rank r) {
  switch (r) {
    case Rank::Scalar: return 1;
    case Rank::Vector: return 3;
    case Rank::Sym: return 6;
    case Rank::Dev: return 8;
  }
  return 0;
}

inline const char* rank_name(Rank r) {
  switch (r) {
    case Rank::Scalar: return "scalar";
    case Rank::Vector: return "vector";
    case Rank::Sym: return "sym";
    case Rank::Dev: return "dev";
  }
  return "?";
}

inline Rank rank_from_name(const std::string& s) {
  if (s == "scalar") return Rank::Scalar;
  if (s == "vector") return Rank::Vector;
  if (s == "sym") return Rank::Sym;
  if (s == "dev") return Rank::Dev;
  throw Error(ErrorCode::ConfigError, "unknown field rank '" + s + "'");
}

/// Grid-sampled field on the full node box; value of component c at node i is values[c*N + i].
struct Field {
  Rank rank = Rank::Scalar;
  GridSpec grid;
  Eigen::VectorXd values;

  Field() = default;
  Field(Rank r, const GridSpec& g) : rank(r), grid(g), values(Eigen::VectorXd::Zero(num_components(r) * g.num_nodes())) {}

  int ncomp() const { return num_components(rank); }
  double& at(int c, int node) { return values[c * grid.num_nodes() + node]; }
  double at(int c, int node) const { return values[c * grid.num_nodes() + node]; }
};

/// Forward difference along `axis` on the full node box; rows of nodes without a forward neighbour are zero.
inline SparseOp partial(int axis, const GridSpec& g) {
  const int n = g.num_nodes();
  Triplets t;
  t.reserve(2 * n);
  const double s = 1.0 / g.h;
  for (int i = 0; i < n; ++i) {
    Index3 x = g.coords(i);
    if (x[axis] + 1 >= g.dims[axis]) continue;
    x[axis] += 1;
    t.emplace_back(i, g.index(x), s);
    t.emplace_back(i, i, -s);
  }
  SparseOp d(n, n);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

/// Backward difference along `axis`; the value below the first node is taken as zero.
inline SparseOp backward_partial(int axis, const GridSpec& g) {
  const int n = g.num_nodes();
  Triplets t;
  t.reserve(2 * n);
  const double s = 1.0 / g.h;
  for (int i = 0; i < n; ++i) {
    Index3 x = g.coords(i);
    t.emplace_back(i, i, s);
    if (x[axis] == 0) continue;
    x[axis] -= 1;
    t.emplace_back(i, g.index(x), -s);
  }
  SparseOp d(n, n);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

enum class Stencil { Forward, Backward };

/// Collocated assembly of a symbol on the full box: each entry becomes a product of one-sided difference matrices.
inline SparseOp collocated(const Symbol& s, const GridSpec& g, Stencil st = Stencil::Forward) {
  const int n = g.num_nodes();
  const bool fw = st == Stencil::Forward;
  const SparseOp d[3] = {fw ? partial(0, g) : backward_partial(0, g), fw ? partial(1, g) : backward_partial(1, g),
                         fw ? partial(2, g) : backward_partial(2, g)};
  SparseOp id(n, n);
  id.setIdentity();
  Triplets t;
  for (const auto& [key, poly] : s.terms()) {
    SparseOp block(n, n);
    for (const auto& [beta, c] : poly) {
      SparseOp term = id;
      for (int m = 0; m < 3; ++m)
        for (int k = 0; k < beta[m]; ++k) term = SparseOp(d[m] * term);
      block += c.to_double() * term;
    }
    for (int r = 0; r < n; ++r)
      for (SparseOp::InnerIterator it(block, r); it; ++it)
        t.emplace_back(key.first * n + r, key.second * n + it.col(), it.value());
  }
  SparseOp out(s.rows() * n, s.cols() * n);
  out.setFromTriplets(t.begin(), t.end());
  out.prune(0.0);
  return out;
}

struct VectorOps {
  SparseOp grad, rot, div, Grad, Rot, Div;
};

inline VectorOps assemble_vector_ops(const GridSpec& g) {
  return {collocated(sym_ops::grad(), g), collocated(sym_ops::rot(), g), collocated(sym_ops::div(), g),
          collocated(sym_ops::Grad(), g), collocated(sym_ops::Rot(), g), collocated(sym_ops::Div(), g)};
}

struct BiharmonicOps {
  SparseOp Gradgrad_S, Rot_StoT, Div_T, devGrad_T, symRot_TtoS, divDiv_S;
};

inline BiharmonicOps assemble_biharmonic_ops(const GridSpec& g) {
  using namespace sym_ops;
  return {collocated(Gradgrad_S(), g), collocated(Rot_S(), g),     collocated(Div_T(), g),
          collocated(devGrad_T(), g),  collocated(symRot_T(), g), collocated(divDiv_S(), g)};
}

/// Row and column selection of a collocated block operator by node masks (one mask per side, all components).
inline SparseOp restrict_op(const SparseOp& op, const DofMask& in, const DofMask& out) {
  const int nin = static_cast<int>(in.keep.size());
  const int nout = static_cast<int>(out.keep.size());
  if (op.cols() % nin != 0 || op.rows() % nout != 0) throw Error(ErrorCode::ShapeMismatch, "mask and operator sizes differ");
  std::vector<int> col_map(op.cols(), -1), row_map(op.rows(), -1);
  int nc = 0, nr = 0;
  for (int j = 0; j < op.cols(); ++j)
    if (in.keep[j % nin]) col_map[j] = nc++;
  for (int i = 0; i < op.rows(); ++i)
    if (out.keep[i % nout]) row_map[i] = nr++;
  Triplets t;
  for (int i = 0; i < op.rows(); ++i) {
    if (row_map[i] < 0) continue;
    for (SparseOp::InnerIterator it(op, i); it; ++it)
      if (col_map[it.col()] >= 0) t.emplace_back(row_map[i], col_map[it.col()], it.value());
  }
  SparseOp r(nr, nc);
  r.setFromTriplets(t.begin(), t.end());
  return r;
}

/// Largest entry of op that connects a kept column to a dropped row. Zero means the masked operator maps the
/// masked domain into the masked codomain, so compositions of restrictions equal restrictions of compositions.
inline double restriction_leak(const SparseOp& op, const DofMask& in, const DofMask& out) {
  const int nin = static_cast<int>(in.keep.size());
  const int nout = static_cast<int>(out.keep.size());
  if (op.cols() % nin != 0 || op.rows() % nout != 0) throw Error(ErrorCode::ShapeMismatch, "mask and operator sizes differ");
  double leak = 0.0;
  for (int i = 0; i < op.rows(); ++i) {
    if (out.keep[i % nout]) continue;
    for (SparseOp::InnerIterator it(op, i); it; ++it)
      if (in.keep[it.col() % nin]) leak = std::max(leak, std::abs(it.value()));
  }
  return leak;
}

/// Staggered lattice of degrees of freedom: component c at node x stands for the node box [x, x + reduction[c]],
/// and it exists iff that whole box consists of active nodes.
struct LatticeLayout {
  GridSpec grid;
  Rank rank = Rank::Scalar;
  std::vector<MultiIndex> reduction;
  std::vector<int> dof_of;                 // component*N + node -> dof or -1
  std::vector<std::pair<int, int>> dofs;   // dof -> (component, node)

  int size() const { return static_cast<int>(dofs.size()); }
  int ncomp() const { return num_components(rank); }
  int find(int comp, const Index3& x) const {
    if (!grid.contains(x)) return -1;
    return dof_of[comp * grid.num_nodes() + grid.index(x)];
  }
};

inline bool footprint_active(const VoxelDomain& dom, const Index3& x, const MultiIndex& a) {
  for (int m = 0; m < 3; ++m)
    if (x[m] < 0 || x[m] + a[m] >= dom.grid.dims[m]) return false;
  for (int z = x[2]; z <= x[2] + a[2]; ++z)
    for (int y = x[1]; y <= x[1] + a[1]; ++y)
      for (int w = x[0]; w <= x[0] + a[0]; ++w)
        if (!dom.active[dom.grid.index({w, y, z})]) return false;
  return true;
}

inline LatticeLayout make_layout(const VoxelDomain& dom, Rank rank, const std::vector<MultiIndex>& reduction) {
  LatticeLayout L;
  L.grid = dom.grid;
  L.rank = rank;
  L.reduction = reduction;
  const int n = dom.grid.num_nodes();
  L.dof_of.assign(static_cast<std::size_t>(num_components(rank)) * n, -1);
  for (int c = 0; c < num_components(rank); ++c)
    for (int i = 0; i < n; ++i)
      if (footprint_active(dom, dom.grid.coords(i), reduction[c])) {
        L.dof_of[c * n + i] = L.size();
        L.dofs.emplace_back(c, i);
      }
  return L;
}

/// Forward-difference stencil weight of input offset gamma in d^beta.
inline std::int64_t stencil_weight(const MultiIndex& beta, const MultiIndex& gamma) {
  std::int64_t w = 1;
  for (int m = 0; m < 3; ++m) {
    std::int64_t binom = 1;
    for (int k = 0; k < gamma[m]; ++k) binom = binom * (beta[m] - k) / (k + 1);
    w *= ((beta[m] - gamma[m]) % 2 ? -1 : 1) * binom;
  }
  return w;
}

/// Output reductions implied by an operator and its input reductions; throws if the staggering is inconsistent.
inline std::vector<MultiIndex> forward_reductions(const Symbol& s, const std::vector<MultiIndex>& in) {
  std::vector<MultiIndex> out(s.rows(), {-1, -1, -1});
  for (const auto& [key, poly] : s.terms())
    for (const auto& [beta, c] : poly) {
      const MultiIndex r = in[key.second] + beta;
      if (out[key.first][0] >= 0 && out[key.first] != r)
        throw Error(ErrorCode::ShapeMismatch, "operator is not compatible with a staggered layout");
      out[key.first] = r;
    }
  return out;
}

inline std::vector<MultiIndex> backward_reductions(const Symbol& s, const std::vector<MultiIndex>& out) {
  std::vector<MultiIndex> in(s.cols(), {-1, -1, -1});
  for (const auto& [key, poly] : s.terms())
    for (const auto& [beta, c] : poly) {
      const MultiIndex& o = out[key.first];
      const MultiIndex r{o[0] - beta[0], o[1] - beta[1], o[2] - beta[2]};
      if (in[key.second][0] >= 0 && in[key.second] != r)
        throw Error(ErrorCode::ShapeMismatch, "operator is not compatible with a staggered layout");
      in[key.second] = r;
    }
  return in;
}

/// Operator with exact integer numerators; the represented matrix is scale * numer.
struct ExactOp {
  SparseOp numer;
  double scale = 1.0;
  SparseOp value() const { return SparseOp(scale * numer); }
};

/// Visits every (input offset, integer weight) of output component `o` of symbol `s` scaled by `lcd`.
template <class F>
void for_each_stencil(const Symbol& s, int o, std::int64_t lcd, F&& f) {
  for (const auto& [key, poly] : s.terms()) {
    if (key.first != o) continue;
    for (const auto& [beta, c] : poly) {
      const std::int64_t coef = c.num() * (lcd / c.den());
      for (int g2 = 0; g2 <= beta[2]; ++g2)
        for (int g1 = 0; g1 <= beta[1]; ++g1)
          for (int g0 = 0; g0 <= beta[0]; ++g0) {
            const MultiIndex gamma{g0, g1, g2};
            f(key.second, gamma, coef * stencil_weight(beta, gamma));
          }
    }
  }
}

/// Assembles a homogeneous symbol between two staggered layouts of the same grid.
inline ExactOp assemble_lattice(const Symbol& s, const LatticeLayout& in, const LatticeLayout& out) {
  const std::int64_t lcd = s.lcd();
  const int ord = s.max_order();
  Triplets t;
  for (int r = 0; r < out.size(); ++r) {
    const auto [o, node] = out.dofs[r];
    const Index3 y = out.grid.coords(node);
    for_each_stencil(s, o, lcd, [&](int c, const MultiIndex& gamma, std::int64_t w) {
      const int j = in.find(c, {y[0] + gamma[0], y[1] + gamma[1], y[2] + gamma[2]});
      if (j >= 0) t.emplace_back(r, j, static_cast<double>(w));
    });
  }
  ExactOp op;
  op.numer = SparseOp(out.size(), in.size());
  op.numer.setFromTriplets(t.begin(), t.end());
  op.numer.prune(0.0);
  op.scale = 1.0 / (static_cast<double>(lcd) * std::pow(in.grid.h, ord));
  return op;
}

/// M_in^{-1} op^T M_out for symmetric positive definite mass matrices.
inline SparseOp weighted_adjoint(const SparseOp& op, const SparseOp& m_in, const SparseOp& m_out) {
  Eigen::SimplicialLDLT<ColSparse> ldlt;
  ldlt.compute(ColSparse(m_in));
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw Error(ErrorCode::WeightNotSPD, "input mass matrix is not positive definite");
  const ColSparse rhs = ColSparse(op.transpose()) * ColSparse(m_out);
  ColSparse x = ldlt.solve(rhs);
  x.prune(1e-300, 1.0);
  return SparseOp(x);
}

inline void write_sparseop(std::ostream& os, const SparseOp& op) {
  os << "sparseop " << op.rows() << ' ' << op.cols() << ' ' << op.nonZeros() << '\n';
  os << std::setprecision(17);
  for (int r = 0; r < op.outerSize(); ++r)
    for (SparseOp::InnerIterator it(op, r); it; ++it) os << r << ' ' << it.col() << ' ' << it.value() << '\n';
}

inline void export_sparseop(const std::string& path, const SparseOp& op) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_sparseop(out, op);
}

inline SparseOp read_sparseop(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string magic;
  long rows, cols, nnz;
  in >> magic >> rows >> cols >> nnz;
  if (!in || magic != "sparseop") throw Error(ErrorCode::HeaderMismatch, "bad sparseop header");
  Triplets t;
  for (long k = 0; k < nnz; ++k) {
    long r, c;
    double v;
    if (!(in >> r >> c >> v)) throw Error(ErrorCode::IoError, "truncated sparseop payload");
    t.emplace_back(r, c, v);
  }
  SparseOp op(rows, cols);
  op.setFromTriplets(t.begin(), t.end());
  return op;
}

inline double max_abs(const SparseOp& a) {
  double m = 0.0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseOp::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

/// Pointwise Frobenius product of two fields of equal rank, summed over nodes with the cell volume h^3.
inline double field_inner(const Field& a, const Field& b) {
  const int n = a.grid.num_nodes(), nc = a.ncomp();
  const Eigen::MatrixXd gram = storage_gram(nc);
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < nc; ++c)
      for (int e = 0; e < nc; ++e)
        if (gram(c, e) != 0.0) s += a.at(c, i) * gram(c, e) * b.at(e, i);
  return s * a.grid.h * a.grid.h * a.grid.h;
}

/// Random field that vanishes on all nodes within `margin` of the box boundary.
inline Field masked_random_field(Rank r, const GridSpec& g, int margin, std::uint64_t seed) {
  Field f(r, g);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int c = 0; c < f.ncomp(); ++c)
    for (int i = 0; i < g.num_nodes(); ++i) {
      const Index3 x = g.coords(i);
      bool inside = true;
      for (int m = 0; m < 3; ++m) inside = inside && x[m] >= margin && x[m] <= g.dims[m] - 1 - margin;
      f.at(c, i) = inside ? nd(rng) : 0.0;
    }
  return f;
}

struct AdjointPairing {
  double lhs = 0.0;  // <A x, y>
  double rhs = 0.0;  // sign * <x, B y>
  double relative_defect = 0.0;
};

/// Checks <A x, y> = sign <x, B y> for masked random x, y, with A assembled from forward and B from backward
/// differences. For compactly supported fields this is the discrete integration by parts, so the defect is at
/// rounding level exactly when the two symbols are formal adjoints with the given sign.
inline AdjointPairing adjoint_pairing(const Symbol& a, Rank in, const Symbol& b, Rank out, double sign,
                                      const GridSpec& g, std::uint64_t seed) {
  const int margin = std::max(a.max_order(), b.max_order());
  const Field x = masked_random_field(in, g, margin, seed);
  const Field y = masked_random_field(out, g, margin, seed + 1);
  Field ax(out, g), by(in, g);
  ax.values = collocated(a, g, Stencil::Forward) * x.values;
  by.values = collocated(b, g, Stencil::Backward) * y.values;
  AdjointPairing p;
  p.lhs = field_inner(ax, y);
  p.rhs = sign * field_inner(x, by);
  p.relative_defect = std::abs(p.lhs - p.rhs) / std::max({std::abs(p.lhs), std::abs(p.rhs), 1e-300});
  return p;
}

}  // namespace bihlab
