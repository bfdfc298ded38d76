#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "diff_ops.hpp"
#include "domain_grid.hpp"
#include "error.hpp"
#include "modular.hpp"
#include "symbol.hpp"
#include "tensor_algebra.hpp"

namespace bihlab {

enum class Which { First, Second };
enum class BoundaryModel { Staggered, Band };

inline const char* which_name(Which w) { return w == Which::First ? "first" : "second"; }

/// Static description of one of the two chains: ranks, operator symbols and the staggering of every level.
struct ChainDef {
  Which which = Which::First;
  std::array<Rank, 4> ranks{};
  std::array<Symbol, 3> ops;
  std::array<std::string, 3> op_names;
  std::array<std::vector<MultiIndex>, 4> reductions;
  std::array<int, 3> radius{};  // derivative order of each operator
};

inline ChainDef chain_def(Which w) {
  using namespace sym_ops;
  ChainDef d;
  d.which = w;
  if (w == Which::First) {
    d.ranks = {Rank::Scalar, Rank::Sym, Rank::Dev, Rank::Vector};
    d.ops = {Gradgrad_S(), Rot_S(), Div_T()};
    d.op_names = {"Gradgrad", "Rot_S", "Div_T"};
    d.reductions[0] = {MultiIndex{0, 0, 0}};
    for (int k = 0; k < 3; ++k) d.reductions[k + 1] = forward_reductions(d.ops[k], d.reductions[k]);
  } else {
    d.ranks = {Rank::Vector, Rank::Dev, Rank::Sym, Rank::Scalar};
    d.ops = {devGrad_T(), symRot_T(), divDiv_S()};
    d.op_names = {"devGrad", "symRot_T", "divDiv_S"};
    d.reductions[3] = {MultiIndex{2, 2, 2}};
    for (int k = 2; k >= 0; --k) d.reductions[k] = backward_reductions(d.ops[k], d.reductions[k + 1]);
  }
  for (int k = 0; k < 3; ++k) d.radius[k] = d.ops[k].max_order();
  return d;
}

/// Pointwise symmetric positive definite weight. Blocks act in orthonormal component coordinates
/// (the storage Gram is applied on top), so the identity weight reproduces the Frobenius product.
struct Weight {
  int ncomp = 1;
  std::vector<Eigen::MatrixXd> blocks;  // one block (constant) or one per grid node
  double lambda_min = 1.0;
  double lambda_max = 1.0;
  std::string kind = "identity";

  static Weight identity(int ncomp) {
    Weight w;
    w.ncomp = ncomp;
    w.blocks = {Eigen::MatrixXd::Identity(ncomp, ncomp)};
    return w;
  }
  static Weight scaled(int ncomp, double s) {
    Weight w = identity(ncomp);
    w.blocks[0] *= s;
    w.lambda_min = w.lambda_max = s;
    w.kind = "scaled";
    w.validate();
    return w;
  }
  /// Independent random SPD block per node with spectrum in [cond^{-1/2}, cond^{1/2}], condition number at most cond.
  static Weight random(int ncomp, int num_nodes, std::uint64_t seed, double cond = 1e2) {
    Weight w;
    w.ncomp = ncomp;
    w.kind = "random";
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    w.blocks.reserve(num_nodes);
    for (int i = 0; i < num_nodes; ++i) {
      Eigen::MatrixXd a(ncomp, ncomp);
      for (int r = 0; r < ncomp; ++r)
        for (int c = 0; c < ncomp; ++c) a(r, c) = normal(rng);
      const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
      Eigen::VectorXd lam(ncomp);
      for (int r = 0; r < ncomp; ++r) lam(r) = std::pow(cond, unif(rng) - 0.5);
      Eigen::MatrixXd b = q * lam.asDiagonal() * q.transpose();
      w.blocks.push_back(0.5 * (b + b.transpose()));
    }
    w.validate();
    return w;
  }
  Weight inverse() const {
    Weight w = *this;
    for (auto& b : w.blocks) b = b.inverse().eval();
    for (auto& b : w.blocks) b = (0.5 * (b + b.transpose())).eval();
    w.validate();
    return w;
  }
  const Eigen::MatrixXd& block(int node) const { return blocks.size() == 1 ? blocks[0] : blocks[node]; }
  void validate() {
    lambda_min = std::numeric_limits<double>::infinity();
    lambda_max = 0.0;
    for (const auto& b : blocks) {
      if (b.rows() != ncomp || b.cols() != ncomp) throw Error(ErrorCode::ShapeMismatch, "weight block size");
      if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12 * b.cwiseAbs().maxCoeff())
        throw Error(ErrorCode::WeightNotSPD, "weight block is not symmetric");
      const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b).eigenvalues();
      if (!(ev(0) > 0.0)) throw Error(ErrorCode::WeightNotSPD, "weight block is not positive definite");
      lambda_min = std::min(lambda_min, ev(0));
      lambda_max = std::max(lambda_max, ev(ncomp - 1));
    }
  }
};

/// Subspace of a staggered lattice with its mass matrix. B holds integer-valued basis columns.
struct DofSpace {
  Rank rank = Rank::Scalar;
  LatticeLayout layout;
  ColSparse B;      // lattice dofs x basis
  ColSparse G;      // lattice Gram matrix (h^3, storage Gram and weight)
  ColSparse M;      // B^T G B
  Weight weight;
  int num_local = 0;
  int num_images = 0;

  int dim() const { return static_cast<int>(B.cols()); }
  int lattice_size() const { return layout.size(); }
  Eigen::VectorXd lattice(const Eigen::VectorXd& coords) const { return B * coords; }
  Field to_field(const Eigen::VectorXd& coords) const {
    const Eigen::VectorXd v = lattice(coords);
    Field f(rank, layout.grid);
    for (int j = 0; j < layout.size(); ++j) f.at(layout.dofs[j].first, layout.dofs[j].second) = v(j);
    return f;
  }
  Eigen::VectorXd lattice_from_field(const Field& f) const {
    if (f.rank != rank || f.grid.dims != layout.grid.dims) throw Error(ErrorCode::ShapeMismatch, "field does not match level");
    Eigen::VectorXd v(layout.size());
    for (int j = 0; j < layout.size(); ++j) v(j) = f.at(layout.dofs[j].first, layout.dofs[j].second);
    return v;
  }
};

/// Polynomial end term (P1 or RT) sampled exactly on a level lattice and mass-orthonormalized.
struct PolynomialSpace {
  std::string tag;
  int level = 0;
  bool active = false;
  Eigen::MatrixXd basis;  // lattice dofs x 4 when active

  int dim() const { return active ? 4 : 0; }
};

/// Matrices that define a Hilbert complex in coordinates: mass M[k] and C[k] = M[k] A_{k-1} for k >= 1.
struct CoordComplex {
  std::array<ColSparse, 4> M;
  std::array<ColSparse, 4> C;
  std::array<std::string, 3> names;
  std::array<int, 3> orders{};

  int dim(int k) const { return static_cast<int>(M[k].rows()); }
};

struct HilbertComplex {
  ChainDef def;
  VoxelDomain dom;
  BoundaryPartition part;
  BoundaryModel model = BoundaryModel::Staggered;
  std::vector<int> widths;
  std::array<DofSpace, 4> levels;
  std::array<ExactOp, 3> D;
  std::array<SparseOp, 3> leak;  // integer leak constraints of level k, rows = exterior outputs of D_k
  PolynomialSpace head, tail;

  Which which() const { return def.which; }
  double h() const { return dom.grid.h; }

  /// d_k restricted to the subspaces, as a lattice matrix (lattice of k+1) x (basis of k).
  ColSparse restricted(int k) const { return ColSparse(D[k].value()) * levels[k].B; }

  CoordComplex coord() const {
    CoordComplex c;
    for (int k = 0; k < 4; ++k) c.M[k] = levels[k].M;
    for (int k = 1; k < 4; ++k) c.C[k] = ColSparse(levels[k].B.transpose()) * levels[k].G * restricted(k - 1);
    c.names = def.op_names;
    c.orders = def.radius;
    return c;
  }
};

namespace detail {

/// Exact kernel and row space of a small integer matrix via rational elimination.
inline void integer_kernel(const std::vector<std::vector<std::int64_t>>& rows, int ncols,
                           std::vector<std::vector<std::int64_t>>& kernel,
                           std::vector<std::vector<std::int64_t>>& rowspace) {
  std::vector<std::vector<Rational>> a;
  for (const auto& r : rows) {
    std::vector<Rational> q(ncols);
    for (int c = 0; c < ncols; ++c) q[c] = r[c];
    a.push_back(q);
  }
  std::vector<int> pivcol;
  int rk = 0;
  for (int c = 0; c < ncols && rk < static_cast<int>(a.size()); ++c) {
    int p = -1;
    for (int r = rk; r < static_cast<int>(a.size()); ++r)
      if (!a[r][c].is_zero()) {
        p = r;
        break;
      }
    if (p < 0) continue;
    std::swap(a[p], a[rk]);
    const Rational inv = Rational(1) / a[rk][c];
    for (auto& x : a[rk]) x *= inv;
    for (int r = 0; r < static_cast<int>(a.size()); ++r) {
      if (r == rk || a[r][c].is_zero()) continue;
      const Rational f = a[r][c];
      for (int k = 0; k < ncols; ++k) a[r][k] -= f * a[rk][k];
    }
    pivcol.push_back(c);
    ++rk;
  }
  auto to_int = [](std::vector<Rational> v) {
    std::int64_t l = 1;
    for (const auto& x : v) l = std::lcm(l, x.den());
    std::vector<std::int64_t> out(v.size());
    std::int64_t g = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] = v[i].num() * (l / v[i].den());
      g = std::gcd(g, out[i] < 0 ? -out[i] : out[i]);
    }
    if (g > 1)
      for (auto& x : out) x /= g;
    return out;
  };
  rowspace.clear();
  for (int r = 0; r < rk; ++r) rowspace.push_back(to_int(a[r]));
  kernel.clear();
  std::vector<bool> is_piv(ncols, false);
  for (int c : pivcol) is_piv[c] = true;
  for (int f = 0; f < ncols; ++f) {
    if (is_piv[f]) continue;
    std::vector<Rational> v(ncols);
    v[f] = 1;
    for (int r = 0; r < rk; ++r) v[pivcol[r]] = -a[r][f];
    kernel.push_back(to_int(v));
  }
}

}  // namespace detail

/// Lattice Gram matrix of a layout: per node, the weighted storage Gram restricted to the components present.
inline ColSparse lattice_gram(const LatticeLayout& L, const Weight& w) {
  const int nc = L.ncomp();
  const Eigen::MatrixXd F = isometry_factor(nc);
  const double vol = std::pow(L.grid.h, 3);
  Triplets t;
  const int n = L.grid.num_nodes();
  Eigen::MatrixXd cached;
  for (int i = 0; i < n; ++i) {
    std::vector<int> comps, ids;
    for (int c = 0; c < nc; ++c)
      if (const int j = L.dof_of[c * n + i]; j >= 0) {
        comps.push_back(c);
        ids.push_back(j);
      }
    if (comps.empty()) continue;
    const Eigen::MatrixXd& blk = w.block(i);
    if (w.blocks.size() != 1 || cached.size() == 0) cached = F.transpose() * blk * F;
    for (std::size_t a = 0; a < comps.size(); ++a)
      for (std::size_t b = 0; b < comps.size(); ++b) {
        const double v = cached(comps[a], comps[b]);
        if (v != 0.0) t.emplace_back(ids[a], ids[b], vol * v);
      }
  }
  ColSparse g(L.size(), L.size());
  g.setFromTriplets(t.begin(), t.end());
  return g;
}

/// Integer constraints a level-k field must satisfy for its zero extension to be consistent under D_k:
/// every output box outside the lattice that touches the domain and does not straddle a Gamma_n face must vanish.
inline SparseOp leak_matrix(const Symbol& op, const LatticeLayout& in, const std::vector<MultiIndex>& out_red,
                            const VoxelDomain& dom, const BoundaryPartition& part) {
  const GridSpec& g = dom.grid;
  const std::int64_t lcd = op.lcd();
  Triplets t;
  int row = 0;
  for (int o = 0; o < static_cast<int>(out_red.size()); ++o) {
    const MultiIndex a = out_red[o];
    for (int z = -a[2]; z < g.dims[2]; ++z)
      for (int y = -a[1]; y < g.dims[1]; ++y)
        for (int x = -a[0]; x < g.dims[0]; ++x) {
          const Index3 lo{x, y, z};
          if (footprint_active(dom, lo, a)) continue;
          const Index3 hi{x + a[0], y + a[1], z + a[2]};
          bool touches = false;
          for (int zz = std::max(z, 0); zz <= std::min(hi[2], g.dims[2] - 1) && !touches; ++zz)
            for (int yy = std::max(y, 0); yy <= std::min(hi[1], g.dims[1] - 1) && !touches; ++yy)
              for (int xx = std::max(x, 0); xx <= std::min(hi[0], g.dims[0] - 1) && !touches; ++xx)
                touches = dom.active[g.index({xx, yy, zz})] != 0;
          if (!touches || box_crosses(g, part, lo, hi, FaceTag::N)) continue;
          bool any = false;
          for_each_stencil(op, o, lcd, [&](int c, const MultiIndex& gm, std::int64_t w) {
            const int j = in.find(c, {x + gm[0], y + gm[1], z + gm[2]});
            if (j >= 0 && w != 0) {
              t.emplace_back(row, j, static_cast<double>(w));
              any = true;
            }
          });
          if (any) ++row;
        }
  }
  SparseOp c(row, in.size());
  c.setFromTriplets(t.begin(), t.end());
  c.prune(0.0);
  return c;
}

namespace detail {

struct LocalSpace {
  std::vector<Eigen::Triplet<double>> cols;  // (lattice dof, column, value)
  int ncols = 0;
  std::vector<int> comp_offset;              // lattice dof -> first complement functional index or -1
  std::vector<std::vector<std::int64_t>> comp_rows;  // complement functionals restricted to the group
  std::vector<std::vector<int>> comp_group;          // dofs of the group for each functional block
  std::vector<int> group_of;                          // lattice dof -> block index in comp_group or -1
  std::vector<int> block_first;                       // block -> first functional index
  int num_functionals = 0;
};

/// Local leak-free combinations: dofs sharing a node and a footprint are combined in the kernel of
/// their own leak rows. The complementary directions are recorded as integer functionals.
inline LocalSpace local_space(const LatticeLayout& L, const SparseOp* leak) {
  LocalSpace s;
  const int n = L.size();
  s.group_of.assign(n, -1);
  std::map<std::pair<int, MultiIndex>, std::vector<int>> groups;
  for (int j = 0; j < n; ++j) groups[{L.dofs[j].second, L.reduction[L.dofs[j].first]}].push_back(j);
  ColSparse leak_cols;
  if (leak) leak_cols = ColSparse(*leak);
  for (const auto& [key, ids] : groups) {
    std::map<int, std::vector<std::int64_t>> rowmap;
    if (leak) {
      for (std::size_t a = 0; a < ids.size(); ++a)
        for (ColSparse::InnerIterator it(leak_cols, ids[a]); it; ++it) {
          auto& r = rowmap[static_cast<int>(it.row())];
          r.resize(ids.size(), 0);
          r[a] = static_cast<std::int64_t>(it.value());
        }
    }
    if (rowmap.empty()) {
      for (int j : ids) s.cols.emplace_back(j, s.ncols++, 1.0);
      continue;
    }
    std::vector<std::vector<std::int64_t>> rows;
    for (auto& [r, v] : rowmap) rows.push_back(v);
    std::vector<std::vector<std::int64_t>> ker, rs;
    integer_kernel(rows, static_cast<int>(ids.size()), ker, rs);
    for (const auto& v : ker) {
      for (std::size_t a = 0; a < ids.size(); ++a)
        if (v[a] != 0) s.cols.emplace_back(ids[a], s.ncols, static_cast<double>(v[a]));
      ++s.ncols;
    }
    if (!rs.empty()) {
      const int blk = static_cast<int>(s.comp_group.size());
      s.comp_group.push_back(ids);
      s.block_first.push_back(s.num_functionals);
      for (const auto& r : rs) s.comp_rows.push_back(r);
      s.num_functionals += static_cast<int>(rs.size());
      for (int j : ids) s.group_of[j] = blk;
    }
  }
  return s;
}

}  // namespace detail

/// Strong subspace of level k in the staggered model: local leak-free combinations plus the images of the
/// previous strong space that are not already spanned by them.
inline void build_strong_space(DofSpace& sp, const SparseOp* leak, const ExactOp* prev_op, const DofSpace* prev) {
  const detail::LocalSpace loc = detail::local_space(sp.layout, leak);
  Triplets t = loc.cols;
  int ncols = loc.ncols;
  sp.num_local = loc.ncols;
  sp.num_images = 0;
  if (prev_op && prev && loc.num_functionals > 0) {
    ModEchelon ech;
    const ColSparse img = ColSparse(prev_op->numer) * prev->B;
    // rows of each functional block, per local group
    for (int col = 0; col < img.cols(); ++col) {
      std::map<int, std::int64_t> coords;
      bool touches = false;
      for (ColSparse::InnerIterator it(img, col); it; ++it)
        if (loc.group_of[it.row()] >= 0 && it.value() != 0.0) touches = true;
      if (!touches) continue;
      std::map<int, std::vector<std::int64_t>> blockvals;
      for (ColSparse::InnerIterator it(img, col); it; ++it) {
        const int blk = loc.group_of[it.row()];
        if (blk < 0) continue;
        const auto& ids = loc.comp_group[blk];
        auto& v = blockvals[blk];
        v.resize(ids.size(), 0);
        for (std::size_t a = 0; a < ids.size(); ++a)
          if (ids[a] == it.row()) v[a] = static_cast<std::int64_t>(it.value());
      }
      ModEchelon::SparseInt vec;
      for (const auto& [blk, v] : blockvals) {
        const int first = loc.block_first[blk];
        const int nf = (blk + 1 < static_cast<int>(loc.block_first.size()) ? loc.block_first[blk + 1] : loc.num_functionals) - first;
        for (int f = 0; f < nf; ++f) {
          std::int64_t s = 0;
          for (std::size_t a = 0; a < v.size(); ++a) s += loc.comp_rows[first + f][a] * v[a];
          if (s != 0) vec.emplace_back(first + f, s);
        }
      }
      if (vec.empty() || !ech.insert(vec)) continue;
      for (ColSparse::InnerIterator it(img, col); it; ++it)
        if (it.value() != 0.0) t.emplace_back(static_cast<int>(it.row()), ncols, it.value());
      ++ncols;
      ++sp.num_images;
    }
  }
  sp.B = ColSparse(sp.layout.size(), ncols);
  sp.B.setFromTriplets(t.begin(), t.end());
}

inline void build_band_space(DofSpace& sp, const DofMask& mask) {
  Triplets t;
  int ncols = 0;
  for (int j = 0; j < sp.layout.size(); ++j)
    if (mask.keep[sp.layout.dofs[j].second]) t.emplace_back(j, ncols++, 1.0);
  sp.B = ColSparse(sp.layout.size(), ncols);
  sp.B.setFromTriplets(t.begin(), t.end());
  sp.num_local = ncols;
  sp.num_images = 0;
}

inline PolynomialSpace sample_polynomials(const std::string& tag, int level, const DofSpace& sp) {
  PolynomialSpace p;
  p.tag = tag;
  p.level = level;
  p.active = true;
  const LatticeLayout& L = sp.layout;
  const double h = L.grid.h;
  p.basis = Eigen::MatrixXd::Zero(L.size(), 4);
  for (int j = 0; j < L.size(); ++j) {
    const auto [c, node] = L.dofs[j];
    const Index3 x = L.grid.coords(node);
    const MultiIndex& r = L.reduction[c];
    Eigen::Vector3d pos;
    for (int m = 0; m < 3; ++m) pos(m) = (x[m] + 0.5 * r[m]) * h;
    if (tag == "P1") {
      p.basis(j, 0) = 1.0;
      for (int m = 0; m < 3; ++m) p.basis(j, 1 + m) = pos(m);
    } else {  // RT: x -> a x + q
      p.basis(j, 0) = pos(c);
      p.basis(j, 1 + c) = 1.0;
    }
  }
  const Eigen::MatrixXd gram = p.basis.transpose() * (sp.G * p.basis);
  const Eigen::MatrixXd R = Eigen::LLT<Eigen::MatrixXd>(gram).matrixU();
  p.basis = R.transpose().triangularView<Eigen::Lower>().solve(p.basis.transpose()).transpose();
  return p;
}

struct BuildOptions {
  BoundaryModel model = BoundaryModel::Staggered;
  std::vector<int> widths;  // band model only, one per level
};

/// Band-model chain rule: width of level k must cover width of level k+1 plus the operator's stencil radius.
inline void check_width_chain(const ChainDef& def, const std::vector<int>& widths) {
  if (widths.size() != 4) throw Error(ErrorCode::IncompatibleWidths, "band model needs one width per level");
  for (int k = 0; k < 3; ++k)
    if (widths[k] < widths[k + 1] + def.radius[k])
      throw Error(ErrorCode::IncompatibleWidths,
                  std::string("width of the ") + rank_name(def.ranks[k]) + " level (" + std::to_string(widths[k]) +
                      ") is below the width of the next level plus the stencil radius of " + def.op_names[k]);
}

inline HilbertComplex build_complex(Which which, const VoxelDomain& dom, const BoundaryPartition& part,
                                    const Weight& eps, const Weight& mu, const BuildOptions& opt = {}) {
  HilbertComplex hc;
  hc.def = chain_def(which);
  hc.dom = dom;
  hc.part = part;
  hc.model = opt.model;
  hc.widths = opt.widths;
  if (eps.ncomp != 6 || mu.ncomp != 8) throw Error(ErrorCode::ShapeMismatch, "eps must be a 6x6 and mu an 8x8 weight");
  const std::array<Weight, 4> weights =
      which == Which::First
          ? std::array<Weight, 4>{Weight::identity(1), eps, mu.inverse(), Weight::identity(3)}
          : std::array<Weight, 4>{Weight::identity(3), mu, eps.inverse(), Weight::identity(1)};
  for (int k = 0; k < 4; ++k) {
    DofSpace& sp = hc.levels[k];
    sp.rank = hc.def.ranks[k];
    sp.layout = make_layout(dom, sp.rank, hc.def.reductions[k]);
    sp.weight = weights[k];
  }
  for (int k = 0; k < 3; ++k) hc.D[k] = assemble_lattice(hc.def.ops[k], hc.levels[k].layout, hc.levels[k + 1].layout);
  for (int k = 0; k < 2; ++k)
    if (max_abs(SparseOp(hc.D[k + 1].numer * hc.D[k].numer)) != 0.0)
      throw Error(ErrorCode::ShapeMismatch, "assembled operators do not form a complex");

  if (opt.model == BoundaryModel::Band) {
    check_width_chain(hc.def, opt.widths);
    std::vector<std::string> names;
    for (auto r : hc.def.ranks) names.push_back(rank_name(r));
    const auto masks = build_masks(dom, part, names, opt.widths);
    for (int k = 0; k < 4; ++k) build_band_space(hc.levels[k], masks[k]);
    for (int k = 0; k < 3; ++k) {
      const ColSparse img = ColSparse(hc.D[k].numer) * hc.levels[k].B;
      std::vector<bool> kept(hc.levels[k + 1].layout.size(), false);
      const ColSparse& B1 = hc.levels[k + 1].B;
      for (int c = 0; c < B1.outerSize(); ++c)
        for (ColSparse::InnerIterator it(B1, c); it; ++it) kept[it.row()] = true;
      for (int c = 0; c < img.outerSize(); ++c)
        for (ColSparse::InnerIterator it(img, c); it; ++it)
          if (it.value() != 0.0 && !kept[it.row()])
            throw Error(ErrorCode::IncompatibleWidths, "masked " + hc.def.op_names[k] + " leaves the masked codomain");
    }
  } else {
    for (int k = 0; k < 3; ++k)
      hc.leak[k] = leak_matrix(hc.def.ops[k], hc.levels[k].layout, hc.def.reductions[k + 1], dom, part);
    for (int k = 0; k < 4; ++k)
      build_strong_space(hc.levels[k], k < 3 ? &hc.leak[k] : nullptr, k > 0 ? &hc.D[k - 1] : nullptr,
                         k > 0 ? &hc.levels[k - 1] : nullptr);
  }
  for (int k = 0; k < 4; ++k) {
    DofSpace& sp = hc.levels[k];
    sp.G = lattice_gram(sp.layout, sp.weight);
    sp.M = ColSparse(sp.B.transpose()) * sp.G * sp.B;
  }
  const bool no_t = part.num_t() == 0;
  const bool no_n = part.num_n() == 0;
  const std::string head_tag = which == Which::First ? "P1" : "RT";
  const std::string tail_tag = which == Which::First ? "RT" : "P1";
  hc.head = no_t ? sample_polynomials(head_tag, 0, hc.levels[0]) : PolynomialSpace{head_tag, 0, false, {}};
  hc.tail = no_n ? sample_polynomials(tail_tag, 3, hc.levels[3]) : PolynomialSpace{tail_tag, 3, false, {}};
  return hc;
}

/// Exact rank of an integer-valued sparse matrix (rows inserted into a modular echelon form).
inline int exact_rank(const ColSparse& a) {
  const SparseOp r(a);
  ModEchelon ech;
  for (int i = 0; i < r.outerSize(); ++i) {
    ModEchelon::SparseInt v;
    for (SparseOp::InnerIterator it(r, i); it; ++it)
      if (it.value() != 0.0) v.emplace_back(static_cast<int>(it.col()), static_cast<std::int64_t>(std::llround(it.value())));
    if (!v.empty()) ech.insert(v);
  }
  return ech.rank();
}

/// Integer matrix of d_k on the strong subspaces (lattice of k+1 by basis of k).
inline ColSparse integer_restricted(const HilbertComplex& hc, int k) {
  return ColSparse(hc.D[k].numer) * hc.levels[k].B;
}

/// Dual chain: levels reversed, operators replaced by signed weighted adjoints (the Div/devGrad pair takes a minus sign).
inline CoordComplex dual_complex(const CoordComplex& c) {
  CoordComplex d;
  for (int j = 0; j < 4; ++j) d.M[j] = c.M[3 - j];
  for (int j = 1; j < 4; ++j) {
    const int k = 3 - j;  // dual operator j-1 is the adjoint of primal operator k
    const std::string& nm = c.names[k];
    const double s = (nm == "Div_T" || nm == "devGrad") ? -1.0 : 1.0;
    d.C[j] = ColSparse(s * ColSparse(c.C[k + 1].transpose()));
  }
  auto adj_name = [](const std::string& nm) -> std::string {
    if (nm == "Gradgrad") return "divDiv_S";
    if (nm == "Rot_S") return "symRot_T";
    if (nm == "Div_T") return "devGrad";
    if (nm == "devGrad") return "Div_T";
    if (nm == "symRot_T") return "Rot_S";
    if (nm == "divDiv_S") return "Gradgrad";
    return nm + "*";
  };
  for (int j = 0; j < 3; ++j) {
    d.names[j] = adj_name(c.names[2 - j]);
    d.orders[j] = c.orders[2 - j];
  }
  return d;
}

}  // namespace bihlab
