#include <catch_amalgamated.hpp>

#include <bihlab/complex_builder.hpp>
#include <bihlab/diff_ops.hpp>
#include <bihlab/linalg.hpp>
#include <cstdio>
#include <filesystem>

using namespace bihlab;

namespace {

Field coordinate_field(Rank r, const GridSpec& g) {
  Field f(r, g);
  for (int i = 0; i < g.num_nodes(); ++i) {
    const Index3 x = g.coords(i);
    for (int c = 0; c < f.ncomp(); ++c) f.at(c, i) = x[c % 3] * g.h;
  }
  return f;
}

/// Rows whose forward stencil of the given radius stays inside the grid.
std::vector<int> interior_rows(const GridSpec& g, int radius) {
  std::vector<int> rows;
  for (int i = 0; i < g.num_nodes(); ++i) {
    const Index3 x = g.coords(i);
    bool ok = true;
    for (int m = 0; m < 3; ++m) ok = ok && x[m] + radius < g.dims[m];
    if (ok) rows.push_back(i);
  }
  return rows;
}

SparseOp random_spd(int n, std::uint64_t seed) {
  Eigen::MatrixXd a = random_matrix(n, n, seed);
  Eigen::MatrixXd s = a * a.transpose() + n * Eigen::MatrixXd::Identity(n, n);
  return SparseOp(s.sparseView());
}

}  // namespace

TEST_CASE("first differences of coordinates") {
  const GridSpec g = unit_grid(6);
  const Field x = coordinate_field(Rank::Scalar, g);
  for (int i : interior_rows(g, 1)) CHECK(std::abs((partial(0, g) * x.values)(i) - 1.0) < 1e-12);
  const VectorOps ops = assemble_vector_ops(g);
  const Field v = coordinate_field(Rank::Vector, g);
  const Eigen::VectorXd dv = ops.div * v.values;
  for (int i : interior_rows(g, 1)) CHECK(std::abs(dv(i) - 3.0) < 1e-12);
}

TEST_CASE("difference operators commute and compose to zero") {
  const GridSpec g{{5, 6, 7}, 0.2};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(max_abs(SparseOp(partial(a, g) * partial(b, g) - partial(b, g) * partial(a, g))) == 0.0);
  const VectorOps ops = assemble_vector_ops(g);
  CHECK(max_abs(SparseOp(ops.rot * ops.grad)) == 0.0);
  CHECK(max_abs(SparseOp(ops.div * ops.rot)) == 0.0);
  CHECK(max_abs(SparseOp(ops.Rot * ops.Grad)) == 0.0);
  // tr Grad = div: the diagonal blocks of Grad sum to div
  const int n = g.num_nodes();
  SparseOp trGrad(n, 3 * n);
  for (int c = 0; c < 3; ++c) trGrad += SparseOp(ops.Grad.middleRows((3 * c + c) * n, n));
  CHECK(max_abs(SparseOp(trGrad - ops.div)) == 0.0);
}

TEST_CASE("collocated biharmonic operators form complexes") {
  const GridSpec g = unit_grid(6);
  const BiharmonicOps ops = assemble_biharmonic_ops(g);
  // floating point assembly: the 1/3 entries of the deviatoric part leave rounding residue only
  const double scale = max_abs(ops.Gradgrad_S) * max_abs(ops.Rot_StoT);
  CHECK(max_abs(SparseOp(ops.Rot_StoT * ops.Gradgrad_S)) <= 1e-14 * scale);
  CHECK(max_abs(SparseOp(ops.Div_T * ops.Rot_StoT)) <= 1e-14 * scale);
  CHECK(max_abs(SparseOp(ops.symRot_TtoS * ops.devGrad_T)) <= 1e-14 * scale);
  CHECK(max_abs(SparseOp(ops.divDiv_S * ops.symRot_TtoS)) <= 1e-14 * scale);
  CHECK(ops.Gradgrad_S.rows() == 6 * g.num_nodes());
  CHECK(ops.divDiv_S.cols() == 6 * g.num_nodes());
}

TEST_CASE("integer lattice operators compose to exactly zero") {
  const VoxelDomain dom = build_domain(unit_grid(6), ShapeDescriptor::full_box());
  for (Which w : {Which::First, Which::Second}) {
    const ChainDef def = chain_def(w);
    std::vector<LatticeLayout> l;
    for (int k = 0; k < 4; ++k) l.push_back(make_layout(dom, def.ranks[k], def.reductions[k]));
    std::vector<ExactOp> d;
    for (int k = 0; k < 3; ++k) d.push_back(assemble_lattice(def.ops[k], l[k], l[k + 1]));
    for (int k = 0; k < 2; ++k) {
      CHECK(max_abs(d[k].numer) > 0.0);
      CHECK(max_abs(SparseOp(d[k + 1].numer * d[k].numer)) == 0.0);
    }
  }
}

TEST_CASE("lattice operators annihilate P1 and RT exactly") {
  const GridSpec g = unit_grid(7);
  const VoxelDomain dom = build_domain(g, ShapeDescriptor::full_box());
  {
    const ChainDef def = chain_def(Which::First);
    const LatticeLayout l0 = make_layout(dom, def.ranks[0], def.reductions[0]);
    const LatticeLayout l1 = make_layout(dom, def.ranks[1], def.reductions[1]);
    const ExactOp d = assemble_lattice(def.ops[0], l0, l1);
    for (int basis = 0; basis < 4; ++basis) {
      Eigen::VectorXd p(l0.size());
      for (int j = 0; j < l0.size(); ++j) p(j) = basis == 0 ? 1.0 : g.coords(l0.dofs[j].second)[basis - 1];
      CHECK((d.numer * p).cwiseAbs().maxCoeff() == 0.0);
    }
    Eigen::VectorXd q(l0.size());
    for (int j = 0; j < l0.size(); ++j) {
      const Index3 x = g.coords(l0.dofs[j].second);
      q(j) = x[0] * x[0];
    }
    CHECK((d.numer * q).cwiseAbs().maxCoeff() > 0.0);
  }
  {
    const ChainDef def = chain_def(Which::Second);
    const LatticeLayout l0 = make_layout(dom, def.ranks[0], def.reductions[0]);
    const LatticeLayout l1 = make_layout(dom, def.ranks[1], def.reductions[1]);
    const ExactOp d = assemble_lattice(def.ops[0], l0, l1);
    for (int basis = 0; basis < 4; ++basis) {
      Eigen::VectorXd p(l0.size());
      for (int j = 0; j < l0.size(); ++j) {
        const auto [c, node] = l0.dofs[j];
        const double twice_pos = 2 * g.coords(node)[c] + l0.reduction[c][c];
        p(j) = basis == 0 ? twice_pos : (basis - 1 == c ? 1.0 : 0.0);
      }
      CHECK((d.numer * p).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("band restriction") {
  const GridSpec g = unit_grid(6);
  const VoxelDomain dom = build_domain(g, ShapeDescriptor::full_box());
  const BoundaryPartition p = partition_boundary(dom, selectors::all_t());
  const auto masks = build_masks(dom, p, {"scalar", "sym"}, {2, 1});
  const SparseOp gg = collocated(sym_ops::Gradgrad_S(), g);
  const SparseOp r = restrict_op(gg, masks[0], masks[1]);
  CHECK(r.cols() == 8);
  CHECK(r.rows() == 6 * 64);
  // the forward stencil of Gradgrad reaches two nodes back, past the width-1 band
  CHECK(restriction_leak(gg, masks[0], masks[1]) > 0.0);
  const auto wide = build_masks(dom, p, {"scalar", "sym"}, {2, 0});
  CHECK(restriction_leak(gg, wide[0], wide[1]) == 0.0);

  const auto keep_all = build_masks(dom, partition_boundary(dom, selectors::all_n()), {"scalar", "sym"}, {0, 0});
  CHECK(max_abs(SparseOp(restrict_op(gg, keep_all[0], keep_all[1]) - gg)) == 0.0);
  // a chain-compatible restriction of a complex stays a complex
  const SparseOp rs = collocated(sym_ops::Rot_S(), g);
  const auto chain = build_masks(dom, p, {"scalar", "sym", "dev"}, {2, 0, 0});
  CHECK(max_abs(SparseOp(restrict_op(rs, chain[1], chain[2]) * restrict_op(gg, chain[0], chain[1]))) == 0.0);
}

TEST_CASE("weighted adjoint") {
  const int nin = 7, nout = 5;
  const SparseOp a = SparseOp(random_matrix(nout, nin, 4).sparseView());
  const SparseOp mi = random_spd(nin, 5), mo = random_spd(nout, 6);
  const SparseOp as = weighted_adjoint(a, mi, mo);
  const SparseOp ass = weighted_adjoint(as, mo, mi);
  CHECK(max_abs(SparseOp(ass - a)) < 1e-10);
  const Eigen::VectorXd x = random_matrix(nin, 1, 8).col(0), y = random_matrix(nout, 1, 9).col(0);
  const double lhs = (a * x).dot(mo * y), rhs = x.dot(mi * (as * y));
  CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
  SparseOp bad = mi;
  bad.coeffRef(0, 0) = -1.0;
  CHECK_THROWS_AS(weighted_adjoint(a, bad, mo), Error);
}

TEST_CASE("adjoint sign conventions by summation by parts") {
  using namespace sym_ops;
  const GridSpec g = unit_grid(9);
  const auto div = adjoint_pairing(Div_T(), Rank::Dev, devGrad_T(), Rank::Vector, -1.0, g, 21);
  CHECK(div.relative_defect < 1e-12);
  const auto gg = adjoint_pairing(Gradgrad_S(), Rank::Scalar, divDiv_S(), Rank::Sym, 1.0, g, 22);
  CHECK(gg.relative_defect < 1e-12);
  const auto rot = adjoint_pairing(Rot_S(), Rank::Sym, symRot_T(), Rank::Dev, 1.0, g, 23);
  CHECK(rot.relative_defect < 1e-12);
  const auto wrong = adjoint_pairing(Div_T(), Rank::Dev, devGrad_T(), Rank::Vector, 1.0, g, 21);
  CHECK(wrong.relative_defect > 1.0);
}

TEST_CASE("sparse operator export round trip") {
  const auto path = (std::filesystem::temp_directory_path() / "bihlab_sparseop_test.txt").string();
  const SparseOp op = collocated(sym_ops::Rot_S(), unit_grid(4));
  export_sparseop(path, op);
  const SparseOp back = read_sparseop(path);
  CHECK(back.rows() == op.rows());
  CHECK(back.cols() == op.cols());
  CHECK(max_abs(SparseOp(back - op)) == 0.0);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_sparseop(path), Error);
}

TEST_CASE("fields") {
  const GridSpec g = unit_grid(3);
  Field f(Rank::Sym, g);
  CHECK(f.values.size() == 6 * 27);
  f.at(3, 5) = 2.0;
  CHECK(f.values(3 * 27 + 5) == 2.0);
  // off-diagonal sym entries count twice in the Frobenius product
  CHECK(field_inner(f, f) == Catch::Approx(8.0 * g.h * g.h * g.h));
  CHECK(rank_from_name("dev") == Rank::Dev);
  CHECK_THROWS_AS(rank_from_name("matrix"), Error);
}
