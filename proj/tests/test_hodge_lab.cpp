#include <catch_amalgamated.hpp>

#include <bihlab/hodge_lab.hpp>
#include <bihlab/oracle.hpp>

using namespace bihlab;

namespace {

HilbertComplex make(Which w, const GridSpec& g, const ShapeDescriptor& shape, const FaceSelector& sel,
                    const Weight& eps = Weight::identity(6), const Weight& mu = Weight::identity(8)) {
  const VoxelDomain dom = build_domain(g, shape);
  return build_complex(w, dom, partition_boundary(dom, sel), eps, mu);
}

HilbertComplex cube(Which w, int n, const FaceSelector& sel) { return make(w, unit_grid(n), ShapeDescriptor::full_box(), sel); }

double rel(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

int exact_kernel(const HilbertComplex& hc, int k) { return hc.levels[k].dim() - exact_rank(integer_restricted(hc, k)); }

}  // namespace

TEST_CASE("harmonic fields vanish on the cube") {
  for (Which w : {Which::First, Which::Second})
    for (const auto& sel : {selectors::all_n(), selectors::all_t()}) {
      const HodgeContext ctx(cube(w, 6, sel));
      for (int k : {1, 2}) {
        const HarmonicBasis hb = harmonic_fields(ctx, k);
        CHECK(hb.dim() == 0);
        CHECK(hb.eigen_gap >= 1e2);
      }
    }
}

TEST_CASE("end levels carry the polynomial kernels") {
  const HodgeContext free(cube(Which::First, 5, selectors::all_n()));
  CHECK(harmonic_fields(free, 0).dim() == 4);
  CHECK(harmonic_fields(free, 3).dim() == 0);
  const HodgeContext clamped(cube(Which::Second, 5, selectors::all_t()));
  CHECK(harmonic_fields(clamped, 0).dim() == 0);
  CHECK(harmonic_fields(clamped, 3).dim() == 4);
}

TEST_CASE("cavity harmonic fields match the dense oracle and the exact rank count") {
  const GridSpec g = unit_grid(7);
  for (Which w : {Which::First, Which::Second}) {
    const HilbertComplex hc = make(w, g, ShapeDescriptor::centered_cavity(g, 1), selectors::all_n());
    const HodgeContext ctx(hc);
    int total = 0;
    for (int k : {1, 2}) {
      const HarmonicBasis hb = harmonic_fields(ctx, k);
      const DenseLevelOracle o = dense_oracle(ctx, k);
      CHECK(hb.dim() == o.harmonic());
      CHECK(hb.dim() == exact_kernel(hc, k) - exact_rank(integer_restricted(hc, k - 1)));
      total += hb.dim();
      if (hb.dim() > 0) {
        const Mat gram = hb.coords.transpose() * (ctx.M(k) * hb.coords);
        CHECK((gram - Mat::Identity(hb.dim(), hb.dim())).cwiseAbs().maxCoeff() < 1e-10);
        for (int j = 0; j < hb.dim(); ++j) {
          const Vec x = hb.coords.col(j);
          CHECK(ctx.norm(k + 1, ctx.d(k, x)) <= std::sqrt(hb.tau_harm));
          CHECK(ctx.norm(k - 1, ctx.dstar(k - 1, x)) <= std::sqrt(hb.tau_harm));
        }
      }
    }
    // the one-node hole on a 7^3 grid leaves a shell three nodes thick, which carries cohomology at level 2
    CHECK(total > 0);
  }
}

TEST_CASE("rank-nullity ledger") {
  for (const auto& sel : {selectors::all_n(), selectors::all_t(), selectors::half_split(unit_grid(5), 2)}) {
    const HilbertComplex hc = cube(Which::First, 5, sel);
    const HodgeContext ctx(hc);
    for (int k = 1; k < 3; ++k) {
      const DenseLevelOracle o = dense_oracle(ctx, k);
      CHECK(o.rank_up == exact_rank(integer_restricted(hc, k)));
      CHECK(o.rank_down == exact_rank(integer_restricted(hc, k - 1)));
      CHECK(exact_kernel(hc, k) == o.rank_down + o.harmonic());
      CHECK(o.harmonic() == 0);
    }
    CHECK(exact_kernel(hc, 0) == hc.head.dim());
  }
}

TEST_CASE("Helmholtz decomposition") {
  const HodgeContext ctx(cube(Which::First, 6, selectors::all_n()));
  const HarmonicBasis hb = harmonic_fields(ctx, 1);
  SECTION("a range field stays in the range") {
    const Vec u = random_matrix(ctx.dim(0), 1, 3).col(0);
    const Vec x = ctx.d(0, u);
    const DecompositionResult r = helmholtz(ctx, 1, hb, x);
    CHECK(ctx.norm(1, r.harmonic_part) <= 1e-8 * ctx.norm(1, x));
    CHECK(ctx.norm(1, r.corange_part) <= 1e-8 * ctx.norm(1, x));
    CHECK(r.residual <= 1e-8);
  }
  SECTION("zero") {
    const DecompositionResult r = helmholtz(ctx, 1, hb, Vec::Zero(ctx.dim(1)));
    CHECK(r.range_part.norm() == 0.0);
    CHECK(r.corange_part.norm() == 0.0);
    CHECK(r.harmonic_part.norm() == 0.0);
  }
  SECTION("random fields") {
    const Mat xs = random_matrix(ctx.dim(1), 4, 9);
    for (int i = 0; i < 4; ++i) {
      const DecompositionResult r = helmholtz(ctx, 1, hb, xs.col(i));
      CHECK(r.residual <= 1e-8);
      CHECK(r.orthogonality_defect <= 1e-8);
    }
  }
}

TEST_CASE("Helmholtz parts agree with dense projections") {
  const GridSpec g = unit_grid(5);
  const HodgeContext ctx(make(Which::Second, g, ShapeDescriptor::full_box(), selectors::half_split(g, 1)));
  for (int k : {1, 2}) {
    const HarmonicBasis hb = harmonic_fields(ctx, k);
    const DenseLevelOracle o = dense_oracle(ctx, k);
    const Vec x = random_matrix(ctx.dim(k), 1, 17 + k).col(0);
    const DecompositionResult r = helmholtz(ctx, k, hb, x);
    CHECK(rel(r.range_part, o.range_part(x)) < 1e-8);
    CHECK(rel(r.corange_part, o.corange_part(x)) < 1e-8);
    CHECK(ctx.norm(k, Vec(r.harmonic_part - o.harmonic_part(x))) <= 1e-8 * ctx.norm(k, x));
  }
}

TEST_CASE("potential solves") {
  const GridSpec g = unit_grid(5);
  const HodgeContext ctx(make(Which::First, g, ShapeDescriptor::full_box(), selectors::all_t()));
  SECTION("consistency and minimal norm") {
    for (int k : {0, 1, 2}) {
      const DenseLevelOracle o = dense_oracle(ctx, k);
      const Vec x0 = random_matrix(ctx.dim(k), 1, 60 + k).col(0);
      const Vec xperp = o.corange_part(x0);
      const Vec y = ctx.d(k, x0);
      const Vec x = potential_solve(ctx, k, y, 1e-8);
      CHECK(rel(x, xperp) < 1e-8);
      CHECK(rel(potential_solve(ctx, k, ctx.d(k, xperp), 1e-8), xperp) < 1e-8);
    }
  }
  SECTION("fields outside the range are rejected") {
    const HarmonicBasis rt = harmonic_fields(ctx, 3);
    REQUIRE(rt.dim() == 4);
    try {
      potential_solve(ctx, 2, rt.coords.col(0), 1e-8);
      FAIL("expected NotInRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotInRange);
    }
  }
  SECTION("zero right-hand side") { CHECK(potential_solve(ctx, 1, Vec::Zero(ctx.dim(2)), 1e-8).norm() == 0.0); }
}

TEST_CASE("Poincare constants") {
  const GridSpec g = unit_grid(5);
  const HodgeContext ctx(make(Which::First, g, ShapeDescriptor::full_box(), selectors::all_t()));
  const PoincareReport pr = poincare_constants(ctx);
  SECTION("dense oracle") {
    for (int i = 0; i < 3; ++i) {
      const DenseLevelOracle o = dense_oracle(ctx, i);
      CHECK(std::abs(pr.c[i] - 1.0 / std::sqrt(o.lambda_up_min)) <= 1e-8 * pr.c[i]);
      CHECK(pr.gap[i] >= 1e2);
    }
  }
  SECTION("attaining vectors") {
    for (int i = 0; i < 3; ++i) {
      const Vec& x = pr.attaining[i];
      CHECK(std::abs(ctx.norm(i, x) - pr.c[i] * ctx.norm(i + 1, ctx.d(i, x))) <= 1e-8 * ctx.norm(i, x));
    }
  }
  SECTION("random samples obey the estimate") {
    for (int i = 0; i < 3; ++i) {
      const Mat xs = random_matrix(ctx.dim(i), 10, 80 + i);
      for (int s = 0; s < 10; ++s) {
        const Vec x = corange_projection(ctx, i, xs.col(s), HodgeOptions{});
        CHECK(ctx.norm(i, x) <= pr.c[i] * ctx.norm(i + 1, ctx.d(i, x)) * (1 + 1e-6));
      }
    }
  }
  SECTION("homogeneity in the grid spacing") {
    GridSpec g2 = g;
    g2.h *= 2.0;
    const HodgeContext ctx2(make(Which::First, g2, ShapeDescriptor::full_box(), selectors::all_t()));
    const PoincareReport pr2 = poincare_constants(ctx2);
    CHECK(pr2.c[0] == Catch::Approx(4.0 * pr.c[0]).epsilon(1e-8));
    CHECK(pr2.c[1] == Catch::Approx(2.0 * pr.c[1]).epsilon(1e-8));
    CHECK(pr2.c[2] == Catch::Approx(2.0 * pr.c[2]).epsilon(1e-8));
  }
}

TEST_CASE("combined estimate") {
  const HodgeContext ctx(cube(Which::Second, 5, selectors::half_split(unit_grid(5), 0)));
  const PoincareReport pr = poincare_constants(ctx);
  for (int k : {1, 2}) {
    const HarmonicBasis hb = harmonic_fields(ctx, k);
    CHECK(combined_ratio(ctx, k, pr, Vec::Zero(ctx.dim(k))) == 0.0);
    const CombinedEstimateReport rep = combined_estimate_check(ctx, k, pr, hb, 20, 5);
    CHECK(rep.max_ratio <= 1.0 + 1e-6);
    CHECK(std::abs(rep.extremal_ratio - 1.0) <= 1e-6);
  }
}

TEST_CASE("kernel projectors") {
  SECTION("trivial topology: the kernel is the range") {
    const HodgeContext ctx(cube(Which::First, 5, selectors::all_n()));
    for (int k : {1, 2}) {
      const HarmonicBasis hb = harmonic_fields(ctx, k);
      const KernelProjectorReport rep = kernel_projector_check(ctx, k, hb, Mat(ctx.dim(k), 0), 5, 3);
      CHECK(rep.idempotence <= 1e-10);
      CHECK(rep.self_adjointness <= 1e-10);
      CHECK(rep.kernel_defect <= 1e-8);
      CHECK(rep.range_distance <= 1e-6);
    }
  }
  SECTION("cavity: kernel minus harmonic pre-basis is the range") {
    const GridSpec g = unit_grid(7);
    const HilbertComplex hc = make(Which::First, g, ShapeDescriptor::centered_cavity(g, 1), selectors::all_n());
    const HodgeContext ctx(hc);
    for (int k : {1, 2}) {
      const HarmonicBasis hb = harmonic_fields(ctx, k);
      const KernelProjectorReport rep = kernel_projector_check(ctx, k, hb, hb.coords, 3, 4);
      CHECK(rep.idempotence <= 1e-10);
      CHECK(rep.self_adjointness <= 1e-10);
      CHECK(rep.prebasis_min_sv > 1e-6);
      CHECK(rep.range_distance <= 1e-6);
      // dim(ker cap B-perp) + dim Harm = dim ker, with ker cap B-perp = range A_{k-1}
      CHECK(exact_rank(integer_restricted(hc, k - 1)) + hb.dim() == exact_kernel(hc, k));
    }
  }
}

TEST_CASE("weight independence") {
  SECTION("cube with every partition") {
    const GridSpec g = unit_grid(5);
    const VoxelDomain dom = build_domain(g, ShapeDescriptor::full_box());
    for (const auto& sel : {selectors::all_n(), selectors::all_t(), selectors::half_split(g, 0)}) {
      const WeightStudy st = weight_independence_study(Which::First, dom, partition_boundary(dom, sel), {1, 2, 3});
      CHECK(st.all_equal);
      CHECK(st.labels.size() == 5);
      CHECK(st.labels[1] == "scaled-2");
      for (const auto& d : st.dims) CHECK(d == std::array<int, 2>{0, 0});
    }
  }
  SECTION("cavity") {
    const GridSpec g = unit_grid(7);
    const VoxelDomain dom = build_domain(g, ShapeDescriptor::centered_cavity(g, 1));
    const BoundaryPartition part = partition_boundary(dom, selectors::all_n());
    const WeightStudy st = weight_independence_study(Which::Second, dom, part, {4, 5, 6});
    CHECK(st.all_equal);
    const HodgeContext ctx(build_complex(Which::Second, dom, part, Weight::identity(6), Weight::identity(8)));
    CHECK(st.dims[0][0] == dense_oracle(ctx, 1).harmonic());
    CHECK(st.dims[0][1] == dense_oracle(ctx, 2).harmonic());
  }
}
