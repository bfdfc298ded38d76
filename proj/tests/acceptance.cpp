// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.
#include <bihlab/cli.hpp>
#include <bihlab/identity_suite.hpp>
#include <bihlab/oracle.hpp>
#include <bihlab/weak_bc.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace bihlab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

struct Partition {
  std::string name;
  FaceSelector sel;
};

std::vector<Partition> partitions(const GridSpec& g) {
  return {{"none", selectors::all_n()}, {"all", selectors::all_t()}, {"half", selectors::half_split(g, 0)}};
}

HilbertComplex make(Which w, const VoxelDomain& dom, const FaceSelector& sel, const Weight& eps = Weight::identity(6),
                    const Weight& mu = Weight::identity(8)) {
  return build_complex(w, dom, partition_boundary(dom, sel), eps, mu);
}

VoxelDomain cube(int n) { return build_domain(unit_grid(n), ShapeDescriptor::full_box()); }
VoxelDomain cavity(int n) {
  const GridSpec g = unit_grid(n);
  return build_domain(g, ShapeDescriptor::centered_cavity(g, 1));
}

std::string tag(Which w, int n, const std::string& part) {
  std::ostringstream s;
  s << which_name(w) << " " << n << "^3 gamma_t=" << part;
  return s.str();
}

int cli(const std::vector<std::string>& args, std::string& out) {
  std::vector<std::string> full{"lab"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str();
  return code;
}

Outcome exact_complex() {
  Outcome r;
  double worst = 0.0;
  for (int n = 4; n <= 16; ++n) {
    const VoxelDomain dom = cube(n);
    for (const auto& p : partitions(dom.grid))
      for (Which w : {Which::First, Which::Second}) {
        const auto t0 = Clock::now();
        const HilbertComplex hc = make(w, dom, p.sel);
        double m = 0.0;
        for (int k = 0; k < 2; ++k)
          m = std::max(m, max_abs(SparseOp(ColSparse(hc.D[k + 1].numer) * integer_restricted(hc, k))));
        const double t = seconds_since(t0);
        worst = std::max(worst, t);
        if (m != 0.0) r.fail(tag(w, n, p.name) + " composite " + std::to_string(m));
        if (t >= 10.0) r.fail(tag(w, n, p.name) + " took " + std::to_string(t) + " s");
      }
  }
  if (r.pass) r.detail = "78 cases exact, slowest " + std::to_string(worst) + " s";
  return r;
}

Outcome identities() {
  Outcome r;
  int total = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SuiteReport rep = run_all(unit_grid(8), seed);
    total += static_cast<int>(rep.results.size());
    for (const auto& x : rep.results) {
      if (x.status != "PASS") r.fail(x.id + " " + x.status + " seed " + std::to_string(seed));
      if (x.id.rfind("cx.", 0) == 0 && x.residual != 0.0) r.fail(x.id + " nonzero residual");
    }
  }
  if (r.pass) r.detail = std::to_string(total) + " evaluations pass";
  return r;
}

Outcome kernel_dimensions() {
  Outcome r;
  for (int n = 4; n <= 10; ++n) {
    const VoxelDomain dom = cube(n);
    for (Which w : {Which::First, Which::Second}) {
      const HilbertComplex free = make(w, dom, selectors::all_n());
      const HilbertComplex clamped = make(w, dom, selectors::all_t());
      const int kf = free.levels[0].dim() - exact_rank(integer_restricted(free, 0));
      const int kc = clamped.levels[0].dim() - exact_rank(integer_restricted(clamped, 0));
      if (kf != 4) r.fail(tag(w, n, "none") + " kernel " + std::to_string(kf));
      if (kc != 0) r.fail(tag(w, n, "all") + " kernel " + std::to_string(kc));
    }
  }
  if (r.pass) r.detail = "kernels 4 (free) and 0 (clamped) on 4^3..10^3";
  return r;
}

Outcome trivial_cohomology() {
  Outcome r;
  double worst = 0.0, min_gap = std::numeric_limits<double>::infinity();
  for (int n = 5; n <= 10; ++n) {
    const VoxelDomain dom = cube(n);
    for (const auto& p : {Partition{"none", selectors::all_n()}, Partition{"all", selectors::all_t()}})
      for (Which w : {Which::First, Which::Second}) {
        const auto t0 = Clock::now();
        try {
          const HodgeContext ctx(make(w, dom, p.sel));
          for (int k : {1, 2}) {
            const HarmonicBasis hb = harmonic_fields(ctx, k);
            min_gap = std::min(min_gap, hb.eigen_gap);
            if (hb.dim() != 0) r.fail(tag(w, n, p.name) + " level " + std::to_string(k) + " dim " + std::to_string(hb.dim()));
            if (hb.eigen_gap < 1e2) r.fail(tag(w, n, p.name) + " gap " + std::to_string(hb.eigen_gap));
          }
        } catch (const Error& e) {
          r.fail(tag(w, n, p.name) + " " + e.what());
        }
        const double t = seconds_since(t0);
        worst = std::max(worst, t);
        if (t >= 60.0) r.fail(tag(w, n, p.name) + " took " + std::to_string(t) + " s");
      }
  }
  if (r.pass) {
    std::ostringstream s;
    s << "24 cases, min gap " << min_gap << ", slowest " << worst << " s";
    r.detail = s.str();
  }
  return r;
}

Outcome weight_independence() {
  Outcome r;
  std::vector<std::string> cases;
  auto study = [&](const std::string& name, Which w, const VoxelDomain& dom, const FaceSelector& sel) {
    const WeightStudy st = weight_independence_study(w, dom, partition_boundary(dom, sel), {11, 12, 13});
    std::ostringstream s;
    s << name << " " << which_name(w) << " [" << st.dims.front()[0] << "," << st.dims.front()[1] << "]";
    cases.push_back(s.str());
    if (!st.all_equal) r.fail(s.str() + " dimensions depend on the weight");
  };
  const VoxelDomain box = cube(6);
  const VoxelDomain hole = cavity(7);
  for (Which w : {Which::First, Which::Second}) {
    for (const auto& p : partitions(box.grid)) study("cube-" + p.name, w, box, p.sel);
    study("cavity", w, hole, selectors::all_n());
  }
  if (r.pass) {
    r.detail = "equal for identity, scaled and 3 random weights:";
    for (const auto& c : cases) r.detail += " " + c + ";";
  }
  return r;
}

Outcome oracle_equivalence() {
  Outcome r;
  double worst = 0.0;
  int runs = 0;
  for (int n = 5; n <= 7; ++n)
    for (const std::string which : {"first", "second"})
      for (const std::string part : {"none", "half_x"}) {
        const auto t0 = Clock::now();
        std::string out;
        const int code = cli({"oracle", "--grid", std::to_string(n), "--which", which, "--gamma-t", part, "--seed", "3"}, out);
        const double t = seconds_since(t0);
        worst = std::max(worst, t);
        ++runs;
        const std::string name = which + " " + std::to_string(n) + "^3 gamma_t=" + part;
        if (code != 0) {
          std::string failed;
          try {
            for (const auto& c : Json::parse(out)["checks"])
              if (!c["pass"].get<bool>()) failed += " " + c["name"].get<std::string>();
          } catch (...) {
          }
          r.fail(name + " exit " + std::to_string(code) + failed);
        }
        if (t >= 120.0) r.fail(name + " took " + std::to_string(t) + " s");
      }
  // the cavity carries nonzero cohomology, which the cube cases above cannot probe
  for (Which w : {Which::First, Which::Second}) {
    const HodgeContext ctx(make(w, cavity(7), selectors::all_n()));
    for (int k : {1, 2})
      if (harmonic_fields(ctx, k).dim() != dense_oracle(ctx, k).harmonic())
        r.fail(std::string("cavity ") + which_name(w) + " level " + std::to_string(k));
  }
  if (r.pass) r.detail = std::to_string(runs) + " oracle runs and the cavity agree, slowest " + std::to_string(worst) + " s";
  return r;
}

Outcome helmholtz_fields() {
  Outcome r;
  double res = 0.0, orth = 0.0;
  int fields = 0;
  auto run = [&](const std::string& name, const HilbertComplex& hc) {
    const HodgeContext ctx(hc);
    for (int k : {1, 2}) {
      const HarmonicBasis hb = harmonic_fields(ctx, k);
      const Mat xs = random_matrix(ctx.dim(k), 20, 1000 + 10 * k + fields);
      for (int i = 0; i < 20; ++i) {
        const DecompositionResult d = helmholtz(ctx, k, hb, xs.col(i));
        res = std::max(res, d.residual);
        orth = std::max(orth, d.orthogonality_defect);
        ++fields;
        if (d.residual > 1e-8 || d.orthogonality_defect > 1e-8)
          r.fail(name + " level " + std::to_string(k) + " field " + std::to_string(i));
      }
    }
  };
  const VoxelDomain box = cube(6);
  const int nn = box.grid.num_nodes();
  for (Which w : {Which::First, Which::Second}) {
    for (const auto& p : partitions(box.grid)) run(tag(w, 6, p.name), make(w, box, p.sel));
    run(tag(w, 6, "half") + " random weights", make(w, box, selectors::half_split(box.grid, 1), Weight::random(6, nn, 21),
                                                    Weight::random(8, nn, 22)));
    run(std::string("cavity ") + which_name(w), make(w, cavity(7), selectors::all_n()));
  }
  if (r.pass) {
    std::ostringstream s;
    s << fields << " fields, max residual " << res << ", max orthogonality defect " << orth;
    r.detail = s.str();
  }
  return r;
}

Outcome poincare_estimates() {
  Outcome r;
  double worst_single = 0.0, worst_combined = 0.0, worst_tight = 0.0;
  const VoxelDomain box = cube(5);
  for (Which w : {Which::First, Which::Second})
    for (const auto& p : partitions(box.grid)) {
      const std::string name = tag(w, 5, p.name);
      const HodgeContext ctx(make(w, box, p.sel));
      const PoincareReport pr = poincare_constants(ctx);
      for (int i = 0; i < 3; ++i) {
        const Mat xs = random_matrix(ctx.dim(i), 100, 2000 + i);
        for (int s = 0; s < 100; ++s) {
          const Vec x = corange_projection(ctx, i, xs.col(s), HodgeOptions{});
          const double ratio = ctx.norm(i, x) / (pr.c[i] * ctx.norm(i + 1, ctx.d(i, x)));
          worst_single = std::max(worst_single, ratio);
          if (ratio > 1.0 + 1e-6) r.fail(name + " c" + std::to_string(i) + " sample " + std::to_string(s));
        }
      }
      for (int k : {1, 2}) {
        const CombinedEstimateReport ce = combined_estimate_check(ctx, k, pr, harmonic_fields(ctx, k), 100, 3000 + k);
        worst_combined = std::max(worst_combined, ce.max_ratio);
        worst_tight = std::max(worst_tight, std::abs(ce.extremal_ratio - 1.0));
        if (ce.max_ratio > 1.0 + 1e-6) r.fail(name + " combined level " + std::to_string(k));
        if (std::abs(ce.extremal_ratio - 1.0) > 1e-6) r.fail(name + " tightness level " + std::to_string(k));
      }
    }
  if (r.pass) {
    std::ostringstream s;
    s << "max single ratio " << worst_single << ", max combined " << worst_combined << ", tightness defect "
      << worst_tight;
    r.detail = s.str();
  }
  return r;
}

Outcome weak_equals_strong() {
  Outcome r;
  const VoxelDomain box = cube(6);
  std::string summary;
  for (Which w : {Which::First, Which::Second}) {
    const HilbertComplex hc = make(w, box, selectors::half_split(box.grid, 0));
    for (int k : {1, 2}) {
      const WeakStrongComparison c = compare_weak_strong(hc, k);
      std::ostringstream s;
      s << c.op_name << " " << c.dim_weak << "/" << c.dim_strong << " sin " << c.sin_max_angle;
      summary += " " + s.str() + ";";
      if (!c.pass || c.dim_weak != c.dim_strong || c.sin_max_angle >= 1e-6) r.fail(s.str());
    }
  }
  if (r.pass) r.detail = "weak/strong dims and angles:" + summary;
  return r;
}

Outcome adjoint_signs() {
  using namespace sym_ops;
  Outcome r;
  double worst = 0.0;
  for (int n : {7, 9, 12})
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const GridSpec g = unit_grid(n);
      const double a = adjoint_pairing(Div_T(), Rank::Dev, devGrad_T(), Rank::Vector, -1.0, g, seed).relative_defect;
      const double b = adjoint_pairing(Gradgrad_S(), Rank::Scalar, divDiv_S(), Rank::Sym, 1.0, g, seed + 10).relative_defect;
      worst = std::max({worst, a, b});
      if (a > 1e-12) r.fail("Div_T/devGrad defect " + std::to_string(a));
      if (b > 1e-12) r.fail("Gradgrad/divDiv defect " + std::to_string(b));
    }
  if (r.pass) {
    std::ostringstream s;
    s << "max relative defect " << worst;
    r.detail = s.str();
  }
  return r;
}

Outcome determinism() {
  Outcome r;
  const std::vector<std::vector<std::string>> commands{
      {"identities", "--grid", "6", "--seed", "4"},
      {"build", "--descriptor", std::string(BIHLAB_SOURCE_DIR) + "/configs/cavity.cfg"},
      {"cohomology", "--grid", "6", "--gamma-t", "half_x", "--which", "second", "--seed", "2"},
      {"helmholtz", "--grid", "6", "--level", "1", "--seed", "8"},
      {"poincare", "--grid", "5", "--gamma-t", "all", "--seed", "9"},
      {"weakstrong", "--grid", "6", "--gamma-t", "half_x"},
      {"oracle", "--grid", "5", "--which", "second", "--seed", "5"}};
  for (const auto& cmd : commands) {
    std::string a, b;
    const int ca = cli(cmd, a), cb = cli(cmd, b);
    if (ca != cb || a != b || a.empty()) r.fail(cmd[0] + " output differs between runs");
  }
  if (r.pass) r.detail = std::to_string(commands.size()) + " commands byte-identical across two runs";
  return r;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact complex property", exact_complex},
      {"identity suite", identities},
      {"kernel dimensions", kernel_dimensions},
      {"trivial cohomology", trivial_cohomology},
      {"weight independence", weight_independence},
      {"oracle equivalence", oracle_equivalence},
      {"Helmholtz decomposition", helmholtz_fields},
      {"Poincare estimates", poincare_estimates},
      {"weak equals strong", weak_equals_strong},
      {"adjoint sign conventions", adjoint_signs},
      {"determinism", determinism}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::printf("[%2zu] %s  %s: %s (%.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
