#pragma once

#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "complex_builder.hpp"
#include "error.hpp"
#include "hodge_lab.hpp"
#include "identity_suite.hpp"
#include "io.hpp"
#include "oracle.hpp"
#include "weak_bc.hpp"

namespace bihlab {

struct RunConfig {
  std::string command;
  std::string descriptor;
  std::uint64_t seed = 1;
  int grid = 0;  // 0 picks the command default
  std::string which;    // empty: descriptor value, or "first" without a descriptor
  std::string gamma_t;  // empty: descriptor value, or "none" without a descriptor
  double tol_harm = 1e-8;
  double tol_sub = 1e-8;
  double tol_solver = 1e-13;
  int level = 1;
  int samples = 100;
  std::string field;
  std::string parts;
  std::string spectra;
  std::string out;

  HodgeOptions hodge() const {
    HodgeOptions o;
    o.tol_harm = tol_harm;
    o.tol_solver = tol_solver;
    o.seed = seed;
    return o;
  }
};

/// Failure classes that mean "a check did not hold" (exit 1); every other error is a configuration problem (exit 2).
inline bool is_check_failure(ErrorCode c) {
  return c == ErrorCode::NoSpectralGap || c == ErrorCode::SolverDiverged || c == ErrorCode::NotInRange ||
         c == ErrorCode::RankDeficient || c == ErrorCode::NotSkew;
}

namespace detail {

inline ComplexDescriptor descriptor_for(const RunConfig& rc) {
  if (!rc.descriptor.empty()) {
    ComplexDescriptor d = load_descriptor(rc.descriptor);
    if (!rc.which.empty()) d.which = rc.which == "second" ? Which::Second : Which::First;
    if (!rc.gamma_t.empty()) {
      d.gamma_t = rc.gamma_t;
      d.plane.reset();
    }
    return d;
  }
  std::ostringstream ini;
  ini << "[grid]\ndims = " << rc.grid << "\n[partition]\ngamma_t = " << (rc.gamma_t.empty() ? "none" : rc.gamma_t)
      << "\n[complex]\nwhich = " << (rc.which.empty() ? "first" : rc.which) << "\n";
  std::istringstream is(ini.str());
  return parse_descriptor(is);
}

inline Json hodge_report(const HilbertComplex& hc, Json level, Json dims, Json eigen_gap) {
  Json r;
  r["complex"] = which_name(hc.which());
  r["level"] = std::move(level);
  r["dims"] = std::move(dims);
  r["eigen_gap"] = std::move(eigen_gap);
  return r;
}

inline Json poincare_json(const PoincareReport& pr) {
  return Json{{"c0", number_json(pr.c[0])}, {"c1", number_json(pr.c[1])}, {"c2", number_json(pr.c[2])}};
}

inline Vec seeded_coords(int n, std::uint64_t seed) { return random_matrix(n, 1, seed).col(0); }

inline double rel_diff(const Vec& a, const Vec& b, double scale) {
  return scale > 0.0 ? (a - b).norm() / scale : (a - b).norm();
}

inline int check_level(int k, int lo, int hi) {
  if (k < lo || k > hi)
    throw Error(ErrorCode::ConfigError, "level must lie in " + std::to_string(lo) + ".." + std::to_string(hi));
  return k;
}

// Each command fills `doc` and `checks`; exceptions propagate to cli_main.

inline Json cmd_identities(const RunConfig& rc, std::vector<Check>& checks) {
  if (rc.grid < 2) throw Error(ErrorCode::ConfigError, "grid must have at least 2 nodes per axis");
  const SuiteReport rep = run_all(unit_grid(rc.grid), rc.seed);
  for (const auto& r : rep.results) checks.push_back({r.id, r.status != "FAIL", r.residual, 1e-12 * r.scale});
  return identity_report_json(rep);
}

inline Json cmd_build(const RunConfig& rc, std::vector<Check>& checks) {
  const DescribedComplex dc = build_from_descriptor(descriptor_for(rc));
  const HilbertComplex& hc = dc.hc;
  Json levels = Json::array();
  std::array<int, 3> ranks{};
  for (int k = 0; k < 3; ++k) ranks[k] = exact_rank(integer_restricted(hc, k));
  Json cohom = Json::array();
  for (int k = 0; k < 4; ++k) {
    const DofSpace& sp = hc.levels[k];
    levels.push_back(Json{{"level", k},
                          {"rank", rank_name(sp.rank)},
                          {"lattice", sp.lattice_size()},
                          {"dim", sp.dim()},
                          {"local", sp.num_local},
                          {"images", sp.num_images}});
    cohom.push_back(sp.dim() - (k < 3 ? ranks[k] : 0) - (k > 0 ? ranks[k - 1] : 0));
  }
  Json ops = Json::array();
  for (int k = 0; k < 3; ++k) ops.push_back(Json{{"name", hc.def.op_names[k]}, {"rank", ranks[k]}});
  for (int k = 0; k < 2; ++k) {
    const double v = max_abs(SparseOp(hc.D[k + 1].numer * hc.D[k].numer));
    checks.push_back({"complex_property_" + std::to_string(k), v == 0.0, v, 0.0});
  }
  Json doc;
  doc["complex"] = which_name(hc.which());
  doc["model"] = hc.model == BoundaryModel::Staggered ? "staggered" : "band";
  doc["active_nodes"] = dc.dom.num_active();
  doc["faces"] = Json{{"t", dc.part.num_t()}, {"n", dc.part.num_n()}};
  doc["levels"] = levels;
  doc["operators"] = ops;
  doc["cohomology_exact"] = cohom;
  doc["end_terms"] = {hc.head.dim(), hc.tail.dim()};
  return doc;
}

inline Json cmd_cohomology(const RunConfig& rc, std::vector<Check>& checks) {
  const ComplexDescriptor desc = descriptor_for(rc);
  const DescribedComplex dc = build_from_descriptor(desc);
  const HilbertComplex& hc = dc.hc;
  const HodgeContext ctx(hc);
  const HodgeOptions opt = rc.hodge();
  Json harm = Json::array(), gaps = Json::array(), reduced = Json::array(), exact = Json::array();
  std::array<int, 3> ranks{};
  for (int k = 0; k < 3; ++k) ranks[k] = exact_rank(integer_restricted(hc, k));
  double min_gap = std::numeric_limits<double>::infinity();
  bool match = true;
  std::array<int, 4> h{};
  for (int k = 0; k < 4; ++k) {
    const HarmonicBasis hb = harmonic_fields(ctx, k, opt);
    h[k] = hb.dim();
    harm.push_back(hb.dim());
    gaps.push_back(number_json(hb.eigen_gap));
    min_gap = std::min(min_gap, hb.eigen_gap);
    const int ex = hc.levels[k].dim() - (k < 3 ? ranks[k] : 0) - (k > 0 ? ranks[k - 1] : 0);
    exact.push_back(ex);
    match = match && ex == hb.dim();
  }
  reduced = {h[0] - hc.head.dim(), h[1], h[2], h[3] - hc.tail.dim()};
  Json doc = hodge_report(hc, "all", reduced, gaps);
  doc["harmonic"] = harm;
  doc["exact"] = exact;
  doc["end_terms"] = {hc.head.dim(), hc.tail.dim()};
  checks.push_back({"eigen_gap", min_gap >= opt.gap_min, min_gap, opt.gap_min});
  checks.push_back({"iterative_matches_exact", match, match ? 0.0 : 1.0, 0.0});
  checks.push_back({"end_terms_harmonic", h[0] == hc.head.dim() && h[3] == hc.tail.dim(),
                    static_cast<double>(std::abs(h[0] - hc.head.dim()) + std::abs(h[3] - hc.tail.dim())), 0.0});
  if (desc.extendable.value_or(false))
    checks.push_back({"extendable_trivial", h[1] == 0 && h[2] == 0, static_cast<double>(h[1] + h[2]), 0.0});

  const std::vector<std::uint64_t> seeds{rc.seed, rc.seed + 1, rc.seed + 2};
  const WeightStudy st = weight_independence_study(desc.which, dc.dom, dc.part, seeds, desc.weight_cond, desc.build, opt);
  Json study = Json::array();
  for (std::size_t i = 0; i < st.labels.size(); ++i) study.push_back(Json{{"weights", st.labels[i]}, {"dims", st.dims[i]}});
  doc["weight_study"] = study;
  checks.push_back({"weight_independence", st.all_equal, st.all_equal ? 0.0 : 1.0, 0.0});
  return doc;
}

inline Json cmd_helmholtz(const RunConfig& rc, std::vector<Check>& checks) {
  const DescribedComplex dc = build_from_descriptor(descriptor_for(rc));
  const HilbertComplex& hc = dc.hc;
  const int k = check_level(rc.level, 0, 3);
  const HodgeContext ctx(hc);
  const HodgeOptions opt = rc.hodge();
  Vec x;
  if (!rc.field.empty()) {
    const Field f = load_field(rc.field, hc.levels[k].rank);
    if (f.grid.dims != hc.dom.grid.dims) throw Error(ErrorCode::ShapeMismatch, "field grid differs from the complex grid");
    x = coords_from_lattice(hc.levels[k], hc.levels[k].lattice_from_field(f));
  } else {
    x = seeded_coords(ctx.dim(k), rc.seed);
  }
  const HarmonicBasis hb = harmonic_fields(ctx, k, opt);
  const DecompositionResult d = helmholtz(ctx, k, hb, x, opt);
  Json doc = hodge_report(hc, k, Json{{"level", ctx.dim(k)}, {"harmonic", hb.dim()}}, number_json(hb.eigen_gap));
  doc["norms"] = Json{{"field", ctx.norm(k, x)},
                      {"range", ctx.norm(k, d.range_part)},
                      {"harmonic", ctx.norm(k, d.harmonic_part)},
                      {"corange", ctx.norm(k, d.corange_part)}};
  doc["cg_iterations"] = d.iterations;
  checks.push_back({"reconstruction", d.residual <= 1e-8, d.residual, 1e-8});
  checks.push_back({"orthogonality", d.orthogonality_defect <= 1e-8, d.orthogonality_defect, 1e-8});
  if (!rc.parts.empty()) {
    const DofSpace& sp = hc.levels[k];
    save_field(rc.parts + "_range.bihf", sp.to_field(d.range_part));
    save_field(rc.parts + "_harmonic.bihf", sp.to_field(d.harmonic_part));
    save_field(rc.parts + "_corange.bihf", sp.to_field(d.corange_part));
  }
  return doc;
}

inline Json cmd_poincare(const RunConfig& rc, std::vector<Check>& checks) {
  const DescribedComplex dc = build_from_descriptor(descriptor_for(rc));
  const HilbertComplex& hc = dc.hc;
  const HodgeContext ctx(hc);
  const HodgeOptions opt = rc.hodge();
  const PoincareReport pr = poincare_constants(ctx, opt);
  const double slack = 1.0 + 1e-6;
  for (int i = 0; i < 3; ++i) {
    const Mat xs = random_matrix(ctx.dim(i), rc.samples, rc.seed + 101 * (i + 1));
    double worst = 0.0;
    for (int s = 0; s < rc.samples; ++s) {
      const Vec x = corange_projection(ctx, i, Vec(xs.col(s)), opt);
      const double nd = ctx.norm(i + 1, ctx.d(i, x));
      if (nd > 0.0) worst = std::max(worst, ctx.norm(i, x) / (pr.c[i] * nd));
    }
    checks.push_back({"poincare_" + std::to_string(i), worst <= slack, worst, slack});
  }
  Json combined = Json::array();
  std::array<HarmonicBasis, 2> hbs;
  for (int k = 1; k <= 2; ++k) {
    hbs[k - 1] = harmonic_fields(ctx, k, opt);
    const CombinedEstimateReport ce = combined_estimate_check(ctx, k, pr, hbs[k - 1], rc.samples, rc.seed + 7 * k);
    combined.push_back(Json{{"level", k}, {"max_ratio", ce.max_ratio}, {"extremal_ratio", ce.extremal_ratio}});
    checks.push_back({"combined_" + std::to_string(k), ce.max_ratio <= slack, ce.max_ratio, slack});
    checks.push_back({"combined_tight_" + std::to_string(k), std::abs(ce.extremal_ratio - 1.0) <= 1e-6,
                      std::abs(ce.extremal_ratio - 1.0), 1e-6});
  }
  Json doc = hodge_report(hc, "all", {hbs[0].dim(), hbs[1].dim()},
                          {number_json(pr.gap[0]), number_json(pr.gap[1]), number_json(pr.gap[2])});
  doc["poincare"] = poincare_json(pr);
  doc["beta"] = pr.beta[1];
  doc["combined"] = combined;
  const double gmin = std::min({pr.gap[0], pr.gap[1], pr.gap[2]});
  checks.push_back({"eigen_gap", gmin >= opt.gap_min, gmin, opt.gap_min});
  if (!rc.spectra.empty()) {
    const int k = check_level(rc.level, 1, 2);
    write_text(rc.spectra, spectrum_csv(hbs[k - 1].eigenvalues));
  }
  return doc;
}

inline Json cmd_weakstrong(const RunConfig& rc, std::vector<Check>& checks) {
  const DescribedComplex dc = build_from_descriptor(descriptor_for(rc));
  const HilbertComplex& hc = dc.hc;
  Json rows = Json::array();
  for (int k = 0; k < 3; ++k) {
    const WeakStrongComparison c = compare_weak_strong(hc, k, 1e-6, rc.tol_sub);
    rows.push_back(Json{{"level", k},
                        {"operator", c.op_name},
                        {"dim_strong", c.dim_strong},
                        {"dim_weak", c.dim_weak},
                        {"sin_max_angle", c.sin_max_angle},
                        {"strong_in_weak", c.strong_in_weak},
                        {"singular_gap", number_json(c.gap)}});
    checks.push_back({"weak_equals_strong_" + c.op_name, c.pass, c.sin_max_angle, 1e-6});
  }
  Json doc;
  doc["complex"] = which_name(hc.which());
  doc["comparisons"] = rows;
  return doc;
}

inline Json cmd_oracle(const RunConfig& rc, std::vector<Check>& checks) {
  const DescribedComplex dc = build_from_descriptor(descriptor_for(rc));
  const HilbertComplex& hc = dc.hc;
  const HodgeContext ctx(hc);
  int total = 0;
  for (int k = 0; k < 4; ++k) total += ctx.dim(k);
  if (total > 20000)
    throw Error(ErrorCode::ConfigError, "dense oracle refuses " + std::to_string(total) + " DOFs (limit 20000)");
  const HodgeOptions opt = rc.hodge();
  Json levels = Json::array();
  std::array<DenseLevelOracle, 4> orc;
  std::array<HarmonicBasis, 4> hbs;
  for (int k = 0; k < 4; ++k) {
    orc[k] = dense_oracle(ctx, k, opt);
    hbs[k] = harmonic_fields(ctx, k, opt);
    levels.push_back(Json{{"level", k}, {"dim", orc[k].dim}, {"harmonic_dense", orc[k].harmonic_dim},
                          {"harmonic_iterative", hbs[k].dim()}});
    checks.push_back({"harmonic_dim_" + std::to_string(k), orc[k].harmonic_dim == hbs[k].dim(),
                      static_cast<double>(std::abs(orc[k].harmonic_dim - hbs[k].dim())), 0.0});
  }
  const PoincareReport pr = poincare_constants(ctx, opt);
  Json dense_c;
  for (int i = 0; i < 3; ++i) {
    const double cd = 1.0 / std::sqrt(orc[i].lambda_up_min);
    dense_c["c" + std::to_string(i)] = number_json(cd);
    const double rel = std::abs(pr.c[i] - cd) / cd;
    checks.push_back({"poincare_c" + std::to_string(i), rel <= 1e-8, rel, 1e-8});
  }
  for (int k = 1; k <= 2; ++k) {
    const Vec x = seeded_coords(ctx.dim(k), rc.seed + k);
    const DecompositionResult d = helmholtz(ctx, k, hbs[k], x, opt);
    const double nx = x.norm();
    const double e = std::max({rel_diff(d.range_part, orc[k].range_part(x), nx),
                               rel_diff(d.corange_part, orc[k].corange_part(x), nx),
                               rel_diff(d.harmonic_part, orc[k].harmonic_part(x), nx)});
    checks.push_back({"helmholtz_projection_" + std::to_string(k), e <= 1e-8, e, 1e-8});
  }
  Json doc = hodge_report(hc, "all", {hbs[1].dim(), hbs[2].dim()},
                          {number_json(hbs[1].eigen_gap), number_json(hbs[2].eigen_gap)});
  doc["poincare"] = poincare_json(pr);
  doc["poincare_dense"] = dense_c;
  doc["levels"] = levels;
  return doc;
}

}  // namespace detail

/// Runs one command of the lab; the JSON document goes to `out` (or to --out), diagnostics to `err`.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Laboratory for biharmonic Hilbert complexes on voxel domains", "lab"};
  app.require_subcommand(1, 1);
  RunConfig rc;
  auto common = [&](CLI::App* sc) {
    sc->add_option("--grid", rc.grid, "Nodes per axis of the cube (ignored with --descriptor)");
    sc->add_option("--seed", rc.seed, "Seed for random fields and weights");
    sc->add_option("--descriptor", rc.descriptor, "INI complex descriptor")->check(CLI::ExistingFile);
    sc->add_option("--which", rc.which, "Complex: first or second (overrides the descriptor)")->check(CLI::IsMember({"first", "second"}));
    sc->add_option("--gamma-t", rc.gamma_t, "Gamma_t: none, all, half_x, half_y, half_z (overrides the descriptor)")
        ->check(CLI::IsMember({"none", "all", "half_x", "half_y", "half_z"}));
    sc->add_option("--tol-harm", rc.tol_harm, "Relative harmonic threshold")->check(CLI::PositiveNumber);
    sc->add_option("--tol-sub", rc.tol_sub, "Relative rank cut of weak spaces")->check(CLI::PositiveNumber);
    sc->add_option("--tol-solver", rc.tol_solver, "Relative CG residual")->check(CLI::PositiveNumber);
    sc->add_option("--out", rc.out, "Write the JSON report to this file instead of stdout");
  };
  struct Sub {
    const char* name;
    const char* help;
    int grid;
  };
  const std::vector<Sub> subs{{"identities", "Run the identity suite", 8},
                              {"build", "Assemble a complex and print its dimension ledger", 6},
                              {"cohomology", "Harmonic dimensions and the weight-independence study", 6},
                              {"helmholtz", "Helmholtz decomposition of a field file or a seeded field", 6},
                              {"poincare", "Poincare constants and the combined estimate", 6},
                              {"weakstrong", "Compare weak and strong boundary-condition spaces", 6},
                              {"oracle", "Dense cross-check of the iterative results", 5}};
  std::vector<CLI::App*> handles;
  for (const auto& s : subs) {
    CLI::App* sc = app.add_subcommand(s.name, s.help);
    handles.push_back(sc);
    common(sc);
    sc->callback([&rc, name = s.name] { rc.command = name; });
  }
  handles[3]->add_option("--level", rc.level, "Level 0..3")->capture_default_str();
  handles[3]->add_option("--field", rc.field, "Field file to decompose");
  handles[3]->add_option("--parts", rc.parts, "Prefix for saving the three parts as field files");
  handles[4]->add_option("--samples", rc.samples, "Random samples per check")->check(CLI::PositiveNumber);
  handles[4]->add_option("--spectra", rc.spectra, "Write the low spectrum of --level as CSV");
  handles[4]->add_option("--level", rc.level, "Level for --spectra (1 or 2)");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? 0 : 2;
  }

  if (rc.grid == 0)
    for (const auto& s : subs)
      if (rc.command == s.name) rc.grid = s.grid;

  std::vector<Check> checks;
  Json doc;
  try {
    if (rc.command == "identities") doc = detail::cmd_identities(rc, checks);
    else if (rc.command == "build") doc = detail::cmd_build(rc, checks);
    else if (rc.command == "cohomology") doc = detail::cmd_cohomology(rc, checks);
    else if (rc.command == "helmholtz") doc = detail::cmd_helmholtz(rc, checks);
    else if (rc.command == "poincare") doc = detail::cmd_poincare(rc, checks);
    else if (rc.command == "weakstrong") doc = detail::cmd_weakstrong(rc, checks);
    else doc = detail::cmd_oracle(rc, checks);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return is_check_failure(e.code()) ? 1 : 2;
  }
  if (doc.is_object()) doc["checks"] = checks_json(checks);
  const std::string text = doc.dump(2) + "\n";
  if (rc.out.empty()) {
    out << text;
  } else {
    try {
      write_text(rc.out, text);
    } catch (const Error& e) {
      err << e.what() << '\n';
      return 2;
    }
  }
  int failed = 0;
  for (const auto& c : checks)
    if (!c.pass) {
      ++failed;
      err << "check failed: " << c.name << " value " << c.value << " tolerance " << c.tolerance << '\n';
    }
  return failed == 0 ? 0 : 1;
}

}  // namespace bihlab
