#include <catch_amalgamated.hpp>

#include <bihlab/identity_suite.hpp>
#include <map>
#include <set>

using namespace bihlab;

namespace {

const IdentityRecord& find(const std::vector<IdentityRecord>& reg, const std::string& id) {
  for (const auto& r : reg)
    if (r.id == id) return r;
  FAIL("no identity " << id);
  return reg.front();
}

}  // namespace

TEST_CASE("registry completeness") {
  const auto reg = identity_registry();
  CHECK(reg.size() == 49);
  std::set<std::string> ids, groups;
  int complex_rel = 0;
  for (const auto& r : reg) {
    ids.insert(r.id);
    if (r.scope == IdentityScope::ComplexProperty) ++complex_rel;
    else groups.insert(r.group);
  }
  CHECK(ids.size() == reg.size());
  CHECK(complex_rel == 8);
  for (int g = 1; g <= 16; ++g) {
    const std::string name = g < 10 ? "g0" + std::to_string(g) : "g" + std::to_string(g);
    CHECK(groups.count(name) == 1);
  }
  for (const auto& r : reg)
    if (r.scope != IdentityScope::ComplexProperty) CHECK(expr_comps(r.lhs) == expr_comps(r.rhs));
}

TEST_CASE("full suite on 8^3 with five seeds") {
  const GridSpec g = unit_grid(8);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SuiteReport rep = run_all(g, seed);
    CHECK(rep.failed == 0);
    CHECK(rep.skipped == 0);
    for (const auto& r : rep.results) {
      INFO(r.id << " residual " << r.residual);
      CHECK(r.status == "PASS");
      CHECK(r.residual <= 1e-12 * r.scale);
      if (r.id.rfind("cx.", 0) == 0) CHECK(r.residual == 0.0);
    }
  }
}

TEST_CASE("degenerate interior") {
  const auto reg = identity_registry();
  const SuiteReport rep = run_all(unit_grid(2), 1);
  CHECK(rep.failed == 0);
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto& r = rep.results[i];
    if (reg[i].scope == IdentityScope::Differential) CHECK(r.status == "SKIPPED-EMPTY-INTERIOR");
    if (reg[i].scope == IdentityScope::Algebraic) CHECK(r.status == "PASS");
    if (reg[i].scope == IdentityScope::ComplexProperty) {
      CHECK(r.status == "PASS");
      CHECK(r.residual == 0.0);
    }
  }
}

TEST_CASE("conditional identities and special inputs") {
  const auto reg = identity_registry();
  const GridSpec g = unit_grid(8);
  const IdentityResult tr_rot = run_identity(find(reg, "g10b"), g, 3);
  CHECK(tr_rot.status == "PASS");
  CHECK(tr_rot.residual <= 1e-12 * tr_rot.scale);

  detail::FieldInputs in = random_inputs(g, 4);
  in.u.setConstant(2.5);
  const IdentityResult div_uid = run_identity(find(reg, "g04a"), g, 4, 1e-12, &in);
  CHECK(div_uid.status == "PASS");
  CHECK(div_uid.residual == 0.0);

  const IdentityResult dev_rot = run_identity(find(reg, "g07a"), g, 5);
  CHECK(dev_rot.status == "PASS");
  CHECK(dev_rot.residual <= 1e-12 * dev_rot.scale);
}

TEST_CASE("wrong identities are detected") {
  using namespace ex;
  const GridSpec g = unit_grid(8);
  const Expr v = in('v'), S = in('S');
  // the correct relation has Div S^T on the right
  const IdentityRecord transposition = detail::make_identity("bad1", "bad", "2 spn^-1 skw Rot S = Div S - grad tr S",
                                                             scale(Rational(2), spn_inv(skw(Rot(S)))),
                                                             sub(Div(S), grad(tr(S))));
  CHECK(run_identity(transposition, g, 1).status == "FAIL");
  // wrong coefficient
  const IdentityRecord coefficient = detail::make_identity("bad2", "bad", "2 Div(dev Grad v)^T = 2 grad div v",
                                                           scale(Rational(2), Div(T(dev(Grad(v))))),
                                                           scale(Rational(2), grad(div(v))));
  CHECK(run_identity(coefficient, g, 1).status == "FAIL");
  // an identity whose hypothesis is dropped
  const IdentityRecord hypothesis = detail::make_identity("bad3", "bad", "tr Rot S = 0", tr(Rot(S)), zero_like(tr(S)));
  CHECK(run_identity(hypothesis, g, 1).status == "FAIL");
  CHECK_THROWS_AS(detail::make_identity("bad4", "bad", "shape", grad(in('u')), div(v)), Error);
}

TEST_CASE("reports are reproducible") {
  const SuiteReport a = run_all(unit_grid(6), 9), b = run_all(unit_grid(6), 9);
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    CHECK(a.results[i].id == b.results[i].id);
    CHECK(a.results[i].residual == b.results[i].residual);
  }
}
