#include <algorithm>
#include <cmath>
#include <functional>

#include "doctest.h"
#include "pbsurf/error.hpp"
#include "pbsurf/examples.hpp"
#include "pbsurf/lift.hpp"
#include "pbsurf/verify.hpp"

using namespace pbsurf;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::io;
}

SharpnessExample sharpness(int d, int n) {
  SharpnessParams p;
  p.d = d;
  p.n_theta = n;
  p.n_z = n;
  return build_sharpness_example(p);
}

CoverAndCollection lattice(int n, int per_side, double ramp, std::uint64_t seed, double jitter,
                           CollectionMode mode) {
  TorusBumpParams p;
  p.n = n;
  p.per_side = per_side;
  p.ramp = ramp;
  p.seed = seed;
  p.jitter = jitter;
  p.amplitude_spread = mode == CollectionMode::positive ? 0.3 : 0.0;
  p.mode = mode;
  return torus_bump_collection(p);
}

}  // namespace

TEST_CASE("measures") {
  auto t = SurfaceChart::torus(32, 32);
  auto area = Measure::area_form(t);
  CHECK(area.total() == doctest::Approx(1.0).epsilon(1e-12));
  auto raw = Measure::area_form(t, false);
  CHECK(raw.total() == doctest::Approx(t->total_area()).epsilon(1e-12));

  Mask left(t->size(), 0);
  for (NodeIndex k = 0; k < t->size(); ++k) left[k] = t->i_of(k) < 16;
  CHECK(area.of(left) == doctest::Approx(0.5).epsilon(1e-12));

  auto dirac = Measure::dirac_sum(t, {0, 5, 40});
  CHECK(dirac.total() == 3.0);
  CHECK(dirac.support().size() == 3);
  CHECK(dirac.of(left) == 3.0);

  std::vector<double> dv(t->size(), 0.0);
  for (NodeIndex k = 0; k < t->size(); ++k) dv[k] = left[k] ? 3.0 : 1.0;
  auto custom = Measure::custom(ScalarField(t, dv));
  CHECK(custom.total() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(custom.of(left) == doctest::Approx(0.75).epsilon(1e-12));

  CHECK(code_of([&] { Measure::dirac_sum(t, {0}, {0.0}); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { Measure::dirac_sum(t, {}); }) == ErrorCode::invalid_argument);
  dv[3] = -1.0;
  CHECK(code_of([&] { Measure::custom(ScalarField(t, dv)); }) == ErrorCode::invalid_argument);
}

TEST_CASE("reports pass exactly when the margin clears the tolerance") {
  auto r = make_report("x", 0.96, 1.0, 0.05, "p");
  CHECK(r.margin == doctest::Approx(-0.04));
  CHECK(r.tolerance == doctest::Approx(0.05));
  CHECK(r.pass);
  CHECK_FALSE(make_report("x", 0.94, 1.0, 0.05, "p").pass);
  CHECK(make_report("x", 0.0, 0.0, 0.05, "p").pass);
}

TEST_CASE("sharpness example: north disc and its star") {
  const auto ex = sharpness(4, 256);
  const auto h = assess_hypotheses(ex.cover, ex.collection);
  CHECK(h.base());
  CHECK(h.localized3);
  CHECK_FALSE(h.genus_positive);
  VerifyOptions opt;
  opt.hypotheses = &h;

  const auto ce = check_confined_essential(ex.cover, ex.collection, ex.north, opt);
  CHECK(ce.value == doctest::Approx(1.25).epsilon(0.02));
  CHECK(ce.bound == 1.0);
  CHECK(ce.pass);

  const NodeIndex pole = ex.localization[0];
  const auto st = check_star(ex.cover, ex.collection, pole, opt);
  CHECK(st.value == doctest::Approx(1.25).epsilon(0.02));
  CHECK(st.bound == 1.0);
  CHECK(st.pass);

  // Away from the localization points the star is either confined or gets
  // the weaker constant; either way the inequality holds.
  const auto& s = ex.cover.chart();
  for (ChartPoint p : {ChartPoint{1.0, 0.0}, ChartPoint{2.5, 0.5}, ChartPoint{4.0, -0.6}}) {
    const auto r = check_star(ex.cover, ex.collection, s.nearest_node(p), opt);
    CHECK((r.bound == 1.0 || r.bound == 0.25));
    CHECK(r.pass);
  }

  const auto pb = check_pb_bound(ex.cover, ex.collection, Measure::area_form(ex.cover.chart_ptr()), opt);
  CHECK(pb.pass);
  const auto dirac = check_pb_bound(
      ex.cover, ex.collection, Measure::dirac_sum(ex.cover.chart_ptr(), ex.localization), opt);
  CHECK(dirac.bound == doctest::Approx(3.0));
  CHECK(dirac.pass);

  const auto norm = ex.collection.normalized();
  const auto pr = check_partition_refinement(ex.cover, norm, ex.north);
  CHECK(pr.value >= 1.9);
  CHECK(pr.pass);
  CHECK(code_of([&] { check_partition_refinement(ex.cover, ex.collection, ex.north, opt); }) ==
        ErrorCode::precondition);
}

TEST_CASE("two caps: every check refuses") {
  auto cc = two_cap_partition(64, 64);
  const auto& U = cc.cover;
  const auto& F = cc.collection;
  CHECK(sup_norm(F.pb()) <= 1e-12);
  const auto h = assess_hypotheses(U, F);
  CHECK(h.base());
  CHECK_FALSE(h.localized3);
  CHECK(confined_essential_discs(U).empty());
  for (int j : {0, 1}) {
    CHECK(classify_disc(U, j).essential);
    CHECK_FALSE(classify_disc(U, j).confined);
    CHECK(code_of([&] { check_confined_essential(U, F, j); }) == ErrorCode::precondition);
    CHECK(code_of([&] { check_partition_refinement(U, F, j); }) == ErrorCode::precondition);
  }
  const auto& s = U.chart();
  for (ChartPoint p : {ChartPoint{0.0, 0.9}, ChartPoint{1.0, 0.0}, ChartPoint{3.0, -0.9}}) {
    CHECK(code_of([&] { check_star(U, F, s.nearest_node(p)); }) == ErrorCode::hypotheses_unmet);
  }
  CHECK(code_of([&] { check_pb_bound(U, F, Measure::area_form(U.chart_ptr())); }) ==
        ErrorCode::hypotheses_unmet);
  const auto avg = averaging_report(U, F, Measure::area_form(U.chart_ptr()));
  CHECK(avg.mu_c == 0.0);
  CHECK(avg.pb_integral <= 1e-12);
}

TEST_CASE("torus lattices satisfy every inequality") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (auto mode : {CollectionMode::partition, CollectionMode::positive}) {
      CAPTURE(seed);
      auto cc = lattice(96, 3, 0.03, seed, 0.005, mode);
      const auto h = assess_hypotheses(cc.cover, cc.collection);
      REQUIRE(h.base());
      CHECK(h.genus_positive);
      VerifyOptions opt;
      opt.hypotheses = &h;
      const auto ce = confined_essential_discs(cc.cover);
      CHECK(ce.size() == 9);
      for (int j : ce) CHECK(check_confined_essential(cc.cover, cc.collection, j, opt).pass);
      const auto& t = cc.cover.chart();
      for (NodeIndex k = 0; k < t.size(); k += 997) {
        CHECK(check_star(cc.cover, cc.collection, k, opt).pass);
      }
      const auto area = check_pb_bound(cc.cover, cc.collection, Measure::area_form(cc.cover.chart_ptr()), opt);
      CHECK(area.pass);
      CHECK(area.bound == doctest::Approx(t.total_area() / cc.cover.capacity()).epsilon(1e-12));
      const auto half = check_half_capacity_bound(cc.cover, cc.collection, opt);
      CHECK(half.pass);
      CHECK(area.bound >= 2.0 * half.bound * (1 - 1e-12));
      CHECK(check_essential_count(cc.cover, cc.collection, opt).pass);
    }
  }
}

TEST_CASE("disjoint confined-essential discs double up under a partition") {
  auto cc = lattice(128, 4, 0.02, 7, 0.0, CollectionMode::partition);
  const auto ce = confined_essential_discs(cc.cover);
  REQUIRE(std::find(ce.begin(), ce.end(), 0) != ce.end());
  REQUIRE(std::find(ce.begin(), ce.end(), 10) != ce.end());
  const auto r = check_partition_disjoint(cc.cover, cc.collection, {0, 10});
  CHECK(r.bound == 4.0);
  CHECK(r.pass);
  CHECK(code_of([&] { check_partition_disjoint(cc.cover, cc.collection, {0, 1}); }) ==
        ErrorCode::precondition);
}

TEST_CASE("averaging report: Fubini rearrangement and measure cases") {
  auto cc = lattice(64, 3, 0.02, 4, 0.0, CollectionMode::partition);
  const auto& U = cc.cover;
  const auto& F = cc.collection;
  const auto h = assess_hypotheses(U, F);
  REQUIRE(h.base());
  VerifyOptions opt;
  opt.hypotheses = &h;

  const auto area = averaging_report(U, F, Measure::area_form(U.chart_ptr()), opt);
  CHECK(std::abs(area.fubini_lhs - area.fubini_rhs) <= 1e-9 * std::abs(area.fubini_rhs));
  CHECK(area.mu_c == doctest::Approx(1.0).epsilon(1e-12));
  const auto pb = check_pb_bound(U, F, Measure::area_form(U.chart_ptr()), opt);
  CHECK(area.lower == doctest::Approx(pb.bound).epsilon(1e-12));
  CHECK(area.chain_holds);
  CHECK(area.fubini_rhs <= area.mu_u * area.pb_integral * (1 + 1e-12));

  auto loc = U.find_localization(4);
  REQUIRE(loc.has_value());
  const auto dirac = averaging_report(U, F, Measure::dirac_sum(U.chart_ptr(), *loc), opt);
  CHECK(dirac.mu_u == 1.0);
  CHECK(dirac.mu_c == 4.0);
  CHECK(std::abs(dirac.fubini_lhs - dirac.fubini_rhs) <= 1e-9 * std::abs(dirac.fubini_rhs));
  CHECK(dirac.chain_holds);
}

TEST_CASE("star integrals are unchanged by a node-aligned unroll") {
  auto cc = lattice(96, 3, 0.03, 2, 0.0, CollectionMode::partition);
  auto p = CoveringMap::torus_unroll(cc.collection.chart_ptr(), 2, 1);
  auto lc = lift_cover(p, cc.cover);
  auto G = lift_collection(p, cc.collection, lc);
  const auto hb = assess_hypotheses(cc.cover, cc.collection);
  const auto hl = assess_hypotheses(lc.cover, G);
  REQUIRE(hb.base());
  REQUIRE(hl.base());
  VerifyOptions ob;
  ob.hypotheses = &hb;
  VerifyOptions ol;
  ol.hypotheses = &hl;
  const auto& t = cc.cover.chart();
  const auto& s = lc.cover.chart();
  for (NodeIndex k = 0; k < t.size(); k += 1231) {
    const auto base = check_star(cc.cover, cc.collection, k, ob);
    // Node (i, j) of the target is the image of source nodes (i, j) and (i + n, j).
    for (int sheet = 0; sheet < 2; ++sheet) {
      const NodeIndex k2 = s.index(t.i_of(k) + sheet * t.n1(), t.j_of(k));
      const auto up = check_star(lc.cover, G, k2, ol);
      CHECK(up.value == doctest::Approx(base.value).epsilon(1e-10));
    }
  }
}

TEST_CASE("hypotheses report the first failure") {
  auto cc = lattice(64, 3, 0.02, 4, 0.0, CollectionMode::partition);
  auto F = condense(cc.collection, {0, 0, 1, 1, 2, 2, 3, 3, 3});
  const auto h = assess_hypotheses(cc.cover, F);
  CHECK_FALSE(h.base());
  CHECK_FALSE(h.summary.empty());
  CHECK(code_of([&] { check_star(cc.cover, F, 0); }) == ErrorCode::hypotheses_unmet);
}
