#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pbsurf/collection.hpp"
#include "pbsurf/error.hpp"
#include "pbsurf/examples.hpp"
#include "pbsurf/fields.hpp"

using namespace pbsurf;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Smooth positive fields with generic brackets on a small torus.
PositiveCollection wavy_torus(int n, int count, unsigned seed) {
  auto t = SurfaceChart::torus(n, n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScalarField> fields;
  for (int i = 0; i < count; ++i) {
    const double a = u(rng), b = u(rng), p = u(rng), q = u(rng);
    const int k1 = 1 + static_cast<int>(3 * u(rng));
    const int k2 = 1 + static_cast<int>(3 * u(rng));
    fields.push_back(sample_field(t, [=](double x, double y) {
      return 2.0 + a * std::sin(kTwoPi * (k1 * x + p)) + b * std::cos(kTwoPi * (k2 * y + q)) +
             0.5 * a * b * std::sin(kTwoPi * (x + y + p));
    }));
  }
  return PositiveCollection(t, std::move(fields), std::vector<int>(count, 0),
                            CollectionMode::positive);
}

double brute_pb(const PositiveCollection& F) {
  const auto& c = F.chart();
  const std::size_t n = F.size();
  std::vector<std::vector<double>> d1, d2;
  for (const auto& f : F.fields()) {
    d1.push_back(derivative1(c, f.values()));
    d2.push_back(derivative2(c, f.values()));
  }
  double best = 0.0;
  for (NodeIndex k = 0; k < c.size(); ++k) {
    for (unsigned am = 0; am < (1u << n); ++am) {
      for (unsigned bm = 0; bm < (1u << n); ++bm) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double ai = (am >> i & 1) ? 1.0 : -1.0;
            const double bj = (bm >> j & 1) ? 1.0 : -1.0;
            s += ai * bj * (d1[i][k] * d2[j][k] - d2[i][k] * d1[j][k]) / c.density(k);
          }
        }
        best = std::max(best, std::abs(s));
      }
    }
  }
  return best;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (NodeIndex k = 0; k < a.values().size(); ++k) {
    m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  }
  return m;
}

}  // namespace

TEST_CASE("two-cap partition validates and has vanishing brackets") {
  auto cc = two_cap_partition(64, 64);
  const auto rep = validate(cc.collection, cc.cover);
  CHECK(rep.pass());
  REQUIRE(rep.find("sum_equals_one") != nullptr);
  CHECK(rep.find("sum_equals_one")->worst <= 1e-12);
  CHECK(sup_norm(pb_function(cc.collection)) == 0.0);
  const auto bounds = pb_invariant(cc.collection, PbMethod::exact);
  CHECK(bounds.lower == 0.0);
  CHECK(bounds.upper == 0.0);
}

TEST_CASE("validation reports the offending field and node") {
  auto cc = two_cap_partition(32, 32);
  const auto& F = cc.collection;
  std::vector<double> v(F.field(1).values().begin(), F.field(1).values().end());
  const NodeIndex bad = F.chart().index(3, 20);
  v[bad] = -0.25;
  PositiveCollection G(F.chart_ptr(), {F.field(0), ScalarField(F.chart_ptr(), v)}, {0, 1},
                       CollectionMode::positive);
  const auto rep = validate(G, cc.cover);
  const auto* neg = rep.find("nonnegative");
  REQUIRE(neg != nullptr);
  CHECK(!neg->pass);
  CHECK(neg->field == 1);
  CHECK(neg->node == bad);
  CHECK(neg->worst == -0.25);
  CHECK(!rep.pass());
}

TEST_CASE("support reaching the disc edge is not subordinate") {
  auto t = SurfaceChart::torus(64, 64);
  const ChartPoint c{0.5, 0.5};
  const auto prof = Profile::smoothstep(5);
  Cover cover(t, {Disc::geometric(t, c, 0.3), Disc::geometric(t, {0.0, 0.0}, 0.45),
                  Disc::geometric(t, {0.5, 0.0}, 0.45), Disc::geometric(t, {0.0, 0.5}, 0.45)});
  auto inside = bump_disc(t, c, 0.1, 0.2, prof);
  auto touching = bump_disc(t, c, 0.2, 0.3, prof);
  auto ones = sample_field(t, [](double, double) { return 1.0; });
  PositiveCollection ok(t, {inside, ones}, {0, 1}, CollectionMode::positive);
  PositiveCollection bad(t, {touching, ones}, {0, 1}, CollectionMode::positive);
  // ones is not subordinate to disc 1 either; isolate field 0 by its index.
  const auto r_ok = validate(ok, cover);
  const auto r_bad = validate(bad, cover);
  CHECK(r_ok.find("subordinate")->field == 1);
  CHECK(r_bad.find("subordinate")->field == 0);
  CHECK(r_ok.find("sum_at_least_one")->pass);

  PositiveCollection orphan(t, {inside}, {-1}, CollectionMode::positive);
  CHECK(!validate(orphan, cover).find("subordinate")->pass);
}

TEST_CASE("torus bump collections validate in both modes") {
  TorusBumpParams prm;
  prm.n = 96;
  prm.per_side = 3;
  prm.jitter = 0.01;
  prm.amplitude_spread = 0.2;
  for (auto mode : {CollectionMode::partition, CollectionMode::positive}) {
    prm.mode = mode;
    auto cc = torus_bump_collection(prm);
    const auto rep = validate(cc.collection, cc.cover);
    INFO(to_string(mode));
    for (const auto& it : rep.items) {
      INFO(it.name << " worst " << it.worst << " field " << it.field);
      CHECK(it.pass);
    }
    CHECK(cc.collection.mode() == mode);
  }
}

TEST_CASE("pb function special cases") {
  auto F = wavy_torus(32, 1, 3);
  CHECK(sup_norm(pb_function(F)) == 0.0);

  auto G = wavy_torus(32, 3, 7);
  auto one = PositiveCollection(G.chart_ptr(),
                                {sample_field(G.chart_ptr(), [](double, double) { return 1.0; })},
                                {0}, CollectionMode::positive);
  CHECK(sup_norm(pb_pair_function(G, one)) == 0.0);
  CHECK(max_abs_diff(pb_pair_function(G, G), pb_function(G)) <= 1e-12);
  CHECK(max_abs_diff(G.pb(), pb_function(G)) == 0.0);

  // P_F equals the column sums over every index.
  const auto cols = bracket_column_sum(G, {0, 1, 2});
  for (NodeIndex k = 0; k < cols.size(); ++k) {
    CHECK(cols[k] == doctest::Approx(G.pb().values()[k]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(bracket_column_sum(G, {3}), Error);
}

TEST_CASE("pb function is invariant under relabeling") {
  auto F = wavy_torus(32, 4, 11);
  std::vector<ScalarField> rev(F.fields().rbegin(), F.fields().rend());
  PositiveCollection R(F.chart_ptr(), rev, F.disc_map(), F.mode());
  CHECK(max_abs_diff(F.pb(), R.pb()) <= 1e-13 * sup_norm(F.pb()));
}

TEST_CASE("condensation") {
  auto F = wavy_torus(32, 5, 5);
  SUBCASE("identity") {
    auto C = condense(F, {0, 1, 2, 3, 4});
    CHECK(max_abs_diff(C.pb(), F.pb()) == 0.0);
  }
  SUBCASE("constant map kills the brackets") {
    auto C = condense(F, {0, 0, 0, 0, 0});
    CHECK(C.size() == 1);
    CHECK(sup_norm(C.pb()) == 0.0);
    CHECK(max_abs_diff(C.sum(), F.sum()) <= 1e-12);
  }
  SUBCASE("random maps never increase P") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<int> c(5);
      for (int i = 0; i < 5; ++i) c[i] = i < 3 ? i : static_cast<int>(rng() % 3);
      std::shuffle(c.begin(), c.end(), rng);
      auto C = condense(F, c);
      const auto p = F.pb().values();
      const auto q = C.pb().values();
      for (NodeIndex k = 0; k < p.size(); ++k) REQUIRE(q[k] <= p[k] + 1e-12);
    }
  }
  SUBCASE("disc bookkeeping") {
    PositiveCollection D(F.chart_ptr(), F.fields(), {0, 0, 1, 1, 2}, F.mode());
    auto C = condense(D, {0, 0, 1, 2, 2});
    CHECK(C.disc_map() == std::vector<int>{0, 1, -1});
  }
  CHECK_THROWS_AS(condense(F, {0, 0, 2, 2, 2}), Error);
  CHECK_THROWS_AS(condense(F, {0, 1}), Error);
}

TEST_CASE("fragmentation") {
  auto t = SurfaceChart::torus(64, 64);
  const auto prof = Profile::smoothstep(5);
  auto a = bump_disc(t, {0.25, 0.25}, 0.05, 0.12, prof);
  auto b = bump_disc(t, {0.75, 0.75}, 0.05, 0.12, prof);
  std::vector<double> two(t->size());
  for (NodeIndex k = 0; k < two.size(); ++k) two[k] = a.values()[k] + b.values()[k];
  auto g = sample_field(t, [](double x, double y) {
    return 1.5 + std::sin(kTwoPi * x) * std::cos(kTwoPi * y);
  });
  PositiveCollection F(t, {ScalarField(t, two), g}, {0, 1}, CollectionMode::positive);

  auto G = fragment(F);
  CHECK(G.size() == 3);
  CHECK(G.disc_map() == std::vector<int>{0, 0, 1});
  CHECK(max_abs_diff(G.pb(), F.pb()) == 0.0);
  auto H = fragment(G);
  CHECK(H.size() == G.size());

  // Components two cells apart share a stencil node and stay together.
  std::vector<double> close(t->size(), 0.0);
  close[t->index(10, 10)] = 1.0;
  close[t->index(12, 10)] = 1.0;
  close[t->index(30, 30)] = 1.0;
  PositiveCollection K(t, {ScalarField(t, close), g}, {0, 1}, CollectionMode::positive);
  auto KF = fragment(K);
  CHECK(KF.size() == 3);
  CHECK(max_abs_diff(KF.pb(), K.pb()) == 0.0);
}

TEST_CASE("pb invariant for two fields is twice the bracket") {
  auto F = wavy_torus(48, 2, 23);
  const double br = sup_norm(poisson_bracket(F.field(0), F.field(1)));
  const auto ex = pb_invariant(F, PbMethod::exact);
  CHECK(ex.lower == doctest::Approx(2.0 * br).epsilon(1e-9));
  CHECK(ex.upper == ex.lower);
  const auto sw = pb_invariant(F, PbMethod::sandwich);
  CHECK(sw.lower == doctest::Approx(br).epsilon(1e-9));
  CHECK(sw.upper == doctest::Approx(2.0 * br).epsilon(1e-9));
}

TEST_CASE("pb invariant exact matches brute force and sits in the sandwich") {
  for (unsigned seed : {1u, 2u, 3u}) {
    auto F = wavy_torus(12, 5, seed);
    const auto ex = pb_invariant(F, PbMethod::exact);
    const auto sw = pb_invariant(F, PbMethod::sandwich);
    CHECK(ex.lower == doctest::Approx(brute_pb(F)).epsilon(1e-12));
    CHECK(sw.lower <= ex.lower * (1 + 1e-12));
    CHECK(ex.upper <= sw.upper * (1 + 1e-12));
  }
  auto big = wavy_torus(8, static_cast<int>(kPbExactMaxFields) + 1, 4);
  CHECK_THROWS_AS(pb_invariant(big, PbMethod::exact), Error);
}

TEST_CASE("partition with vanishing sum cannot be normalized") {
  auto t = SurfaceChart::torus(16, 16);
  auto f = bump_disc(t, {0.5, 0.5}, 0.1, 0.2, Profile::smoothstep(5));
  PositiveCollection F(t, {f}, {0}, CollectionMode::positive);
  CHECK_THROWS_AS(F.normalized(), Error);
}
