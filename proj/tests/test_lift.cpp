#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pbsurf/error.hpp"
#include "pbsurf/examples.hpp"
#include "pbsurf/fields.hpp"
#include "pbsurf/lift.hpp"
#include "pbsurf/weierstrass.hpp"

using namespace pbsurf;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;

// Gamma(1/4)^4 / (8 pi): half-period value for the lattice Z + iZ.
const double kE1Unit = std::pow(std::tgamma(0.25), 4) / (8.0 * kPi);

std::vector<ScalarField> wavy_fields(const ChartPtr& t, int count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScalarField> out;
  for (int i = 0; i < count; ++i) {
    const double a = u(rng), b = u(rng), p = u(rng), q = u(rng);
    out.push_back(sample_field(t, [=](double x, double y) {
      return 2.0 + a * std::sin(kTwoPi * (x + p)) + b * std::cos(kTwoPi * (2 * y + q)) +
             0.3 * std::sin(kTwoPi * (x - y + p * q));
    }));
  }
  return out;
}

// max |P'(x') - P(p(x'))| for a random collection pulled back along unroll(2,1).
double unroll_pb_error(int n) {
  auto t = SurfaceChart::torus(n, n);
  // Same node counts as the target: half the source nodes fall between
  // target nodes, so the comparison goes through interpolation.
  auto p = CoveringMap::torus_unroll(t, 2, 1, n, n);
  auto fs = wavy_fields(t, 3, 9);
  PositiveCollection F(t, fs, {0, 0, 0}, CollectionMode::positive);
  std::vector<ScalarField> lifted;
  for (const auto& f : fs) lifted.push_back(pull_back_field(p, f));
  PositiveCollection G(p.source(), lifted, {0, 0, 0}, CollectionMode::positive);
  const auto base = F.pb().values();
  const auto top = G.pb().values();
  double err = 0.0;
  for (NodeIndex k = 0; k < top.size(); ++k) {
    const double want = interpolate(*t, base, p.node_images()[k]);
    err = std::max(err, std::abs(top[k] - want));
  }
  return err;
}

}  // namespace

TEST_CASE("weierstrass p: symmetry, constants and tail") {
  CHECK(weierstrass_e1(1.0) == doctest::Approx(kE1Unit).epsilon(1e-12));
  CHECK(weierstrass_e1(2.0) == doctest::Approx(kE1Unit / 4).epsilon(1e-12));
  CHECK(weierstrass_tail_bound(1.0) <= 1e-10);
  const double L = 1.0;
  CHECK(std::abs(weierstrass_p({0, 0.5 * L}, L) + kE1Unit) <= 1e-10);
  CHECK(std::abs(weierstrass_p({0.5 * L, 0.5 * L}, L)) <= 1e-10);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 100; ++i) {
    const Complex z(u(rng), u(rng));
    if (std::abs(z) < 0.05) continue;
    CHECK(std::abs(weierstrass_p(-z, L) - weierstrass_p(z, L)) <= 1e-10 * std::norm(1.0 / z));
    CHECK(std::abs(weierstrass_p(z + Complex(1, 0), L) - weierstrass_p(z, L)) <=
          1e-10 * std::norm(1.0 / z));
  }
  for (Complex h : {Complex(0.5, 0), Complex(0, 0.5), Complex(0.5, 0.5)}) {
    CHECK(std::abs(weierstrass_p_prime(h, L)) <= 1e-8);
  }
  CHECK_THROWS_AS(weierstrass_p({1e-8, 0}, L), Error);
  CHECK_THROWS_AS(weierstrass_p({1.0, 1.0 + 1e-9}, L), Error);
}

TEST_CASE("weierstrass p: duplication and differential equation") {
  const double L = 1.0;
  const double e1 = weierstrass_e1(L);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  int checked = 0;
  while (checked < 100) {
    const Complex z(u(rng), u(rng));
    const Complex pz = weierstrass_p(z, L);
    const Complex dz = weierstrass_p_prime(z, L);
    const Complex two = 2.0 * z;
    const Complex off(two.real() - std::nearbyint(two.real()), two.imag() - std::nearbyint(two.imag()));
    if (std::abs(z) < 0.05 || std::abs(off) < 0.05 || std::abs(dz) < 1e-2) continue;
    const Complex ddz = 6.0 * pz * pz - 2.0 * e1 * e1;
    const Complex rhs = 0.25 * (ddz / dz) * (ddz / dz) - 2.0 * pz;
    const Complex lhs = weierstrass_p(two, L);
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(lhs)));
    const Complex ode = dz * dz - (4.0 * pz * pz * pz - 4.0 * e1 * e1 * pz);
    CHECK(std::abs(ode) <= 1e-8 * std::max(1.0, std::norm(dz)));
    ++checked;
  }
}

TEST_CASE("weierstrass local form is finite at the lattice") {
  const double L = 1.5;
  const auto at0 = weierstrass_local({0, 0}, L);
  CHECK(std::abs(at0.reciprocal) == 0.0);
  CHECK(std::abs(at0.prime_over_square) == 0.0);
  const Complex z(0.3, 0.2);
  const auto loc = weierstrass_local(z, L);
  const Complex pz = weierstrass_p(z, L);
  CHECK(std::abs(loc.reciprocal - 1.0 / pz) <= 1e-13 * std::abs(1.0 / pz));
  CHECK(std::abs(loc.prime_over_square - weierstrass_p_prime(z, L) / (pz * pz)) <= 1e-12);
}

TEST_CASE("torus unroll: pullback oracle, deck invariance and areas") {
  auto t = SurfaceChart::torus(64, 64);
  auto p = CoveringMap::torus_unroll(t, 2, 1);
  CHECK(p.degree() == 2);
  CHECK(p.branch_points().empty());
  CHECK(p.source()->total_area() == doctest::Approx(2.0).epsilon(1e-12));
  auto f = sample_field(t, [](double x, double) { return std::sin(kTwoPi * x); });
  auto g = pull_back_field(p, f);
  CHECK(p.source()->n1() == 128);
  for (NodeIndex k = 0; k < g.size(); ++k) {
    const double x = p.source()->point(k).u;
    REQUIRE(std::abs(g[k] - std::sin(2 * kTwoPi * x)) <= 1e-12);
  }
  auto coarse = CoveringMap::torus_unroll(t, 2, 1, 64, 64);
  auto gc = pull_back_field(coarse, f);
  const double h = t->h1();
  for (NodeIndex k = 0; k < gc.size(); ++k) {
    const double x = coarse.source()->point(k).u;
    REQUIRE(std::abs(gc[k] - std::sin(2 * kTwoPi * x)) <= 0.5 * kTwoPi * kTwoPi * h * h);
  }
  // Deck translation by half the source period.
  const auto& s = *p.source();
  for (NodeIndex k = 0; k < g.size(); ++k) {
    const NodeIndex m = *s.neighbor(k, s.n1() / 2, 0);
    REQUIRE(std::abs(g[k] - g[m]) <= 1e-12);
  }
  auto c = pull_back_field(p, ScalarField::constant(t, 3.5));
  CHECK(sup_norm(c) == 3.5);
  CHECK(*std::min_element(c.values().begin(), c.values().end()) == 3.5);

  auto t2 = SurfaceChart::torus(48, 48);
  Cover U(t2, {Disc::geometric(t2, {0.2, 0.2}, 0.38), Disc::geometric(t2, {0.7, 0.3}, 0.38),
               Disc::geometric(t2, {0.4, 0.75}, 0.38), Disc::geometric(t2, {0.9, 0.8}, 0.38)});
  auto q = CoveringMap::torus_unroll(t2, 2, 2);
  auto lifted = lift_cover(q, U);
  CHECK(lifted.cover.size() == 4 * U.size());
  for (std::size_t i = 0; i < lifted.cover.size(); ++i) {
    const double base = U.disc(static_cast<std::size_t>(lifted.parent[i])).area();
    CHECK(lifted.cover.disc(i).area() == doctest::Approx(base).epsilon(0.03));
    CHECK(lifted.sheet_degree[i] == 1);
  }
}

TEST_CASE("torus unroll: P pulls back with second-order error") {
  const double e1 = unroll_pb_error(128);
  const double e2 = unroll_pb_error(256);
  CHECK(e2 <= e1);
  CHECK(std::log2(e1 / e2) >= 1.9);
}

TEST_CASE("lifted collections keep S and the bracket function") {
  TorusBumpParams prm;
  prm.n = 96;
  prm.per_side = 3;
  auto cc = torus_bump_collection(prm);
  auto p = CoveringMap::torus_unroll(cc.collection.chart_ptr(), 2, 1);
  auto lc = lift_cover(p, cc.cover);
  auto G = lift_collection(p, cc.collection, lc);
  CHECK(G.size() == 2 * cc.collection.size());
  for (const auto& it : validate(G, lc.cover).items) {
    INFO(it.name << " worst " << it.worst << " field " << it.field << " node " << it.node);
    CHECK(it.pass);
  }
  const auto s0 = cc.collection.sum().values();
  const auto s1 = G.sum().values();
  CHECK(*std::min_element(s1.begin(), s1.end()) ==
        doctest::Approx(*std::min_element(s0.begin(), s0.end())).epsilon(1e-9));
  CHECK(integrate(G.pb()) == doctest::Approx(2.0 * integrate(cc.collection.pb())).epsilon(0.02));
}

TEST_CASE("high unrolls confine every star") {
  auto t = SurfaceChart::torus(36, 36);
  std::vector<Disc> discs;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) discs.push_back(Disc::geometric(t, {0.25 + 0.5 * a, 0.25 + 0.5 * b}, 0.42));
  Cover U(t, std::move(discs));
  auto p = CoveringMap::torus_unroll(t, 3, 3, 72, 72);
  auto lc = lift_cover(p, U);
  const auto& s = *p.source();
  for (int i = 0; i < s.n1(); i += 9) {
    for (int j = 0; j < s.n2(); j += 9) {
      CHECK(lc.cover.is_confined(s.index(i, j)).confined);
    }
  }
}

TEST_CASE("sphere squaring: pullback oracle, areas and lifted caps") {
  auto S = SurfaceChart::sphere(64, 64);
  auto p = CoveringMap::sphere_square(S);
  CHECK(p.degree() == 2);
  CHECK(p.branch_points().size() == 2);
  CHECK(p.source()->total_area() == doctest::Approx(8 * kPi).epsilon(1e-6));
  auto z = sample_field(S, [](double, double v) { return v; });
  auto g = pull_back_field(p, z);
  for (NodeIndex k = 0; k < g.size(); ++k) {
    const double v = p.source()->point(k).v;
    REQUIRE(std::abs(g[k] - 2 * v / (1 + v * v)) <= 1e-12);
  }

  auto cc = two_cap_partition(64, 64);
  auto q = CoveringMap::sphere_square(cc.cover.chart_ptr());
  auto lc = lift_cover(q, cc.cover);
  REQUIRE(lc.cover.size() == 2);
  CHECK(lc.sheet_degree == std::vector<int>{2, 2});
  const double zc = std::sqrt(3.0) - 2.0;  // 2z/(1+z^2) = -1/2
  const auto& src = *q.source();
  for (NodeIndex k = 0; k < src.size(); ++k) {
    const double v = src.point(k).v;
    if (std::abs(v - zc) < 2 * src.h2()) continue;
    REQUIRE(lc.cover.disc(0).contains(k) == (v > zc));
  }
  auto G = lift_collection(q, cc.collection, lc);
  CHECK(sup_norm(G.pb()) == 0.0);
}

TEST_CASE("corrected area form near the poles") {
  auto S = SurfaceChart::sphere(64, 64);
  auto p = CoveringMap::sphere_square(S);
  const auto d = p.source()->density();
  const double raw_min = *std::min_element(d.begin(), d.end());
  // The pulled density vanishes like 1 - z^2 at the branch points.
  CHECK(raw_min <= 4 * p.source()->h2());
  const double eps = 1e-2;
  auto cc = two_cap_partition(64, 64);
  auto lc = lift_cover(p, cc.cover);
  auto G = lift_collection(p, cc.collection, lc);
  auto form = corrected_area_form(p, 0.2, eps, &G);
  CHECK(form.added_area == doctest::Approx(eps / 2).epsilon(1e-12));
  CHECK(form.floor > raw_min);
  const double area = form.chart->total_area();
  CHECK(area > 2 * 4 * kPi);
  CHECK(area < 2 * 4 * kPi + eps);

  std::vector<double> wave(p.source()->size());
  for (NodeIndex k = 0; k < wave.size(); ++k) {
    const auto x = p.source()->point(k);
    const double r = std::abs(x.v - 0.7);
    wave[k] = 1.0 + (r < 0.15 ? 0.3 * std::sin(x.u) * std::pow(1 - (r / 0.15) * (r / 0.15), 3) : 0.0);
  }
  auto lin = sample_field(p.source(), [](double, double v) { return 1.0 + 0.5 * v; });
  PositiveCollection bad(p.source(), {ScalarField(p.source(), wave), lin}, {0, 0},
                         CollectionMode::positive);
  CHECK_THROWS_AS(corrected_area_form(p, 0.2, eps, &bad), Error);

  auto t = SurfaceChart::torus(16, 16);
  auto u = CoveringMap::torus_unroll(t, 2, 2);
  auto none = corrected_area_form(u, 0.1, eps);
  CHECK(none.added_area == 0.0);
  CHECK(none.chart->same_as(*u.source()));
}

TEST_CASE("weierstrass cover: degree, branch points and local degrees") {
  auto S = SurfaceChart::sphere(96, 96);
  const double L = 1.0;
  auto p = CoveringMap::weierstrass(S, L, 96);
  CHECK(p.degree() == 2);
  REQUIRE(p.branch_points().size() == 4);
  CHECK(p.source()->total_area() == doctest::Approx(2 * 4 * kPi).epsilon(1e-3));

  const auto crit = critical_nodes(p);
  REQUIRE(crit.size() == 4);
  for (NodeIndex k : crit) {
    const ChartPoint x = p.source()->point(k);
    CHECK(std::abs(std::remainder(x.u, 0.5 * L)) <= 1e-12);
    CHECK(std::abs(std::remainder(x.v, 0.5 * L)) <= 1e-12);
    const ChartPoint y = p.map(x);
    const bool declared = std::any_of(p.branch_points().begin(), p.branch_points().end(),
                                      [&](const BranchPoint& b) { return S->distance(b.target, y) < 1e-9; });
    CHECK(declared);
    CHECK(local_degree(p, x, 0.05) == 2);
    CHECK(preimages(p, y).size() == 1);
  }
  CHECK(local_degree(p, {0.2, 0.3}, 0.02) == 1);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> th(0.0, kTwoPi);
  std::uniform_real_distribution<double> zz(-0.9, 0.9);
  int tested = 0;
  while (tested < 200) {
    const ChartPoint y{th(rng), zz(rng)};
    const bool near_branch = std::any_of(p.branch_points().begin(), p.branch_points().end(),
                                         [&](const BranchPoint& b) { return S->distance(b.target, y) < 0.1; });
    if (near_branch) continue;
    const auto pre = preimages(p, y);
    REQUIRE(pre.size() == 2);
    for (const auto& x : pre) CHECK(S->distance(p.map(x), y) <= 1e-9);
    ++tested;
  }
}

TEST_CASE("composite cover realizes sheet degrees 1, 2 and 4 only") {
  auto S = SurfaceChart::sphere(64, 64);
  auto sq = CoveringMap::sphere_square(S);
  auto w = CoveringMap::weierstrass(sq.source(), 1.0, 96);
  auto p = CoveringMap::compose(sq, w);
  CHECK(p.degree() == 4);
  CHECK(p.kind() == CoveringKind::composite);
  CHECK(p.source()->total_area() == doctest::Approx(4 * 4 * kPi).epsilon(2e-3));

  std::vector<Disc> discs{Disc::cap(S, 0.5, true), Disc::cap(S, -0.5, false)};
  for (int k = 0; k < 6; ++k) discs.push_back(Disc::geometric(S, {kTwoPi * k / 6, 0.0}, 0.9));
  Cover U(S, std::move(discs));
  auto lc = lift_cover(p, U);
  std::vector<int> per_base(U.size(), 0);
  for (std::size_t i = 0; i < lc.cover.size(); ++i) {
    const int d = lc.sheet_degree[i];
    CHECK((d == 1 || d == 2 || d == 4));
    per_base[static_cast<std::size_t>(lc.parent[i])] += d;
  }
  for (int total : per_base) CHECK(total == 4);
}
