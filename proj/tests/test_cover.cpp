#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pbsurf/cover.hpp"
#include "pbsurf/error.hpp"

using namespace pbsurf;

namespace {

constexpr double kPi = std::numbers::pi;

Cover two_caps(int n = 64) {
  auto s = SurfaceChart::sphere(n, n);
  return Cover(s, {Disc::cap(s, -0.5, true), Disc::cap(s, 0.5, false)});
}

Cover lattice_cover(const ChartPtr& c, int per_side, double radius, double jitter = 0.0,
                    unsigned seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  std::vector<Disc> discs;
  for (int a = 0; a < per_side; ++a) {
    for (int b = 0; b < per_side; ++b) {
      const ChartPoint p{(a + 0.5) / per_side + u(rng), (b + 0.5) / per_side + u(rng)};
      discs.push_back(Disc::geometric(c, p, radius * (1 + u(rng))));
    }
  }
  return Cover(c, std::move(discs));
}

NodeIndex node_at(const Cover& cv, double u, double v) {
  return cv.chart().nearest_node({u, v});
}

}  // namespace

TEST_CASE("euler characteristic oracle") {
  auto t = SurfaceChart::torus(16, 16);
  Mask square(t->size(), 0);
  for (int i = 2; i < 6; ++i)
    for (int j = 3; j < 8; ++j) square[t->index(i, j)] = 1;
  CHECK(euler_characteristic(*t, square) == 1);
  Mask ring = square;
  ring[t->index(3, 5)] = 0;
  ring[t->index(4, 5)] = 0;
  CHECK(euler_characteristic(*t, ring) == 0);
  Mask band(t->size(), 0);
  for (int i = 0; i < 16; ++i) band[t->index(i, 4)] = band[t->index(i, 5)] = 1;
  CHECK(euler_characteristic(*t, band) == 0);
  CHECK(mask_wraps(*t, band));
  CHECK(!mask_wraps(*t, square));
  CHECK(euler_characteristic(*t, Mask(t->size(), 1)) == 0);
  auto s = SurfaceChart::sphere(16, 16);
  CHECK(euler_characteristic(*s, Mask(s->size(), 1)) == 2);
  Mask cap(s->size(), 0);
  for (int i = 0; i < 16; ++i)
    for (int j = 10; j < 16; ++j) cap[s->index(i, j)] = 1;
  CHECK(euler_characteristic(*s, cap) == 1);
}

TEST_CASE("disc constructors validate the disc invariant") {
  auto t = SurfaceChart::torus(64, 64);
  auto d = Disc::geometric(t, {0.5, 0.5}, 0.2);
  CHECK(d.area() == doctest::Approx(kPi * 0.04).epsilon(0.02));
  std::vector<double> ones(d.mask().begin(), d.mask().end());
  CHECK(d.area() == doctest::Approx(integrate_values(*t, ones)).epsilon(1e-12));
  // Annulus level set is not a disc.
  std::vector<double> annulus(t->size());
  for (NodeIndex k = 0; k < t->size(); ++k) {
    const double r = t->distance({0.5, 0.5}, t->point(k));
    annulus[k] = std::abs(r - 0.25) - 0.05;
  }
  CHECK_THROWS_AS(Disc::implicit(t, annulus), Error);
  auto s = SurfaceChart::sphere(32, 32);
  CHECK_NOTHROW(Disc::cap(s, 0.3, true));
  CHECK_THROWS_AS(Disc::cap(t, 0.3, true), Error);
}

TEST_CASE("two-cap cover: members, stars, essential, confinement") {
  auto cv = two_caps();
  const NodeIndex north = cv.chart().index(0, cv.chart().n2() - 1);
  const NodeIndex south = cv.chart().index(0, 0);
  const NodeIndex equator = node_at(cv, 1.0, 0.0);
  REQUIRE(cv.members_at(north).size() == 1);
  CHECK(cv.members_at(north)[0] == 0);
  CHECK(cv.members_at(equator).size() == 2);
  CHECK(cv.star_region(equator) == Mask(cv.chart().size(), 1));
  CHECK(cv.star_region(north) == cv.disc(0).mask());
  CHECK(cv.essential_discs() == std::vector<int>{0, 1});
  for (NodeIndex x : {north, south, equator}) {
    const auto c = cv.is_confined(x);
    CHECK(!c.confined);
  }
  CHECK(cv.is_confined(equator).no_boundary);
  CHECK(cv.capacity() == doctest::Approx(3 * kPi).epsilon(1e-3));
  CHECK(cv.degree_bar() == 2);
  const std::vector<NodeIndex> poles{north, south};
  CHECK(cv.check_localized(poles));
  CHECK(cv.check_localized(std::vector<NodeIndex>{equator}));
  CHECK(!cv.check_localized(std::vector<NodeIndex>{north, equator}));
  CHECK(cv.find_localization(2).has_value());
  CHECK(!cv.find_localization(3).has_value());
  const auto gp = cv.check_general_position();
  CHECK(gp.pass());
  CHECK(gp.crossings.empty());
}

TEST_CASE("capacity oracle converges at second order") {
  double prev = 0.0;
  for (int n : {64, 128, 256}) {
    auto cv = two_caps(n);
    const double err = std::abs(cv.capacity() - 3 * kPi);
    if (prev > 0 && err > 0) CHECK(prev / err > 1.5);
    prev = err;
  }
}

TEST_CASE("redundant disc is not essential and can be removed") {
  auto s = SurfaceChart::sphere(64, 64);
  Cover cv(s, {Disc::cap(s, -0.5, true), Disc::cap(s, 0.5, false),
               Disc::geometric(s, {1.0, 0.2}, 0.2)});
  CHECK(cv.essential_discs() == std::vector<int>{0, 1});
  CHECK(cv.covers_without(2));
  CHECK(!cv.covers_without(0));
  CHECK(cv.degree_bar() == 3);
}

TEST_CASE("non-cover is rejected") {
  auto s = SurfaceChart::sphere(32, 32);
  CHECK_THROWS_AS(Cover(s, {Disc::cap(s, 0.2, true), Disc::cap(s, -0.2, false)}), Error);
}

TEST_CASE("torus small-disc cover: every star is confined") {
  auto t = SurfaceChart::torus(64, 64);
  auto cv = lattice_cover(t, 4, 0.2);
  // Mask oracle: each star is a union of at most four discs of diameter 0.4,
  // far from wrapping, so its outer ring crosses several discs.
  for (NodeIndex x = 0; x < t->size(); x += 97) {
    const auto c = cv.is_confined(x);
    CHECK(c.confined);
    CHECK(!c.no_boundary);
    CHECK(c.boundary_components == 1);
  }
  CHECK(cv.essential_discs().size() == 16);
  CHECK(cv.capacity() == doctest::Approx(kPi * 0.04).epsilon(0.03));
}

TEST_CASE("star invariants") {
  auto t = SurfaceChart::torus(64, 64);
  auto cv = lattice_cover(t, 3, 0.26, 0.02, 5);
  for (NodeIndex x = 0; x < t->size(); x += 131) {
    const Mask star = cv.star_region(x);
    CHECK(star[x]);
    double sum = 0.0;
    for (auto i : cv.members_at(x)) sum += cv.disc(i).area();
    CHECK(cv.star_area(x) <= sum + 1e-12);
  }
}

TEST_CASE("whole-torus star has no boundary") {
  // Five contractible masks through node (0,0) exhausting a 20x20 torus: a
  // big square around the origin, then the two uncovered bands each split in
  // two T-shaped pieces whose stems run back to the origin.
  const int n = 20;
  auto t = SurfaceChart::torus(n, n);
  auto mask = [&](auto&& inside) {
    Mask m(t->size(), 0);
    for (int i = -n; i < 2 * n; ++i)
      for (int j = -n; j < 2 * n; ++j)
        if (inside(i, j)) m[t->index((i + n) % n, (j + n) % n)] = 1;
    return m;
  };
  auto a = mask([](int i, int j) { return std::abs(i) <= 8 && std::abs(j) <= 8; });
  auto b = mask([](int i, int j) { return (i >= 9 && i <= 11 && j >= -6 && j <= 12) || (j == 0 && i >= 0 && i <= 10); });
  auto c = mask([](int i, int j) { return (i >= 9 && i <= 11 && j >= 8 && j <= 22) || (j == 0 && i >= 10 && i <= 20); });
  auto d = mask([](int i, int j) { return (j >= 9 && j <= 11 && i >= -6 && i <= 12) || (i == 0 && j >= 0 && j <= 10); });
  auto e = mask([](int i, int j) { return (j >= 9 && j <= 11 && i >= 8 && i <= 22) || (i == 0 && j >= 10 && j <= 20); });
  Cover cv(t, {Disc::from_mask(t, a), Disc::from_mask(t, b), Disc::from_mask(t, c),
               Disc::from_mask(t, d), Disc::from_mask(t, e)});
  REQUIRE(cv.members_at(0).size() == 5);
  const auto conf = cv.is_confined(0);
  CHECK(!conf.confined);
  CHECK(conf.no_boundary);
}

TEST_CASE("capacity and degree invariant under relabeling") {
  auto t = SurfaceChart::torus(48, 48);
  auto cv = lattice_cover(t, 3, 0.26, 0.03, 11);
  std::vector<Disc> rev(cv.discs().rbegin(), cv.discs().rend());
  Cover cr(t, rev);
  CHECK(cr.capacity() == cv.capacity());
  CHECK(cr.degree_bar() == cv.degree_bar());
  CHECK(cr.essential_discs().size() == cv.essential_discs().size());
}

TEST_CASE("pairwise-disjoint discs have degree 1") {
  auto t = SurfaceChart::torus(16, 16);
  std::vector<Disc> tiles;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      Mask m(t->size(), 0);
      for (int i = 4 * a; i < 4 * a + 4; ++i)
        for (int j = 4 * b; j < 4 * b + 4; ++j) m[t->index(i, j)] = 1;
      tiles.push_back(Disc::from_mask(t, m));
    }
  }
  Cover cv(t, tiles);
  CHECK(cv.degree_bar() == 1);
  CHECK(cv.essential_discs().size() == 16);
}

TEST_CASE("general position: identical discs fail, perturbed cover passes") {
  auto s = SurfaceChart::sphere(64, 64);
  Cover same(s, {Disc::cap(s, -0.5, true), Disc::cap(s, -0.5, true), Disc::cap(s, 0.5, false)});
  const auto bad = same.check_general_position();
  CHECK(!bad.pass());
  REQUIRE(!bad.failures.empty());
  CHECK(bad.failures.front().i == 0);
  CHECK(bad.failures.front().j == 1);
  CHECK(bad.failures.front().min_angle < 1e-2);

  auto t = SurfaceChart::torus(128, 128);
  auto cv = lattice_cover(t, 4, 0.2, 0.01, 3);
  const auto gp = cv.check_general_position();
  CHECK(gp.failures.empty());
  CHECK(!gp.crossings.empty());
  CHECK(gp.min_angle > 0.1);
  CHECK(gp.min_angle <= kPi / 2);
}

TEST_CASE("general position: nearby disjoint boundaries are not crossings") {
  auto t = SurfaceChart::torus(64, 64);
  // Boundaries 2.5 cells apart with opposite normals.
  auto with_background = [&](double r) {
    std::vector<Disc> d{Disc::geometric(t, {0.3, 0.5}, r), Disc::geometric(t, {0.7, 0.5}, r)};
    for (ChartPoint c : {ChartPoint{0.0, 0.0}, ChartPoint{0.5, 0.5}, ChartPoint{0.5, 0.0},
                         ChartPoint{0.0, 0.5}}) {
      d.push_back(Disc::geometric(t, c, 0.45));
    }
    return Cover(t, std::move(d));
  };
  const auto a = with_background(0.18).check_general_position();
  for (const auto& cr : a.crossings) CHECK_FALSE((cr.i == 0 && cr.j == 1));

  // Externally tangent discs touch at (0.5, 0.5).
  const auto b = with_background(0.2).check_general_position();
  bool flagged = false;
  for (const auto& f : b.failures) flagged |= f.i == 0 && f.j == 1;
  CHECK(flagged);
}

TEST_CASE("find_localization on a torus cover") {
  auto t = SurfaceChart::torus(64, 64);
  auto cv = lattice_cover(t, 4, 0.2);
  auto pts = cv.find_localization(4);
  REQUIRE(pts.has_value());
  CHECK(pts->size() == 4);
  CHECK(cv.check_localized(*pts));
  auto single = cv.find_localization(1);
  REQUIRE(single.has_value());
  CHECK(cv.check_localized(*single));
}

TEST_CASE("enclose_support_in_disc") {
  auto t = SurfaceChart::torus(64, 64);
  const auto d = Disc::geometric(t, {0.3, 0.3}, 0.1);
  auto enc = enclose_support_in_disc(t, d.mask());
  CHECK(enc.disc.mask() == dilate(*t, d.mask()));
  CHECK(enc.margin > 0.0);
  CHECK(enc.margin == doctest::Approx(enc.disc.area() - d.area()));

  Mask annulus(t->size(), 0);
  for (NodeIndex k = 0; k < t->size(); ++k) {
    const double r = t->distance({0.5, 0.5}, t->point(k));
    annulus[k] = r > 0.15 && r < 0.25;
  }
  CHECK(euler_characteristic(*t, annulus) == 0);
  auto filled = enclose_support_in_disc(t, annulus);
  CHECK(euler_characteristic(*t, filled.disc.mask()) == 1);
  CHECK(filled.disc.contains(t->nearest_node({0.5, 0.5})));

  Mask meridian(t->size(), 0);
  for (int j = 0; j < 64; ++j) meridian[t->index(10, j)] = meridian[t->index(11, j)] = 1;
  try {
    enclose_support_in_disc(t, meridian);
    FAIL("expected topology error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::topology);
  }

  // Sphere: a ring around a point fills to a disc; a latitude band is refused.
  auto s = SurfaceChart::sphere(64, 64);
  Mask ring(s->size(), 0);
  for (NodeIndex k = 0; k < s->size(); ++k) {
    const double r = s->distance({3.0, 0.0}, s->point(k));
    ring[k] = r > 0.2 && r < 0.3;
  }
  CHECK(euler_characteristic(*s, enclose_support_in_disc(s, ring).disc.mask()) == 1);
  Mask lat(s->size(), 0);
  for (int i = 0; i < 64; ++i) lat[s->index(i, 32)] = 1;
  CHECK_THROWS_AS(enclose_support_in_disc(s, lat), Error);
}

TEST_CASE("signed distance is negative inside and roughly Euclidean") {
  auto t = SurfaceChart::torus(128, 128);
  const auto d = Disc::geometric(t, {0.5, 0.5}, 0.2);
  auto sd = signed_distance(*t, d.mask());
  for (NodeIndex k = 0; k < t->size(); ++k) {
    CHECK((sd[k] < 0) == (d.mask()[k] != 0));
    CHECK(std::abs(sd[k] - d.level()[k]) <= 1.5 * t->h1());
  }
}
