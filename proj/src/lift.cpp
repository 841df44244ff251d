#include "pbsurf/lift.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>

#include "pbsurf/error.hpp"
#include "pbsurf/fields.hpp"
#include "pbsurf/parallel.hpp"
#include "pbsurf/weierstrass.hpp"

namespace pbsurf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool constant_density(const SurfaceChart& c) {
  const auto d = c.density();
  return std::all_of(d.begin(), d.end(), [&](double r) { return r == d[0]; });
}

double wrap_angle(double t) {
  t = std::fmod(t, kTwoPi);
  return t < 0 ? t + kTwoPi : t;
}

// Inverse stereographic projection to (theta, z).
ChartPoint sphere_point(Complex q) {
  const double r2 = std::norm(q);
  const double theta = r2 == 0.0 ? 0.0 : wrap_angle(std::arg(q));
  return {theta, (r2 - 1.0) / (r2 + 1.0)};
}

double target_gap(const SurfaceChart& t, ChartPoint a, ChartPoint b) {
  const bool pole = t.kind() == ChartKind::sphere && std::abs(a.v) >= 1.0 - 1e-12;
  return pole ? std::abs(b.v - a.v) : t.distance(a, b);
}

}  // namespace

const char* to_string(CoveringKind kind) {
  switch (kind) {
    case CoveringKind::torus_unroll: return "torus_unroll";
    case CoveringKind::sphere_square: return "sphere_square";
    case CoveringKind::weierstrass: return "weierstrass";
    case CoveringKind::composite: return "composite";
  }
  return "?";
}

double CoveringMap::pulled_density(ChartPoint x) const {
  ChartPoint y = map_(x);
  if (!target_->periodic2()) {
    // Densities are not extrapolated past the outer rows, where a linear
    // continuation could change sign.
    y.v = std::clamp(y.v, target_->v_of(0), target_->v_of(target_->n2() - 1));
  }
  return jacobian_(x) * interpolate(*target_, target_->density(), y);
}

void CoveringMap::finish(const ChartPtr& grid, bool constant) {
  const SurfaceChart& s = *grid;
  images_.resize(s.size());
  for (NodeIndex k = 0; k < s.size(); ++k) images_[k] = map_(s.point(k));

  if (constant) {
    source_ = grid;
    return;
  }
  // Two-point Gauss rule per axis over the cell around each node.
  const double g = 0.5 / std::sqrt(3.0);
  std::vector<double> density(s.size());
  parallel_for(s.size(), [&](std::size_t b, std::size_t e) {
    for (NodeIndex k = b; k < e; ++k) {
      const ChartPoint c = s.point(k);
      double acc = 0.0;
      for (double a1 : {-g, g}) {
        for (double a2 : {-g, g}) acc += pulled_density({c.u + a1 * s.h1(), c.v + a2 * s.h2()});
      }
      density[k] = 0.25 * acc;
    }
  });
  source_ = SurfaceChart::with_density(s, std::move(density));
}

CoveringMap CoveringMap::torus_unroll(const ChartPtr& target, int k1, int k2, int n1, int n2) {
  if (target->kind() != ChartKind::torus) {
    throw Error(ErrorCode::invalid_argument, "torus_unroll needs a torus target");
  }
  if (k1 < 1 || k2 < 1) throw Error(ErrorCode::invalid_argument, "unroll factors must be positive");
  const SurfaceChart& t = *target;
  CoveringMap p;
  p.kind_ = CoveringKind::torus_unroll;
  p.label_ = "torus_unroll(" + std::to_string(k1) + "," + std::to_string(k2) + ")";
  p.target_ = target;
  p.degree_ = k1 * k2;
  p.deck_ = {k1, k2};
  const double lo1 = t.ranges()[0];
  const double lo2 = t.ranges()[2];
  p.map_ = [target, k1, k2, lo1, lo2](ChartPoint x) {
    return target->wrap({lo1 + k1 * (x.u - lo1), lo2 + k2 * (x.v - lo2)});
  };
  p.jacobian_ = [d = static_cast<double>(k1) * k2](ChartPoint) { return d; };
  const bool constant = constant_density(t);
  auto grid = SurfaceChart::torus(n1 > 0 ? n1 : k1 * t.n1(), n2 > 0 ? n2 : k2 * t.n2(), t.length1(),
                                  t.length2(), p.degree_ * t.total_area());
  p.finish(grid, constant);
  return p;
}

CoveringMap CoveringMap::sphere_square(const ChartPtr& target, int n1, int n2) {
  if (target->kind() != ChartKind::sphere) {
    throw Error(ErrorCode::invalid_argument, "sphere_square needs a sphere target");
  }
  CoveringMap p;
  p.kind_ = CoveringKind::sphere_square;
  p.label_ = "sphere_square";
  p.target_ = target;
  p.degree_ = 2;
  p.map_ = [](ChartPoint x) {
    return ChartPoint{wrap_angle(2.0 * x.u), 2.0 * x.v / (1.0 + x.v * x.v)};
  };
  p.jacobian_ = [](ChartPoint x) {
    const double q = 1.0 + x.v * x.v;
    return 4.0 * (1.0 - x.v * x.v) / (q * q);
  };
  for (double z : {1.0, -1.0}) p.branch_.push_back({{0.0, z}, 2, {{0.0, z}}});
  auto grid = SurfaceChart::sphere(n1 > 0 ? n1 : target->n1(), n2 > 0 ? n2 : target->n2(),
                                   target->pole_band());
  p.finish(grid, false);
  return p;
}

CoveringMap CoveringMap::weierstrass(const ChartPtr& target, double side, int n) {
  if (target->kind() != ChartKind::sphere) {
    throw Error(ErrorCode::invalid_argument, "weierstrass cover needs a sphere target");
  }
  const double e1 = weierstrass_e1(side);
  CoveringMap p;
  p.kind_ = CoveringKind::weierstrass;
  p.label_ = "weierstrass";
  p.target_ = target;
  p.degree_ = 2;
  const Complex I(0.0, 1.0);
  // s = e1 / p stays finite at the lattice, where q = (s + i)/(s - i) = -1.
  auto q_of = [=](ChartPoint x) {
    const Complex s = e1 * weierstrass_local({x.u, x.v}, side).reciprocal;
    return (s + I) / (s - I);
  };
  p.map_ = [=](ChartPoint x) { return sphere_point(q_of(x)); };
  p.jacobian_ = [=](ChartPoint x) {
    const auto loc = weierstrass_local({x.u, x.v}, side);
    const Complex s = e1 * loc.reciprocal;
    const Complex ds = -e1 * loc.prime_over_square;
    const Complex dq = -2.0 * I / ((s - I) * (s - I)) * ds;
    const Complex q = (s + I) / (s - I);
    const double w = 1.0 + std::norm(q);
    return 4.0 * std::norm(dq) / (w * w);
  };
  const double h = 0.5 * side;
  p.branch_ = {{{kPi, 0.0}, 2, {{0.0, 0.0}}},
               {{0.5 * kPi, 0.0}, 2, {{h, 0.0}}},
               {{1.5 * kPi, 0.0}, 2, {{0.0, h}}},
               {{0.0, 0.0}, 2, {{h, h}}}};
  p.finish(SurfaceChart::torus(n, n, side, side), false);
  return p;
}

CoveringMap CoveringMap::compose(const CoveringMap& outer, const CoveringMap& inner) {
  if (!inner.target()->same_grid(*outer.source())) {
    throw Error(ErrorCode::chart_mismatch, "compose: inner target is not the outer source grid");
  }
  CoveringMap p;
  p.kind_ = CoveringKind::composite;
  p.label_ = outer.label() + " o " + inner.label();
  p.target_ = outer.target();
  p.degree_ = outer.degree() * inner.degree();
  p.map_ = [om = outer.map_, im = inner.map_](ChartPoint x) { return om(im(x)); };
  p.jacobian_ = [oj = outer.jacobian_, ij = inner.jacobian_, im = inner.map_](ChartPoint x) {
    return ij(x) * oj(im(x));
  };
  const SurfaceChart& t = *p.target_;
  auto add = [&](ChartPoint y, int deg) {
    for (auto& b : p.branch_) {
      if (target_gap(t, b.target, y) < 1e-9) {
        b.local_degree = std::max(b.local_degree, deg);
        return;
      }
    }
    p.branch_.push_back({y, deg, {}});
  };
  for (const auto& b : outer.branch_points()) add(b.target, b.local_degree);
  for (const auto& b : inner.branch_points()) add(outer.map(b.target), b.local_degree);
  p.finish(inner.source(), false);
  return p;
}

ScalarField pull_back_field(const CoveringMap& p, const ScalarField& f) {
  require_same_chart(f.chart(), *p.target(), "pull_back_field");
  const auto& img = p.node_images();
  std::vector<double> v(img.size());
  for (NodeIndex k = 0; k < v.size(); ++k) v[k] = interpolate(f.chart(), f.values(), img[k]);
  return ScalarField(p.source(), std::move(v));
}

// --- preimages --------------------------------------------------------------

std::vector<ChartPoint> preimages(const CoveringMap& p, ChartPoint y) {
  const SurfaceChart& s = *p.source();
  const SurfaceChart& t = *p.target();
  y = t.wrap(y);
  const auto& img = p.node_images();
  const double far = 0.25 * std::min(t.length1(), t.length2());

  auto residual = [&](ChartPoint x) { return t.displacement(y, p.map(x)); };
  auto polish = [&](ChartPoint x) -> std::optional<ChartPoint> {
    const double e1 = 1e-7 * s.h1();
    const double e2 = 1e-7 * s.h2();
    for (int it = 0; it < 40; ++it) {
      const ChartPoint r = residual(x);
      if (std::hypot(r.u, r.v) < 1e-13) return s.wrap(x);
      const ChartPoint a = residual({x.u + e1, x.v});
      const ChartPoint b = residual({x.u - e1, x.v});
      const ChartPoint c = residual({x.u, x.v + e2});
      const ChartPoint d = residual({x.u, x.v - e2});
      const double j11 = (a.u - b.u) / (2 * e1), j21 = (a.v - b.v) / (2 * e1);
      const double j12 = (c.u - d.u) / (2 * e2), j22 = (c.v - d.v) / (2 * e2);
      const double det = j11 * j22 - j12 * j21;
      if (det == 0.0 || !std::isfinite(det)) break;
      x.u -= (j22 * r.u - j12 * r.v) / det;
      x.v -= (-j21 * r.u + j11 * r.v) / det;
      x = s.wrap(x);
    }
    const ChartPoint r = residual(x);
    if (std::hypot(r.u, r.v) < 1e-9) return s.wrap(x);
    return std::nullopt;
  };

  std::vector<ChartPoint> found;
  const int jmax = s.periodic2() ? s.n2() : s.n2() - 1;
  for (int i = 0; i < s.n1(); ++i) {
    for (int j = 0; j < jmax; ++j) {
      const NodeIndex k00 = s.index(i, j);
      const NodeIndex k10 = *s.neighbor(k00, 1, 0);
      const NodeIndex k01 = *s.neighbor(k00, 0, 1);
      const NodeIndex k11 = *s.neighbor(k10, 0, 1);
      const std::array<NodeIndex, 4> ks{k00, k10, k11, k01};
      std::array<ChartPoint, 4> d;
      bool skip = false;
      for (int q = 0; q < 4; ++q) {
        d[q] = t.displacement(y, img[ks[q]]);
        skip = skip || std::hypot(d[q].u, d[q].v) > far;
      }
      if (skip) continue;
      const ChartPoint x0 = s.point(k00);
      const std::array<ChartPoint, 4> corner{ChartPoint{0, 0}, ChartPoint{1, 0}, ChartPoint{1, 1},
                                             ChartPoint{0, 1}};
      for (const auto& tri : {std::array<int, 3>{0, 1, 2}, std::array<int, 3>{0, 2, 3}}) {
        const ChartPoint a = d[tri[0]], b = d[tri[1]], c = d[tri[2]];
        const double det = (b.u - a.u) * (c.v - a.v) - (c.u - a.u) * (b.v - a.v);
        if (det == 0.0) continue;
        // Barycentric coordinates of the origin.
        const double l1 = ((-a.u) * (c.v - a.v) - (c.u - a.u) * (-a.v)) / det;
        const double l2 = ((b.u - a.u) * (-a.v) - (-a.u) * (b.v - a.v)) / det;
        const double l0 = 1.0 - l1 - l2;
        const double tol = -1e-9;
        if (l0 < tol || l1 < tol || l2 < tol) continue;
        const double cu = l0 * corner[tri[0]].u + l1 * corner[tri[1]].u + l2 * corner[tri[2]].u;
        const double cv = l0 * corner[tri[0]].v + l1 * corner[tri[1]].v + l2 * corner[tri[2]].v;
        const auto x = polish({x0.u + cu * s.h1(), x0.v + cv * s.h2()});
        if (!x) continue;
        const bool dup = std::any_of(found.begin(), found.end(),
                                     [&](const ChartPoint& f) { return s.distance(f, *x) < 1e-6; });
        if (!dup) found.push_back(*x);
      }
    }
  }
  return found;
}

std::vector<NodeIndex> critical_nodes(const CoveringMap& p, double rel_threshold) {
  const SurfaceChart& s = *p.source();
  std::vector<double> dens(s.size());
  for (NodeIndex k = 0; k < s.size(); ++k) dens[k] = p.pulled_density(s.point(k));
  const double mean = pairwise_sum(dens) / static_cast<double>(dens.size());
  std::vector<NodeIndex> out;
  for (NodeIndex k = 0; k < s.size(); ++k) {
    if (!(dens[k] < rel_threshold * mean)) continue;
    bool strict = true;
    for (int di = -1; di <= 1 && strict; ++di) {
      for (int dj = -1; dj <= 1 && strict; ++dj) {
        if (di == 0 && dj == 0) continue;
        if (const auto nb = s.neighbor(k, di, dj)) strict = dens[k] < dens[*nb];
      }
    }
    if (strict) out.push_back(k);
  }
  return out;
}

int local_degree(const CoveringMap& p, ChartPoint x, double radius) {
  const SurfaceChart& s = *p.source();
  const SurfaceChart& t = *p.target();
  const ChartPoint y = p.map(x);
  constexpr int kSamples = 256;
  double total = 0.0;
  double prev = 0.0;
  for (int m = 0; m <= kSamples; ++m) {
    const double a = kTwoPi * m / kSamples;
    const ChartPoint z = s.wrap({x.u + radius * std::cos(a), x.v + radius * std::sin(a)});
    const ChartPoint d = t.displacement(y, p.map(z));
    const double ang = std::atan2(d.v, d.u);
    if (m > 0) {
      double step = ang - prev;
      if (step > kPi) step -= kTwoPi;
      if (step < -kPi) step += kTwoPi;
      total += step;
    }
    prev = ang;
  }
  return static_cast<int>(std::lround(std::abs(total) / kTwoPi));
}

// --- lifting ----------------------------------------------------------------

LiftedCover lift_cover(const CoveringMap& p, const Cover& U) {
  const SurfaceChart& t = U.chart();
  if (!t.same_grid(*p.target())) {
    throw Error(ErrorCode::chart_mismatch, "lift_cover: cover is not on the map's target");
  }
  const SurfaceChart& s = *p.source();
  const auto& img = p.node_images();
  std::vector<Disc> discs;
  std::vector<int> parent;
  std::vector<int> sheet;
  for (std::size_t i = 0; i < U.size(); ++i) {
    const Disc& base = U.disc(i);
    Mask pre(s.size());
    for (NodeIndex k = 0; k < s.size(); ++k) pre[k] = interpolate(t, base.level(), img[k]) < 0.0;
    for (auto& comp : mask_components(s, pre)) {
      try {
        discs.push_back(Disc::from_mask(p.source(), std::move(comp)));
      } catch (const Error& e) {
        throw Error(ErrorCode::topology, "lifted component of disc " + std::to_string(i) +
                                             " is not a disc: " + e.what());
      }
      parent.push_back(static_cast<int>(i));
      sheet.push_back(std::max(1, static_cast<int>(std::lround(discs.back().area() / base.area()))));
    }
  }
  return {Cover(p.source(), std::move(discs)), std::move(parent), std::move(sheet)};
}

PositiveCollection lift_collection(const CoveringMap& p, const PositiveCollection& F,
                                   const LiftedCover& lifted) {
  require_same_chart(F.chart(), *p.target(), "lift_collection");
  const SurfaceChart& s = *p.source();
  std::vector<ScalarField> out;
  std::vector<int> disc_of;
  for (std::size_t i = 0; i < F.size(); ++i) {
    const ScalarField g = pull_back_field(p, F.field(i));
    const auto v = g.values();
    const int base = F.disc_of(i);
    if (base < 0) {
      out.push_back(g);
      disc_of.push_back(-1);
      continue;
    }
    Mask nz(s.size());
    for (NodeIndex k = 0; k < s.size(); ++k) nz[k] = v[k] != 0.0;
    std::vector<int> owners;
    std::vector<std::vector<double>> parts;
    for (const auto& comp : mask_components(s, nz)) {
      int owner = -1;
      for (std::size_t L = 0; L < lifted.parent.size() && owner < 0; ++L) {
        if (lifted.parent[L] != base) continue;
        const Mask& m = lifted.cover.disc(L).mask();
        bool inside = true;
        for (NodeIndex k = 0; k < s.size() && inside; ++k) inside = !comp[k] || m[k];
        if (inside) owner = static_cast<int>(L);
      }
      if (owner < 0) {
        throw Error(ErrorCode::precondition,
                    "lifted support of field " + std::to_string(i) + " leaves every sheet of its disc");
      }
      auto it = std::find(owners.begin(), owners.end(), owner);
      if (it == owners.end()) {
        owners.push_back(owner);
        parts.emplace_back(s.size(), 0.0);
        it = owners.end() - 1;
      }
      auto& part = parts[static_cast<std::size_t>(it - owners.begin())];
      for (NodeIndex k = 0; k < s.size(); ++k) {
        if (comp[k]) part[k] = v[k];
      }
    }
    for (std::size_t q = 0; q < owners.size(); ++q) {
      out.emplace_back(p.source(), std::move(parts[q]));
      disc_of.push_back(owners[q]);
    }
  }
  return PositiveCollection(p.source(), std::move(out), std::move(disc_of), F.mode());
}

// --- corrected area form ----------------------------------------------------

CorrectedForm corrected_area_form(const CoveringMap& p, double branch_radius, double epsilon,
                                  const PositiveCollection* F) {
  if (!(branch_radius > 0) || !(epsilon > 0)) {
    throw Error(ErrorCode::invalid_argument, "branch radius and epsilon must be positive");
  }
  const SurfaceChart& s = *p.source();
  const SurfaceChart& t = *p.target();
  const auto& img = p.node_images();
  const Profile prof = Profile::smoothstep(5);
  std::vector<double> psi(s.size(), 0.0);
  for (NodeIndex k = 0; k < s.size(); ++k) {
    for (const auto& b : p.branch_points()) {
      const double d = target_gap(t, b.target, img[k]);
      const double r = 0.5 * branch_radius;
      psi[k] = std::max(psi[k], 1.0 - prof.step((d - r) / r));
    }
  }
  const double mass = pairwise_sum(psi) * s.cell_area();
  CorrectedForm out;
  if (p.branch_points().empty()) {
    out.chart = p.source();
    out.bump_region.assign(s.size(), 0);
    const auto d = s.density();
    out.floor = *std::min_element(d.begin(), d.end());
    return out;
  }
  if (!(mass > 0)) {
    throw Error(ErrorCode::invalid_argument, "branch radius is smaller than the grid resolves");
  }
  out.bump_region.resize(s.size());
  for (NodeIndex k = 0; k < s.size(); ++k) out.bump_region[k] = psi[k] > 0.0;

  if (F != nullptr) {
    require_same_chart(F->chart(), s, "corrected_area_form");
    const auto pb = F->pb().values();
    const double scale = 1.0 + sup_norm(F->pb());
    for (NodeIndex k = 0; k < s.size(); ++k) {
      if (out.bump_region[k] && pb[k] > 1e-12 * scale) {
        throw Error(ErrorCode::precondition,
                    "collection has nonzero brackets inside a branch disc");
      }
    }
  }

  const double c = 0.5 * epsilon / mass;
  std::vector<double> dens(s.density().begin(), s.density().end());
  for (NodeIndex k = 0; k < s.size(); ++k) dens[k] += c * psi[k];
  out.added_area = pairwise_sum(psi) * c * s.cell_area();
  out.floor = *std::min_element(dens.begin(), dens.end());
  out.chart = SurfaceChart::with_density(s, std::move(dens));
  return out;
}

PositiveCollection rebind(const PositiveCollection& F, const ChartPtr& chart) {
  if (!chart->same_grid(F.chart())) throw Error(ErrorCode::chart_mismatch, "rebind: grids differ");
  std::vector<ScalarField> fields;
  for (const auto& f : F.fields()) {
    fields.emplace_back(chart, std::vector<double>(f.values().begin(), f.values().end()));
  }
  return PositiveCollection(chart, std::move(fields), F.disc_map(), F.mode());
}

Cover rebind(const Cover& U, const ChartPtr& chart) {
  if (!chart->same_grid(U.chart())) throw Error(ErrorCode::chart_mismatch, "rebind: grids differ");
  std::vector<Disc> discs;
  for (const auto& d : U.discs()) discs.push_back(d.on_chart(chart));
  Cover out(chart, std::move(discs));
  if (!U.declared_localization().empty()) out.declare_localization(U.declared_localization());
  return out;
}

}  // namespace pbsurf
