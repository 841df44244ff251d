#include "pbsurf/examples.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pbsurf/error.hpp"

namespace pbsurf {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrapped_angle(double t) {
  t = std::fmod(t + std::numbers::pi, kTwoPi);
  if (t < 0) t += kTwoPi;
  return t - std::numbers::pi;
}
}  // namespace

CoverAndCollection two_cap_partition(int n1, int n2) {
  auto s = SurfaceChart::sphere(n1, n2);
  Cover cover(s, {Disc::cap(s, -0.5, true), Disc::cap(s, 0.5, false)});
  const Profile p = Profile::smoothstep(5);
  auto fn = sample_field(s, [&](double, double z) { return p.step((z + 0.4) / 0.8); });
  auto fs = sample_field(s, [&](double, double z) { return 1.0 - p.step((z + 0.4) / 0.8); });
  PositiveCollection F(s, {fn, fs}, {0, 1}, CollectionMode::partition);
  return {std::move(cover), std::move(F)};
}

CoverAndCollection two_cap_wavy(int n1, int n2, double amplitude) {
  auto cc = two_cap_partition(n1, n2);
  const SurfaceChart& c = cc.collection.chart();
  const auto& f = cc.collection.fields();
  std::vector<ScalarField> out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::vector<double> v(f[i].values().begin(), f[i].values().end());
    for (NodeIndex k = 0; k < c.size(); ++k) {
      v[k] *= 1.0 + amplitude * std::sin(c.point(k).u + static_cast<double>(i)) * 4.0 * f[0][k] * f[1][k];
    }
    out.emplace_back(cc.collection.chart_ptr(), std::move(v));
  }
  PositiveCollection F(cc.collection.chart_ptr(), std::move(out), cc.collection.disc_map(),
                       CollectionMode::positive);
  return {std::move(cc.cover), std::move(F)};
}

CoverAndCollection torus_bump_collection(const TorusBumpParams& prm) {
  if (prm.per_side < 2) throw Error(ErrorCode::invalid_argument, "need at least 2 discs per side");
  auto t = SurfaceChart::torus(prm.n, prm.n);
  const double h = t->h1();
  const double spacing = 1.0 / prm.per_side;
  const double r_in = spacing / std::sqrt(2.0) + 2.0 * prm.jitter + h;
  const double r_out = r_in + prm.ramp;
  std::mt19937_64 rng(prm.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::vector<Disc> discs;
  std::vector<ScalarField> fields;
  std::vector<int> disc_of;
  const Profile profile = Profile::smoothstep(5);
  for (int a = 0; a < prm.per_side; ++a) {
    for (int b = 0; b < prm.per_side; ++b) {
      const ChartPoint c{(a + 0.5) * spacing + prm.jitter * unit(rng),
                         (b + 0.5) * spacing + prm.jitter * unit(rng)};
      const double radius = r_out + h * (2.5 + 0.5 * unit(rng));
      const double amp = 1.0 + prm.amplitude_spread * unit(rng);
      discs.push_back(Disc::geometric(t, c, radius));
      auto f = bump_disc(t, c, r_in, r_out, profile);
      std::vector<double> v(f.values().begin(), f.values().end());
      for (double& x : v) x *= amp;
      fields.emplace_back(t, std::move(v));
      disc_of.push_back(static_cast<int>(discs.size()) - 1);
    }
  }
  Cover cover(t, std::move(discs));
  PositiveCollection raw(t, std::move(fields), std::move(disc_of), CollectionMode::positive);
  if (prm.mode == CollectionMode::partition) return {std::move(cover), raw.normalized()};

  const auto s = raw.sum().values();
  const double lo = *std::min_element(s.begin(), s.end());
  if (!(lo > 0)) throw Error(ErrorCode::infeasible, "bump plateaus do not cover the torus");
  std::vector<ScalarField> scaled;
  for (const auto& f : raw.fields()) {
    std::vector<double> v(f.values().begin(), f.values().end());
    for (double& x : v) x /= lo;
    scaled.emplace_back(t, std::move(v));
  }
  PositiveCollection F(t, std::move(scaled), raw.disc_map(), CollectionMode::positive);
  return {std::move(cover), std::move(F)};
}

SharpnessExample build_sharpness_example(const SharpnessParams& prm) {
  const int d = prm.d;
  if (d < 2) throw Error(ErrorCode::invalid_argument, "sharpness example needs d >= 2");
  if (!(prm.a > 0 && prm.a < prm.b && prm.b < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "profile h needs 0 < a < b < 1");
  }
  if (!(prm.t0_fraction > 0 && prm.t0_fraction < 1)) {
    throw Error(ErrorCode::invalid_argument, "w plateau must satisfy 0 < t0 < t1");
  }
  auto s = SurfaceChart::sphere(prm.n_theta, prm.n_z);
  if (prm.b > 1.0 - s->pole_band()) {
    throw Error(ErrorCode::pole_band, "h must reach 1 before the pole band");
  }
  const double t1 = kTwoPi / (3.0 * (d + 1));
  const double t0 = prm.t0_fraction * t1;
  const double m = prm.margin;
  if (!(m > 0 && m < prm.a && prm.b + 2 * m < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "disc margin must fit between the plateaus");
  }

  if (prm.b + m + 2.5 * d * s->h2() > 1.0 - s->pole_band() - s->h2()) {
    throw Error(ErrorCode::invalid_argument, "z grid too coarse to separate the box edges for this d");
  }

  const Profile& hp = prm.h_profile;
  const Profile& wp = prm.w_profile;
  auto h = [&](double u) { return hp.step((u - prm.a) / (prm.b - prm.a)); };
  auto w = [&](double t) { return wp.step((std::abs(wrapped_angle(t)) - t0) / (t1 - t0)); };

  std::vector<ScalarField> fields;
  fields.push_back(sample_field(s, [&](double, double z) { return h(z); }));
  fields.push_back(sample_field(s, [&](double, double z) { return h(-z); }));
  for (int j = 0; j <= d; ++j) {
    const double shift = kTwoPi * j / (d + 1);
    fields.push_back(sample_field(s, [&](double th, double z) {
      return (1.0 - h(z)) * (1.0 - h(-z)) * w(th + shift) / d;
    }));
  }

  std::vector<Disc> discs;
  discs.push_back(Disc::cap(s, prm.a - m, true));
  discs.push_back(Disc::cap(s, -(prm.a - m), false));
  for (int j = 0; j <= d; ++j) {
    const double shift = kTwoPi * j / (d + 1);
    const double mz = m + 2.5 * j * s->h2();
    const double mt = std::max(0.3 * t0, 2.5 * s->h1()) * (1.0 + 0.5 * j / (d + 1));
    if (t0 - mt < s->h1()) {
      throw Error(ErrorCode::invalid_argument, "theta grid too coarse to resolve the wedges for this d");
    }
    std::vector<double> level(s->size());
    for (NodeIndex k = 0; k < s->size(); ++k) {
      const ChartPoint p = s->point(k);
      level[k] = std::max(std::abs(p.v) - (prm.b + mz),
                          (t0 - mt) - std::abs(wrapped_angle(p.u + shift)));
    }
    discs.push_back(Disc::implicit(s, std::move(level)));
  }

  std::vector<int> disc_of(fields.size());
  for (std::size_t i = 0; i < disc_of.size(); ++i) disc_of[i] = static_cast<int>(i);
  Cover cover(s, std::move(discs));
  SharpnessExample ex{std::move(cover),
                      PositiveCollection(s, std::move(fields), std::move(disc_of),
                                         CollectionMode::positive),
                      0, 1, {}};
  ex.localization = {s->nearest_node({0.0, 1.0}), s->nearest_node({0.0, -1.0}),
                     s->nearest_node({0.0, 0.0})};
  ex.cover.declare_localization(ex.localization);
  return ex;
}

}  // namespace pbsurf
