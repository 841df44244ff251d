#include "pbsurf/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pbsurf/error.hpp"
#include "pbsurf/parallel.hpp"

namespace pbsurf {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double kernel(double s) {
  const double q = 1.0 - s * s;
  return q * q;
}

}  // namespace

// --- Profile ----------------------------------------------------------------

Profile Profile::smoothstep(int degree) {
  if (degree < 3 || degree % 2 == 0) {
    throw Error(ErrorCode::invalid_argument, "smoothstep degree must be odd and at least 3");
  }
  Profile p;
  p.kind_ = Kind::smoothstep;
  p.degree_ = degree;
  const int k = (degree - 1) / 2;
  // S(t) = sum_n C(k+n,n) C(2k+1,k-n) (-t)^n t^(k+1); coeffs_[n] multiplies t^(k+1+n).
  for (int n = 0; n <= k; ++n) {
    const double sign = n % 2 == 0 ? 1.0 : -1.0;
    p.coeffs_.push_back(sign * binomial(k + n, n) * binomial(2 * k + 1, k - n));
  }
  return p;
}

Profile Profile::poly_bump(int degree) {
  if (degree < 4 || degree % 2 != 0) {
    throw Error(ErrorCode::invalid_argument, "poly_bump degree must be even and at least 4");
  }
  Profile p;
  p.kind_ = Kind::poly_bump;
  p.degree_ = degree;
  return p;
}

Profile Profile::table(std::vector<double> knots, std::vector<double> values) {
  const std::size_t n = knots.size();
  if (n < 2 || values.size() != n) {
    throw Error(ErrorCode::invalid_argument, "profile table needs at least two (t, value) pairs");
  }
  if (knots.front() != 0.0 || knots.back() != 1.0 || values.front() != 0.0 ||
      values.back() != 1.0) {
    throw Error(ErrorCode::invalid_argument, "profile table must run from (0,0) to (1,1)");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(knots[i] > knots[i - 1]) || values[i] < values[i - 1]) {
      throw Error(ErrorCode::invalid_argument, "profile table must be increasing in t and monotone");
    }
  }
  Profile p;
  p.kind_ = Kind::table;
  p.degree_ = 3;
  std::vector<double> secant(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    secant[i] = (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]);
  }
  std::vector<double> m(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (secant[i - 1] > 0 && secant[i] > 0) m[i] = 0.5 * (secant[i - 1] + secant[i]);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (secant[i] == 0.0) {
      m[i] = m[i + 1] = 0.0;
      continue;
    }
    const double a = m[i] / secant[i];
    const double b = m[i + 1] / secant[i];
    const double r = a * a + b * b;
    if (r > 9.0) {
      const double tau = 3.0 / std::sqrt(r);
      m[i] = tau * a * secant[i];
      m[i + 1] = tau * b * secant[i];
    }
  }
  p.knots_ = std::move(knots);
  p.values_ = std::move(values);
  p.slopes_ = std::move(m);
  return p;
}

double Profile::step(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  switch (kind_) {
    case Kind::smoothstep: {
      const int k = (degree_ - 1) / 2;
      double acc = 0.0;
      for (int n = static_cast<int>(coeffs_.size()) - 1; n >= 0; --n) acc = acc * t + coeffs_[n];
      return acc * std::pow(t, k + 1);
    }
    case Kind::poly_bump:
      return 1.0 - std::pow(1.0 - t * t, degree_ / 2);
    case Kind::table: {
      const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
      const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
      const double hk = knots_[i + 1] - knots_[i];
      const double s = (t - knots_[i]) / hk;
      const double s2 = s * s;
      const double s3 = s2 * s;
      return (2 * s3 - 3 * s2 + 1) * values_[i] + (s3 - 2 * s2 + s) * hk * slopes_[i] +
             (-2 * s3 + 3 * s2) * values_[i + 1] + (s3 - s2) * hk * slopes_[i + 1];
    }
  }
  return 0.0;
}

double Profile::slope(double t) const {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  switch (kind_) {
    case Kind::smoothstep: {
      const int k = (degree_ - 1) / 2;
      const double c = (2 * k + 1) * binomial(2 * k, k);
      return c * std::pow(t * (1.0 - t), k);
    }
    case Kind::poly_bump: {
      const int m = degree_ / 2;
      return 2.0 * m * t * std::pow(1.0 - t * t, m - 1);
    }
    case Kind::table: {
      const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
      const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
      const double hk = knots_[i + 1] - knots_[i];
      const double s = (t - knots_[i]) / hk;
      const double s2 = s * s;
      return ((6 * s2 - 6 * s) * values_[i] + (3 * s2 - 4 * s + 1) * hk * slopes_[i] +
              (-6 * s2 + 6 * s) * values_[i + 1] + (3 * s2 - 2 * s) * hk * slopes_[i + 1]) /
             hk;
    }
  }
  return 0.0;
}

// --- constructors -----------------------------------------------------------

ScalarField sample_field(const ChartPtr& chart,
                         const std::function<double(double, double)>& fn) {
  std::vector<double> v(chart->size());
  parallel_for(v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const ChartPoint p = chart->point(k);
      v[k] = fn(p.u, p.v);
    }
  });
  return ScalarField(chart, std::move(v));
}

ScalarField bump_disc(const ChartPtr& chart, ChartPoint center, double r_inner,
                      double r_outer, const Profile& profile) {
  if (!(r_inner > 0.0 && r_inner < r_outer)) {
    throw Error(ErrorCode::invalid_argument, "bump_disc needs 0 < r_inner < r_outer");
  }
  const SurfaceChart& c = *chart;
  if (c.kind() == ChartKind::torus) {
    if (r_outer >= 0.5 * std::min(c.length1(), c.length2())) {
      throw Error(ErrorCode::invalid_argument, "bump disc does not fit in the torus");
    }
  } else {
    if (r_outer >= std::numbers::pi) {
      throw Error(ErrorCode::invalid_argument, "bump disc wider than the theta period");
    }
    if (std::abs(center.v) + r_outer > 1.0 - c.pole_band()) {
      throw Error(ErrorCode::pole_band, "bump disc reaches into the pole band");
    }
  }
  center = c.wrap(center);
  return sample_field(chart, [&](double u, double v) {
    return profile.bump(c.distance(center, {u, v}), r_inner, r_outer);
  });
}

// --- mollification ----------------------------------------------------------

namespace {

std::vector<double> kernel_weights(double width, double h) {
  const int reach = static_cast<int>(std::ceil(width / h));
  std::vector<double> w(2 * reach + 1, 0.0);
  for (int m = -reach; m <= reach; ++m) {
    const double s = m * h / width;
    if (std::abs(s) < 1.0) w[m + reach] = kernel(s);
  }
  return w;
}

}  // namespace

ScalarField mollify(const ScalarField& f, double width) {
  const SurfaceChart& c = f.chart();
  if (!(width >= 2.0 * c.h1() * (1 - 1e-12)) || !(width >= 2.0 * c.h2() * (1 - 1e-12))) {
    throw Error(ErrorCode::invalid_argument, "mollifier width must span at least two grid cells");
  }
  const auto w1 = kernel_weights(width, c.h1());
  const auto w2 = kernel_weights(width, c.h2());
  const int r1 = static_cast<int>(w1.size() / 2);
  const int r2 = static_cast<int>(w2.size() / 2);
  const int n1 = c.n1();
  const int n2 = c.n2();
  const auto in = f.values();

  double norm1 = 0.0;
  for (double x : w1) norm1 += x;

  std::vector<double> tmp(c.size());
  parallel_for(static_cast<std::size_t>(n1), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      for (int j = 0; j < n2; ++j) {
        double acc = 0.0;
        for (int m = -r1; m <= r1; ++m) {
          const double wt = w1[m + r1];
          if (wt == 0.0) continue;
          int ii = (static_cast<int>(i) + m) % n1;
          if (ii < 0) ii += n1;
          acc += wt * in[c.index(ii, j)];
        }
        tmp[c.index(static_cast<int>(i), j)] = acc / norm1;
      }
    }
  });

  std::vector<double> out(c.size());
  parallel_for(static_cast<std::size_t>(n1), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      for (int j = 0; j < n2; ++j) {
        double acc = 0.0;
        double norm = 0.0;
        for (int m = -r2; m <= r2; ++m) {
          const double wt = w2[m + r2];
          if (wt == 0.0) continue;
          int jj = j + m;
          if (c.periodic2()) {
            jj %= n2;
            if (jj < 0) jj += n2;
          } else if (jj < 0 || jj >= n2) {
            continue;
          }
          acc += wt * tmp[c.index(static_cast<int>(i), jj)];
          norm += wt;
        }
        out[c.index(static_cast<int>(i), j)] = acc / norm;
      }
    }
  });
  ScalarField result(f.chart_ptr(), std::move(out));
  check_pole_band(result);
  return result;
}

// --- flattening -------------------------------------------------------------

ScalarField flatten_on_disc(const ScalarField& f, ChartPoint center, double sigma,
                            double delta, double mollify_width, FlattenReport* report) {
  const SurfaceChart& c = f.chart();
  if (!(sigma >= 0.0 && sigma < delta)) {
    throw Error(ErrorCode::invalid_argument, "flatten_on_disc needs 0 <= sigma < delta");
  }
  if (c.kind() == ChartKind::torus) {
    if (delta >= 0.5 * std::min(c.length1(), c.length2())) {
      throw Error(ErrorCode::invalid_argument, "flattening disc does not fit in the torus");
    }
  } else if (std::abs(center.v) + delta > 1.0 - c.pole_band()) {
    throw Error(ErrorCode::pole_band, "flattening disc reaches into the pole band");
  }
  const double h = std::max(c.h1(), c.h2());
  const double w = mollify_width > 0.0 ? mollify_width : 2.0 * h;
  if (w < 2.0 * h * (1 - 1e-12)) {
    throw Error(ErrorCode::invalid_argument, "mollifier width must span at least two grid cells");
  }
  const double core = sigma + 2.0 * h;
  const double sigma_e = core + w;
  if (delta - sigma_e < 4.0 * h) {
    throw Error(ErrorCode::invalid_argument,
                "delta too small for the grid: need delta >= sigma + width + 6 cells");
  }
  const double delta1 = 0.5 * (sigma_e + delta);
  const Profile s = Profile::smoothstep(5);
  center = c.wrap(center);
  const auto in = f.values();
  const double fc = interpolate(c, in, center);

  auto radius = [&](NodeIndex k) { return c.distance(center, c.point(k)); };

  // Retracted field: the annulus [sigma_e, delta1] is stretched onto [0, delta1].
  std::vector<double> pulled(in.begin(), in.end());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    const double r = radius(k);
    if (r >= delta1) continue;
    if (r <= sigma_e) {
      pulled[k] = fc;
      continue;
    }
    const double rho = r - sigma_e * (1.0 - s.step((r - sigma_e) / (delta1 - sigma_e)));
    const ChartPoint d = c.displacement(center, c.point(k));
    const double scale = std::max(rho, 0.0) / r;
    pulled[k] = interpolate(c, in, c.wrap({center.u + scale * d.u, center.v + scale * d.v}));
  }

  // Radial mollifier restricted to the surgery disc, then blend back to f.
  const int reach1 = static_cast<int>(std::ceil(w / c.h1()));
  const int reach2 = static_cast<int>(std::ceil(w / c.h2()));
  std::vector<double> out(in.begin(), in.end());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    const double r = radius(k);
    if (r >= delta) continue;
    if (r <= core) {
      out[k] = fc;
      continue;
    }
    double acc = 0.0;
    double norm = 0.0;
    for (int a = -reach1; a <= reach1; ++a) {
      for (int b = -reach2; b <= reach2; ++b) {
        const double q = std::hypot(a * c.h1(), b * c.h2()) / w;
        if (q >= 1.0) continue;
        const auto nb = c.neighbor(k, a, b);
        if (!nb) continue;
        const double wt = kernel(q);
        acc += wt * pulled[*nb];
        norm += wt;
      }
    }
    const double smooth = acc / norm;
    const double blend = s.step((r - delta1) / (delta - delta1));
    out[k] = smooth + blend * (in[k] - smooth);
  }

  if (report) {
    double max_slope = 0.0;
    for (int i = 0; i <= 200; ++i) max_slope = std::max(max_slope, s.slope(i / 200.0));
    report->core_radius = core;
    report->mollify_width = w;
    report->max_radial_slope = 1.0 + sigma_e * max_slope / (delta1 - sigma_e);
  }
  return ScalarField(f.chart_ptr(), std::move(out));
}

double bracket_excess(const ScalarField& before, const ScalarField& after,
                      const ScalarField& g) {
  const auto b0 = poisson_bracket(before, g);
  const auto b1 = poisson_bracket(after, g);
  double m = -std::numeric_limits<double>::infinity();
  for (NodeIndex k = 0; k < b0.size(); ++k) m = std::max(m, std::abs(b1[k]) - std::abs(b0[k]));
  return m;
}

// --- components -------------------------------------------------------------

std::vector<Mask> mask_components(const SurfaceChart& c, const Mask& mask) {
  if (mask.size() != c.size()) {
    throw Error(ErrorCode::chart_mismatch, "mask size does not match chart");
  }
  std::vector<Mask> comps;
  std::vector<std::int32_t> label(c.size(), -1);
  std::vector<NodeIndex> stack;
  constexpr int kDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (NodeIndex seed = 0; seed < c.size(); ++seed) {
    if (!mask[seed] || label[seed] >= 0) continue;
    const auto id = static_cast<std::int32_t>(comps.size());
    Mask comp(c.size(), 0);
    label[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const NodeIndex k = stack.back();
      stack.pop_back();
      comp[k] = 1;
      for (const auto& d : kDirs) {
        const auto nb = c.neighbor(k, d[0], d[1]);
        if (nb && mask[*nb] && label[*nb] < 0) {
          label[*nb] = id;
          stack.push_back(*nb);
        }
      }
    }
    comps.push_back(std::move(comp));
  }
  return comps;
}

}  // namespace pbsurf
