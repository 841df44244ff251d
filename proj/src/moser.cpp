#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "pbsurf/error.hpp"
#include "pbsurf/fields.hpp"
#include "pbsurf/optimize.hpp"
#include "pbsurf/parallel.hpp"

namespace pbsurf {

// Velocity field of the Moser path omega_t = omega + t (omega_0 - omega):
// X_t = -grad u / rho_t with Laplacian u = rho_0 - rho. Space is bilinear
// between nodes, time is linear in rho_t.
class MoserFlow {
 public:
  static constexpr int kSteps = 64;

  MoserFlow(ChartPtr chart, std::vector<double> ux, std::vector<double> uy, std::vector<double> rho0)
      : chart_(std::move(chart)) {
    const SurfaceChart& c = *chart_;
    packed_.resize(c.size());
    for (NodeIndex k = 0; k < c.size(); ++k) packed_[k] = {ux[k], uy[k], c.density(k), rho0[k]};
    rho0_ = std::move(rho0);
  }

  // Bilinear in space on the periodic grid, with all four node fields
  // sharing one set of weights.
  ChartPoint velocity(ChartPoint p, double t) const {
    const SurfaceChart& c = *chart_;
    const double s1 = (p.u - c.ranges()[0]) / c.h1();
    const double s2 = (p.v - c.ranges()[2]) / c.h2();
    const double f1 = std::floor(s1);
    const double f2 = std::floor(s2);
    const double a = s1 - f1;
    const double b = s2 - f2;
    const int n1 = c.n1();
    const int n2 = c.n2();
    const int i0 = ((static_cast<long>(f1) % n1) + n1) % n1;
    const int j0 = ((static_cast<long>(f2) % n2) + n2) % n2;
    const int i1 = i0 + 1 == n1 ? 0 : i0 + 1;
    const int j1 = j0 + 1 == n2 ? 0 : j0 + 1;
    const auto& q00 = packed_[c.index(i0, j0)];
    const auto& q10 = packed_[c.index(i1, j0)];
    const auto& q01 = packed_[c.index(i0, j1)];
    const auto& q11 = packed_[c.index(i1, j1)];
    std::array<double, 4> v;
    for (int m = 0; m < 4; ++m) {
      v[m] = (1 - a) * (1 - b) * q00[m] + a * (1 - b) * q10[m] + (1 - a) * b * q01[m] + a * b * q11[m];
    }
    const double rho = v[2] + t * (v[3] - v[2]);
    return {-v[0] / rho, -v[1] / rho};
  }

  // Classical RK4 from t0 to t1 in kSteps equal steps.
  ChartPoint integrate(ChartPoint p, double t0, double t1) const {
    const double dt = (t1 - t0) / kSteps;
    for (int s = 0; s < kSteps; ++s) {
      const double t = t0 + s * dt;
      const ChartPoint k1 = velocity(p, t);
      const ChartPoint k2 = velocity({p.u + 0.5 * dt * k1.u, p.v + 0.5 * dt * k1.v}, t + 0.5 * dt);
      const ChartPoint k3 = velocity({p.u + 0.5 * dt * k2.u, p.v + 0.5 * dt * k2.v}, t + 0.5 * dt);
      const ChartPoint k4 = velocity({p.u + dt * k3.u, p.v + dt * k3.v}, t + dt);
      p.u += dt / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
      p.v += dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    }
    return p;
  }

  const std::vector<double>& rho0() const { return rho0_; }

 private:
  ChartPtr chart_;
  std::vector<std::array<double, 4>> packed_;  // u_x, u_y, rho, rho_0
  std::vector<double> rho0_;
};

namespace {

// Gradient of the periodic solution of Laplacian u = f (f with zero mean),
// differentiated spectrally. Nyquist modes are dropped.
std::pair<std::vector<double>, std::vector<double>> poisson_gradient(const SurfaceChart& c,
                                                                     const std::vector<double>& f) {
  const int n1 = c.n1();
  const int n2 = c.n2();
  const int h2 = n2 / 2 + 1;
  const std::size_t nc = static_cast<std::size_t>(n1) * h2;
  double* in = fftw_alloc_real(c.size());
  fftw_complex* spec = fftw_alloc_complex(nc);
  fftw_complex* work = fftw_alloc_complex(nc);
  double* out = fftw_alloc_real(c.size());
  fftw_plan fwd = fftw_plan_dft_r2c_2d(n1, n2, in, spec, FFTW_ESTIMATE);
  fftw_plan back = fftw_plan_dft_c2r_2d(n1, n2, work, out, FFTW_ESTIMATE);

  std::copy(f.begin(), f.end(), in);
  fftw_execute(fwd);

  const double two_pi = 2.0 * std::numbers::pi;
  const double norm = 1.0 / static_cast<double>(c.size());
  auto wave1 = [&](int a) { return two_pi * (a <= n1 / 2 ? a : a - n1) / c.length1(); };
  auto wave2 = [&](int b) { return two_pi * b / c.length2(); };

  std::vector<double> grads[2];
  for (int axis = 0; axis < 2; ++axis) {
    for (int a = 0; a < n1; ++a) {
      for (int b = 0; b < h2; ++b) {
        const std::size_t q = static_cast<std::size_t>(a) * h2 + b;
        const double k1 = wave1(a);
        const double k2 = wave2(b);
        const double kk = k1 * k1 + k2 * k2;
        const bool nyquist = (axis == 0 && n1 % 2 == 0 && a == n1 / 2) ||
                             (axis == 1 && n2 % 2 == 0 && b == n2 / 2);
        if (kk == 0.0 || nyquist) {
          work[q][0] = work[q][1] = 0.0;
          continue;
        }
        // u_hat = -f_hat / |k|^2; derivative multiplies by i k.
        const std::complex<double> fh(spec[q][0], spec[q][1]);
        const std::complex<double> d =
            std::complex<double>(0.0, axis == 0 ? k1 : k2) * (-fh / kk) * norm;
        work[q][0] = d.real();
        work[q][1] = d.imag();
      }
    }
    fftw_execute(back);
    grads[axis].assign(out, out + c.size());
  }

  fftw_destroy_plan(fwd);
  fftw_destroy_plan(back);
  fftw_free(in);
  fftw_free(spec);
  fftw_free(work);
  fftw_free(out);
  return {std::move(grads[0]), std::move(grads[1])};
}

// The backward RK4 solve is not an exact inverse of the forward one. Newton
// steps on forward(z) = x, with difference Jacobians, remove the mismatch.
// Early steps may overshoot where the flow bends sharply, so the best iterate
// seen is kept.
ChartPoint refine_inverse(const MoserFlow& flow, ChartPoint x, ChartPoint z) {
  constexpr double h = 1e-7;
  ChartPoint fz = flow.integrate(z, 0.0, 1.0);
  ChartPoint best = z;
  double best_err = std::hypot(fz.u - x.u, fz.v - x.v);
  for (int it = 0; it < 10 && best_err > 1e-12; ++it) {
    const ChartPoint fu = flow.integrate({z.u + h, z.v}, 0.0, 1.0);
    const ChartPoint fv = flow.integrate({z.u, z.v + h}, 0.0, 1.0);
    const double a = (fu.u - fz.u) / h, b = (fv.u - fz.u) / h;
    const double c = (fu.v - fz.v) / h, d = (fv.v - fz.v) / h;
    const double det = a * d - b * c;
    if (!(std::abs(det) > 0)) break;
    const double ru = fz.u - x.u, rv = fz.v - x.v;
    z = {z.u - (d * ru - b * rv) / det, z.v - (a * rv - c * ru) / det};
    fz = flow.integrate(z, 0.0, 1.0);
    const double err = std::hypot(fz.u - x.u, fz.v - x.v);
    if (err < best_err) {
      best = z;
      best_err = err;
    }
  }
  return best;
}

}  // namespace

DiffeoGrid DiffeoGrid::identity(const ChartPtr& chart) {
  DiffeoGrid d;
  d.chart_ = chart;
  d.fwd_.assign(chart->size(), ChartPoint{0.0, 0.0});
  d.inv_.assign(chart->size(), ChartPoint{0.0, 0.0});
  d.history_ = "identity";
  return d;
}

ChartPoint DiffeoGrid::forward(ChartPoint x) const {
  if (flow_) return flow_->integrate(x, 0.0, 1.0);
  return x;
}

ChartPoint DiffeoGrid::inverse(ChartPoint x) const {
  if (flow_) return flow_->integrate(x, 1.0, 0.0);
  return x;
}

ChartPoint DiffeoGrid::forward_node(NodeIndex k) const {
  const ChartPoint p = chart_->point(k);
  return {p.u + fwd_[k].u, p.v + fwd_[k].v};
}

ChartPoint DiffeoGrid::inverse_node(NodeIndex k) const {
  const ChartPoint p = chart_->point(k);
  return {p.u + inv_[k].u, p.v + inv_[k].v};
}

double DiffeoGrid::inverse_consistency() const {
  const SurfaceChart& c = *chart_;
  std::vector<double> err(c.size());
  parallel_for(c.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const ChartPoint y = forward(inverse_node(k));
      const ChartPoint x = c.point(k);
      err[k] = std::hypot(y.u - x.u, y.v - x.v);
    }
  });
  return *std::max_element(err.begin(), err.end());
}

std::vector<double> DiffeoGrid::jacobian() const {
  const SurfaceChart& c = *chart_;
  std::vector<double> du(c.size());
  std::vector<double> dv(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    du[k] = fwd_[k].u;
    dv[k] = fwd_[k].v;
  }
  const auto du1 = derivative1(c, du);
  const auto du2 = derivative2(c, du);
  const auto dv1 = derivative1(c, dv);
  const auto dv2 = derivative2(c, dv);
  std::vector<double> jac(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    jac[k] = (1.0 + du1[k]) * (1.0 + dv2[k]) - du2[k] * dv1[k];
  }
  return jac;
}

double DiffeoGrid::max_displacement() const {
  double m = 0.0;
  for (const auto& d : fwd_) m = std::max(m, std::hypot(d.u, d.v));
  for (const auto& d : inv_) m = std::max(m, std::hypot(d.u, d.v));
  return m;
}

DiffeoGrid moser_rescale(const ChartPtr& chart, const ScalarField& P) {
  const SurfaceChart& c = *chart;
  if (c.kind() != ChartKind::torus) {
    throw Error(ErrorCode::invalid_argument, "moser_rescale needs a torus chart");
  }
  require_same_chart(c, P.chart(), "moser_rescale");
  const auto pv = P.values();
  if (!(*std::min_element(pv.begin(), pv.end()) > 0.0)) {
    throw Error(ErrorCode::precondition, "moser_rescale needs P > 0 everywhere");
  }
  const double scale = c.total_area() / integrate(P);
  std::vector<double> rho0(c.size());
  std::vector<double> rhs(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    rho0[k] = scale * pv[k] * c.density(k);
    rhs[k] = rho0[k] - c.density(k);
  }
  // The grid sum of rhs is zero up to rounding; remove the residue.
  const double mean = pairwise_sum(rhs) / static_cast<double>(c.size());
  for (double& r : rhs) r -= mean;

  auto [ux, uy] = poisson_gradient(c, rhs);
  auto flow = std::make_shared<const MoserFlow>(chart, std::move(ux), std::move(uy), std::move(rho0));

  DiffeoGrid d;
  d.chart_ = chart;
  d.flow_ = flow;
  d.history_ = "moser_rescale";
  d.fwd_.resize(c.size());
  d.inv_.resize(c.size());
  parallel_for(c.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const ChartPoint x = c.point(k);
      const ChartPoint y = flow->integrate(x, 0.0, 1.0);
      const ChartPoint z = refine_inverse(*flow, x, flow->integrate(x, 1.0, 0.0));
      d.fwd_[k] = {y.u - x.u, y.v - x.v};
      d.inv_[k] = {z.u - x.u, z.v - x.v};
    }
  });
  return d;
}

double pullback_residual(const DiffeoGrid& phi, const ScalarField& P) {
  const SurfaceChart& c = *phi.chart_ptr();
  require_same_chart(c, P.chart(), "pullback_residual");
  const double scale = c.total_area() / integrate(P);
  std::vector<double> rho0(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) rho0[k] = scale * P[k] * c.density(k);
  const auto jac = phi.jacobian();
  double worst = 0.0;
  double top = 0.0;
  for (NodeIndex k = 0; k < c.size(); ++k) {
    const double pulled = jac[k] * interpolate(c, rho0, phi.forward_node(k));
    worst = std::max(worst, std::abs(pulled - c.density(k)));
    top = std::max(top, c.density(k));
  }
  return worst / top;
}

Cover apply_diffeo(const Cover& U, const DiffeoGrid& phi) {
  const SurfaceChart& c = U.chart();
  if (!c.same_grid(*phi.chart_ptr())) {
    throw Error(ErrorCode::chart_mismatch, "apply_diffeo: cover and diffeomorphism live on different grids");
  }
  std::vector<Disc> discs;
  for (const auto& d : U.discs()) {
    std::vector<double> level(c.size());
    for (NodeIndex k = 0; k < c.size(); ++k) level[k] = interpolate(c, d.level(), phi.forward_node(k));
    discs.push_back(Disc::implicit(U.chart_ptr(), std::move(level)));
  }
  Cover out(U.chart_ptr(), std::move(discs));
  std::vector<NodeIndex> loc;
  for (NodeIndex x : U.declared_localization()) loc.push_back(c.nearest_node(phi.inverse(c.point(x))));
  if (!loc.empty() && out.check_localized(loc)) out.declare_localization(std::move(loc));
  return out;
}

PositiveCollection apply_diffeo(const PositiveCollection& F, const DiffeoGrid& phi) {
  const SurfaceChart& c = F.chart();
  if (!c.same_grid(*phi.chart_ptr())) {
    throw Error(ErrorCode::chart_mismatch,
                "apply_diffeo: collection and diffeomorphism live on different grids");
  }
  std::vector<ScalarField> fields;
  for (const auto& f : F.fields()) {
    std::vector<double> v(c.size());
    for (NodeIndex k = 0; k < c.size(); ++k) v[k] = interpolate(c, f.values(), phi.forward_node(k));
    fields.emplace_back(F.chart_ptr(), std::move(v));
  }
  return PositiveCollection(F.chart_ptr(), std::move(fields), F.disc_map(), F.mode());
}

Transported transport(const Cover& U, const PositiveCollection& F, const DiffeoGrid& phi) {
  Cover cover = apply_diffeo(U, phi);
  PositiveCollection coll = apply_diffeo(F, phi);
  ValidationReport rep = validate(coll, cover);
  return {std::move(cover), std::move(coll), std::move(rep)};
}

ScalarField smooth_majorant(const ScalarField& f, double width, double delta) {
  const SurfaceChart& c = f.chart();
  if (!(width > 0) || !(delta >= 0)) {
    throw Error(ErrorCode::invalid_argument, "smooth_majorant needs width > 0 and delta >= 0");
  }
  const int r1 = static_cast<int>(std::ceil(width / c.h1()));
  const int r2 = static_cast<int>(std::ceil(width / c.h2()));
  const auto v = f.values();
  std::vector<double> a(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    double m = v[k];
    for (int di = -r1; di <= r1; ++di) {
      if (auto nb = c.neighbor(k, di, 0)) m = std::max(m, v[*nb]);
    }
    a[k] = m;
  }
  std::vector<double> b(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    double m = a[k];
    for (int dj = -r2; dj <= r2; ++dj) {
      if (auto nb = c.neighbor(k, 0, dj)) m = std::max(m, a[*nb]);
    }
    b[k] = m;
  }
  const ScalarField smooth = mollify(ScalarField(f.chart_ptr(), std::move(b)), width);
  std::vector<double> out(smooth.values().begin(), smooth.values().end());
  for (double& x : out) x += delta;
  return ScalarField(f.chart_ptr(), std::move(out));
}

}  // namespace pbsurf
