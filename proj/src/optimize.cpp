#include "pbsurf/optimize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

#include "pbsurf/error.hpp"

namespace pbsurf {

const char* to_string(Objective o) {
  return o == Objective::l1_pb ? "l1_pb" : "smoothed_linf";
}

const char* to_string(Projection p) {
  return p == Projection::partition ? "partition" : "positive";
}

namespace {

using Fields = std::vector<std::vector<double>>;

// Nodes each field may change: its disc eroded by one 4-ring, minus the
// sphere's pole band.
struct Domains {
  std::vector<Mask> allowed;  // eroded disc
  std::vector<Mask> free;     // allowed and outside the pole band
};

Domains make_domains(const Cover& U, const PositiveCollection& F) {
  const SurfaceChart& c = F.chart();
  Domains d;
  for (std::size_t i = 0; i < F.size(); ++i) {
    const int disc = F.disc_of(i);
    if (disc < 0 || static_cast<std::size_t>(disc) >= U.size()) {
      throw Error(ErrorCode::infeasible, "field " + std::to_string(i) + " has no disc to optimize in");
    }
    const Mask& m = U.disc(static_cast<std::size_t>(disc)).mask();
    Mask allowed(c.size(), 0);
    Mask free(c.size(), 0);
    for (NodeIndex k = 0; k < c.size(); ++k) {
      if (!m[k]) continue;
      bool inner = true;
      for (auto [di, dj] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
        const auto nb = c.neighbor(k, di, dj);
        if (nb && !m[*nb]) inner = false;
      }
      allowed[k] = inner;
      free[k] = inner && !c.in_pole_band(c.j_of(k));
    }
    d.allowed.push_back(std::move(allowed));
    d.free.push_back(std::move(free));
  }
  return d;
}

Fields values_of(const PositiveCollection& F) {
  Fields out;
  for (const auto& f : F.fields()) out.emplace_back(f.values().begin(), f.values().end());
  return out;
}

PositiveCollection make_collection(const PositiveCollection& like, Fields values, Projection mode) {
  std::vector<ScalarField> fs;
  for (auto& v : values) fs.emplace_back(like.chart_ptr(), std::move(v));
  return PositiveCollection(like.chart_ptr(), std::move(fs), like.disc_map(),
                            mode == Projection::partition ? CollectionMode::partition
                                                          : CollectionMode::positive);
}

void project_values(const Domains& d, Fields& v, Projection mode) {
  const std::size_t n = v.empty() ? 0 : v.front().size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (NodeIndex k = 0; k < n; ++k) {
      if (!d.allowed[i][k]) v[i][k] = 0.0;
      else if (v[i][k] < 0.0) v[i][k] = 0.0;
    }
  }
  for (NodeIndex k = 0; k < n; ++k) {
    double s = 0.0;
    for (const auto& f : v) s += f[k];
    if (!(s > 0.0)) {
      throw Error(ErrorCode::infeasible, "every field vanishes at node " + std::to_string(k));
    }
    const double div = mode == Projection::partition ? s : std::min(s, 1.0);
    if (div != 1.0) {
      for (auto& f : v) f[k] /= div;
    }
  }
}

// Sobolev gradient: solves (I - l^2 Lap) s = g on each field's free nodes by
// linear conjugate gradients, with the 5-point Laplacian in index space and
// no flux across the domain edge. A truncated CG solve started from zero
// still has s . g > 0, so s is a descent direction.
void sobolev_gradient(const SurfaceChart& c, const Domains& d, Fields& g, double length) {
  if (length <= 0.0) return;
  const double l2 = length * length;
  const std::size_t n = c.size();
  constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::array<std::uint32_t, 4>> nbr(n);
  for (NodeIndex k = 0; k < n; ++k) {
    int q = 0;
    for (auto [di, dj] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
      const auto nb = c.neighbor(k, di, dj);
      nbr[k][q++] = nb ? static_cast<std::uint32_t>(*nb) : none;
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Mask& free = d.free[i];
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
      for (NodeIndex k = 0; k < n; ++k) {
        if (!free[k]) {
          y[k] = 0.0;
          continue;
        }
        double lap = 0.0;
        for (std::uint32_t nb : nbr[k]) {
          if (nb != none && free[nb]) lap += x[nb] - x[k];
        }
        y[k] = x[k] - l2 * lap;
      }
    };
    auto inner = [&](const std::vector<double>& a, const std::vector<double>& b) {
      std::vector<double> t(n);
      for (NodeIndex k = 0; k < n; ++k) t[k] = a[k] * b[k];
      return pairwise_sum(t);
    };
    const std::vector<double>& rhs = g[i];
    std::vector<double> x(n, 0.0), r = rhs, p = rhs, ap(n);
    double rr = inner(r, r);
    const double stop = 1e-10 * rr;
    for (int it = 0; it < 30 && rr > stop; ++it) {
      apply(p, ap);
      const double alpha = rr / inner(p, ap);
      for (NodeIndex k = 0; k < n; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * ap[k];
      }
      const double next = inner(r, r);
      for (NodeIndex k = 0; k < n; ++k) p[k] = r[k] + (next / rr) * p[k];
      rr = next;
    }
    g[i] = std::move(x);
  }
}

double softabs(double t, double eps) { return std::sqrt(t * t + eps * eps) - eps; }
double softabs_slope(double t, double eps) { return t / std::sqrt(t * t + eps * eps); }

double objective_values(const SurfaceChart& c, const Fields& v, const OptimizerParams& prm, double eps,
                        Fields* grad) {
  const std::size_t n = v.size();
  const std::size_t m = c.size();
  Fields d1(n);
  Fields d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d1[i] = derivative1(c, v[i]);
    d2[i] = derivative2(c, v[i]);
  }
  // Brackets of each unordered pair, then the smoothed P at each node.
  Fields br(n * n);
  std::vector<double> ps(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      auto& b = br[i * n + j];
      b.resize(m);
      for (NodeIndex k = 0; k < m; ++k) {
        b[k] = (d1[i][k] * d2[j][k] - d2[i][k] * d1[j][k]) / c.density(k);
        ps[k] += 2.0 * softabs(b[k], eps);
      }
    }
  }

  // lambda_k = dJ / dP_k.
  std::vector<double> lambda(m);
  double value = 0.0;
  if (prm.objective == Objective::l1_pb) {
    std::vector<double> w(m);
    for (NodeIndex k = 0; k < m; ++k) {
      w[k] = ps[k] * c.density(k);
      lambda[k] = c.density(k) * c.cell_area();
    }
    value = pairwise_sum(w) * c.cell_area();
  } else {
    const double beta = prm.linf_beta;
    const double top = *std::max_element(ps.begin(), ps.end());
    std::vector<double> w(m);
    std::vector<double> mass(m);
    for (NodeIndex k = 0; k < m; ++k) {
      mass[k] = c.density(k);
      w[k] = c.density(k) * std::exp(beta * (ps[k] - top));
    }
    const double z = pairwise_sum(w);
    value = top + std::log(z / pairwise_sum(mass)) / beta;
    for (NodeIndex k = 0; k < m; ++k) lambda[k] = w[k] / z;
  }
  if (!grad) return value;

  grad->assign(n, std::vector<double>(m, 0.0));
  std::vector<double> g1(m);
  std::vector<double> g2(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(g1.begin(), g1.end(), 0.0);
    std::fill(g2.begin(), g2.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      // b_ij = -b_ji; the slope of softabs is odd, so this picks the sign.
      const auto& b = i < j ? br[i * n + j] : br[j * n + i];
      const double sign = i < j ? 1.0 : -1.0;
      for (NodeIndex k = 0; k < m; ++k) {
        const double a = 2.0 * lambda[k] * softabs_slope(sign * b[k], eps) / c.density(k);
        g1[k] += a * d2[j][k];
        g2[k] += a * d1[j][k];
      }
    }
    add_derivative1_transpose(c, g1, (*grad)[i]);
    std::vector<double> t(m, 0.0);
    add_derivative2_transpose(c, g2, t);
    for (NodeIndex k = 0; k < m; ++k) (*grad)[i][k] -= t[k];
  }
  return value;
}

double pb_integral(const SurfaceChart& c, const Fields& v) {
  const std::size_t n = v.size();
  std::vector<double> p(c.size(), 0.0);
  std::vector<double> b(c.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      bracket_values(c, v[i], v[j], b);
      for (NodeIndex k = 0; k < p.size(); ++k) p[k] += 2.0 * std::abs(b[k]);
    }
  }
  return integrate_values(c, p);
}

double sup_pb(const SurfaceChart& c, const Fields& v) {
  const std::size_t n = v.size();
  std::vector<double> p(c.size(), 0.0);
  std::vector<double> b(c.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      bracket_values(c, v[i], v[j], b);
      for (NodeIndex k = 0; k < p.size(); ++k) p[k] += 2.0 * std::abs(b[k]);
    }
  }
  return *std::max_element(p.begin(), p.end());
}

struct Run {
  Fields values;
  std::vector<double> trace;
  std::vector<double> pb_trace;
};

// In partition mode the objective is seen through the division by S, whose
// derivative at S = 1 removes the node's f-weighted mean of the gradient.
void chain_through_partition(const Fields& x, Fields& g, Projection mode) {
  if (mode != Projection::partition || x.empty()) return;
  for (NodeIndex k = 0; k < x.front().size(); ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mean += x[i][k] * g[i][k];
    for (std::size_t i = 0; i < x.size(); ++i) g[i][k] -= mean;
  }
}

double dot(const Fields& a, const Fields& b) {
  std::vector<double> terms;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) terms.push_back(a[i][k] * b[i][k]);
  }
  return pairwise_sum(terms);
}

Run descend(const SurfaceChart& c, const Domains& d, Fields x, const OptimizerParams& prm, double eps) {
  Run run;
  Fields g;
  double fx = objective_values(c, x, prm, eps, &g);
  chain_through_partition(x, g, prm.projection);
  double px = pb_integral(c, x);
  run.trace.push_back(fx);
  run.pb_trace.push_back(px);
  double alpha = -1.0;
  Fields g_prev, mg_prev, dir_prev;
  for (int it = 0; it < prm.iterations && px > prm.stop_pb_integral; ++it) {
    Fields mg = g;
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (NodeIndex k = 0; k < c.size(); ++k) {
        // Nodes held at zero by the clamp whose gradient pushes them further
        // down are active constraints and drop out of the direction.
        if (!d.free[i][k] || (x[i][k] <= 0.0 && g[i][k] > 0.0)) mg[i][k] = 0.0;
      }
    }
    sobolev_gradient(c, d, mg, prm.sobolev_length);

    // Polak-Ribiere+ on the smoothed gradient; falls back to plain descent
    // when the combined direction stops pointing downhill.
    Fields dir = mg;
    bool conjugate = false;
    if (prm.conjugate && !dir_prev.empty()) {
      Fields diff = g;
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (NodeIndex k = 0; k < c.size(); ++k) diff[i][k] -= g_prev[i][k];
      }
      const double den = dot(mg_prev, g_prev);
      const double beta = den > 0 ? std::max(0.0, dot(mg, diff) / den) : 0.0;
      if (beta > 0) {
        for (std::size_t i = 0; i < dir.size(); ++i) {
          for (NodeIndex k = 0; k < c.size(); ++k) dir[i][k] += beta * dir_prev[i][k];
        }
        conjugate = dot(g, dir) > 0;
        if (!conjugate) dir = mg;
      }
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (!conjugate) break;
        dir = mg;
      }
      double gmax = 0.0;
      for (const auto& f : dir) {
        for (double v : f) gmax = std::max(gmax, std::abs(v));
      }
      if (gmax == 0.0) break;
      if (alpha < 0 || attempt == 1) alpha = prm.initial_step / gmax;

      for (int bt = 0; bt < prm.max_backtracks; ++bt, alpha *= prm.backtrack) {
        Fields y = x;
        for (std::size_t i = 0; i < y.size(); ++i) {
          for (NodeIndex k = 0; k < c.size(); ++k) y[i][k] -= alpha * dir[i][k];
        }
        try {
          project_values(d, y, prm.projection);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::infeasible) throw;
          continue;
        }
        Fields step = x;
        for (std::size_t i = 0; i < y.size(); ++i) {
          for (NodeIndex k = 0; k < c.size(); ++k) step[i][k] -= y[i][k];
        }
        const double predicted = std::max(0.0, dot(g, step));
        const double fy = objective_values(c, y, prm, eps, nullptr);
        if (fy < fx && fy <= fx - prm.armijo * predicted) {
          g_prev = std::move(g);
          mg_prev = std::move(mg);
          dir_prev = std::move(dir);
          x = std::move(y);
          fx = objective_values(c, x, prm, eps, &g);
          chain_through_partition(x, g, prm.projection);
          px = pb_integral(c, x);
          run.trace.push_back(fx);
          run.pb_trace.push_back(px);
          alpha /= prm.backtrack;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
  }
  run.values = std::move(x);
  return run;
}

}  // namespace

PositiveCollection project_collection(const Cover& U, const PositiveCollection& F, Projection mode) {
  require_same_chart(U.chart(), F.chart(), "project_collection");
  const Domains d = make_domains(U, F);
  Fields v = values_of(F);
  project_values(d, v, mode);
  return make_collection(F, std::move(v), mode);
}

double pb_objective(const PositiveCollection& F, const OptimizerParams& params, double eps,
                    std::vector<std::vector<double>>* grad) {
  if (!(eps > 0)) throw Error(ErrorCode::invalid_argument, "softabs eps must be positive");
  return objective_values(F.chart(), values_of(F), params, eps, grad);
}

OptimizeResult minimize_pb(const Cover& U, const PositiveCollection& F0, const OptimizerParams& prm) {
  require_same_chart(U.chart(), F0.chart(), "minimize_pb");
  if (prm.softabs_eps < 0 || prm.initial_step <= 0 || !(prm.backtrack > 0 && prm.backtrack < 1) ||
      prm.iterations < 0 || prm.restarts < 1 || prm.linf_beta <= 0 || prm.sobolev_length < 0) {
    throw Error(ErrorCode::invalid_argument, "invalid optimizer parameters");
  }
  const auto v0 = validate(F0, U);
  for (const auto& it : v0.items) {
    if ((it.name == "nonnegative" || it.name == "subordinate" || it.name == "chart") && !it.pass) {
      throw Error(ErrorCode::infeasible, "starting collection fails " + it.name);
    }
  }
  const SurfaceChart& c = F0.chart();
  const Domains d = make_domains(U, F0);
  Fields start = values_of(F0);
  project_values(d, start, prm.projection);

  double eps = prm.softabs_eps;
  if (eps == 0.0) {
    const double top = sup_pb(c, start);
    eps = 1e-3 * (top > 0 ? top : 1.0);
  }

  std::mt19937_64 rng(prm.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  OptimizeResult best{F0, {}, {}, eps, 0, 0};
  double best_value = std::numeric_limits<double>::infinity();
  for (int r = 0; r < prm.restarts; ++r) {
    Fields x = start;
    if (r > 0) {
      // Smooth multiplicative noise: three random low-frequency waves per field.
      for (std::size_t i = 0; i < x.size(); ++i) {
        double m1[3], m2[3], ph[3];
        for (int q = 0; q < 3; ++q) {
          m1[q] = std::round(2.0 * unit(rng));
          m2[q] = std::round(2.0 * unit(rng));
          ph[q] = std::numbers::pi * unit(rng);
        }
        for (NodeIndex k = 0; k < c.size(); ++k) {
          if (!d.free[i][k]) continue;
          const ChartPoint p = c.point(k);
          double wave = 0.0;
          for (int q = 0; q < 3; ++q) {
            wave += std::sin(2.0 * std::numbers::pi * (m1[q] * p.u / c.length1() + m2[q] * p.v / c.length2()) + ph[q]);
          }
          x[i][k] *= 1.0 + prm.restart_noise * wave / 3.0;
        }
      }
      project_values(d, x, prm.projection);
    }
    Run run = descend(c, d, std::move(x), prm, eps);
    const double final_value = run.trace.back();
    if (final_value < best_value) {
      best_value = final_value;
      best.best = make_collection(F0, std::move(run.values), prm.projection);
      best.trace = std::move(run.trace);
      best.pb_trace = std::move(run.pb_trace);
      best.best_restart = r;
      best.iterations = static_cast<int>(best.trace.size()) - 1;
    }
  }
  return best;
}

}  // namespace pbsurf
