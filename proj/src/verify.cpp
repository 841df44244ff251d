#include "pbsurf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pbsurf/error.hpp"

namespace pbsurf {

const char* to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::area_form: return "area_form";
    case MeasureKind::dirac_sum: return "dirac_sum";
    case MeasureKind::custom: return "custom";
  }
  return "?";
}

// --- Measure ----------------------------------------------------------------

Measure::Measure(ChartPtr chart, MeasureKind kind, bool normalized, std::vector<double> weights)
    : chart_(std::move(chart)), kind_(kind), normalized_(normalized), weights_(std::move(weights)) {
  for (NodeIndex k = 0; k < weights_.size(); ++k) {
    if (weights_[k] > 0) support_.push_back(k);
  }
  if (support_.empty()) throw Error(ErrorCode::invalid_argument, "measure has no mass");
  if (normalized_) {
    const double t = pairwise_sum(weights_);
    for (double& w : weights_) w /= t;
  }
}

Measure Measure::area_form(const ChartPtr& chart, bool normalized) {
  std::vector<double> w(chart->size());
  for (NodeIndex k = 0; k < w.size(); ++k) w[k] = chart->density(k) * chart->cell_area();
  return Measure(chart, MeasureKind::area_form, normalized, std::move(w));
}

Measure Measure::dirac_sum(const ChartPtr& chart, std::vector<NodeIndex> points,
                           std::vector<double> weights) {
  if (points.empty()) throw Error(ErrorCode::invalid_argument, "dirac sum needs at least one point");
  if (weights.empty()) weights.assign(points.size(), 1.0);
  if (weights.size() != points.size()) {
    throw Error(ErrorCode::invalid_argument, "dirac sum: one weight per point");
  }
  std::vector<double> w(chart->size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i] >= w.size()) throw Error(ErrorCode::invalid_argument, "dirac point off the grid");
    if (!(weights[i] > 0)) throw Error(ErrorCode::invalid_argument, "dirac weights must be positive");
    w[points[i]] += weights[i];
  }
  return Measure(chart, MeasureKind::dirac_sum, false, std::move(w));
}

Measure Measure::custom(const ScalarField& density, bool normalized) {
  const SurfaceChart& c = density.chart();
  std::vector<double> w(c.size());
  for (NodeIndex k = 0; k < w.size(); ++k) {
    if (density[k] < 0 || !std::isfinite(density[k])) {
      throw Error(ErrorCode::invalid_argument, "measure density must be finite and nonnegative");
    }
    w[k] = density[k] * c.density(k) * c.cell_area();
  }
  return Measure(density.chart_ptr(), MeasureKind::custom, normalized, std::move(w));
}

double Measure::total() const { return pairwise_sum(weights_); }

double Measure::of(const Mask& region) const {
  if (region.size() != weights_.size()) {
    throw Error(ErrorCode::chart_mismatch, "measure: region mask size mismatch");
  }
  std::vector<double> w(weights_.size());
  for (NodeIndex k = 0; k < w.size(); ++k) w[k] = region[k] ? weights_[k] : 0.0;
  return pairwise_sum(w);
}

// --- reports and hypotheses ---------------------------------------------------

CheckReport make_report(std::string check, double value, double bound, double rel_tol,
                        std::string provenance) {
  CheckReport r;
  r.check = std::move(check);
  r.value = value;
  r.bound = bound;
  r.margin = value - bound;
  r.tolerance = rel_tol * std::abs(bound);
  r.pass = r.margin >= -r.tolerance;
  r.provenance = std::move(provenance);
  return r;
}

Hypotheses assess_hypotheses(const Cover& U, const PositiveCollection& F) {
  require_same_chart(U.chart(), F.chart(), "assess_hypotheses");
  Hypotheses h;
  const auto v = validate(F, U);
  h.collection_valid = v.pass();
  h.discs_only = std::all_of(F.disc_map().begin(), F.disc_map().end(), [](int d) { return d >= 0; });
  h.general_position = U.check_general_position().pass();
  h.genus_positive = U.chart().kind() == ChartKind::torus;
  const auto& loc = U.declared_localization();
  h.localized3 = loc.size() >= 3 && U.check_localized(loc);

  if (!h.collection_valid) {
    for (const auto& it : v.items) {
      if (!it.pass) {
        h.summary = "collection fails " + it.name;
        break;
      }
    }
  } else if (!h.discs_only) {
    h.summary = "a field is not assigned to a single disc";
  } else if (!h.general_position) {
    h.summary = "discs are not in general position";
  }
  return h;
}

namespace {

const Hypotheses& resolve(const Cover& U, const PositiveCollection& F, const VerifyOptions& opt,
                          Hypotheses& storage) {
  if (opt.hypotheses) return *opt.hypotheses;
  storage = assess_hypotheses(U, F);
  return storage;
}

void require_base(const Hypotheses& h, const char* where) {
  if (!h.base()) {
    throw Error(ErrorCode::hypotheses_unmet, std::string(where) + ": " + h.summary);
  }
}

std::vector<int> fields_of_discs(const PositiveCollection& F, std::span<const std::uint32_t> discs) {
  std::vector<int> out;
  for (std::size_t i = 0; i < F.size(); ++i) {
    const int d = F.disc_of(i);
    if (std::find(discs.begin(), discs.end(), static_cast<std::uint32_t>(d)) != discs.end()) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::vector<int> fields_of_disc(const PositiveCollection& F, int j) {
  const std::uint32_t one[1] = {static_cast<std::uint32_t>(j)};
  return fields_of_discs(F, one);
}

double masked_column_integral(const PositiveCollection& F, const std::vector<int>& js,
                              const Mask& region) {
  if (js.empty()) return 0.0;
  ScalarField col(F.chart_ptr(), bracket_column_sum(F, js));
  return integrate_over(col, region);
}

void require_disc_index(const Cover& U, int j) {
  if (j < 0 || static_cast<std::size_t>(j) >= U.size()) {
    throw Error(ErrorCode::invalid_argument, "disc index out of range");
  }
}

void require_confined_essential(const Cover& U, int j, const char* where) {
  const DiscClass c = classify_disc(U, j);
  if (!c.essential) {
    throw Error(ErrorCode::precondition,
                std::string(where) + ": disc " + std::to_string(j) + " is not essential");
  }
  if (!c.confined) {
    throw Error(ErrorCode::precondition,
                std::string(where) + ": disc " + std::to_string(j) + " is essential but not confined");
  }
}

void require_partition(const PositiveCollection& F, const char* where) {
  if (F.mode() != CollectionMode::partition) {
    throw Error(ErrorCode::precondition, std::string(where) + ": collection is not a partition of unity");
  }
}

bool is_declared_point(const Cover& U, NodeIndex x) {
  const auto& loc = U.declared_localization();
  return std::find(loc.begin(), loc.end(), x) != loc.end();
}

}  // namespace

DiscClass classify_disc(const Cover& U, int j) {
  require_disc_index(U, j);
  DiscClass c;
  if (!U.is_essential(j)) return c;
  c.essential = true;
  for (NodeIndex k = 0; k < U.chart().size(); ++k) {
    const auto m = U.members_at(k);
    if (m.size() == 1 && static_cast<int>(m[0]) == j) {
      c.witness = k;
      break;
    }
  }
  c.confined = U.is_confined(c.witness).confined;
  return c;
}

std::vector<int> confined_essential_discs(const Cover& U) {
  std::vector<int> out;
  for (int j : U.essential_discs()) {
    if (classify_disc(U, j).confined) out.push_back(j);
  }
  return out;
}

CheckReport check_confined_essential(const Cover& U, const PositiveCollection& F, int j,
                                     const VerifyOptions& opt) {
  require_disc_index(U, j);
  require_confined_essential(U, j, "check_confined_essential");
  Hypotheses storage;
  require_base(resolve(U, F, opt, storage), "check_confined_essential");
  const double value = masked_column_integral(F, fields_of_disc(F, j), U.disc(j).mask());
  return make_report("confined_essential[" + std::to_string(j) + "]", value, 1.0, opt.tolerance,
                     "confined-essential disc inequality");
}

double star_constant(const Cover& U, NodeIndex x, const Hypotheses& h) {
  if (h.genus_positive) return 1.0;
  if (U.is_confined(x).confined) return 1.0;
  if (h.localized3) return is_declared_point(U, x) ? 1.0 : 0.25;
  throw Error(ErrorCode::hypotheses_unmet,
              "star at node " + std::to_string(x) + " is not confined and the cover is not 3-localized");
}

CheckReport check_star(const Cover& U, const PositiveCollection& F, NodeIndex x,
                       const VerifyOptions& opt) {
  if (x >= U.chart().size()) throw Error(ErrorCode::invalid_argument, "check_star: node off the grid");
  Hypotheses storage;
  const Hypotheses& h = resolve(U, F, opt, storage);
  require_base(h, "check_star");
  const double bound = star_constant(U, x, h);
  const double value = masked_column_integral(F, fields_of_discs(F, U.members_at(x)), U.star_region(x));
  std::string prov = h.genus_positive ? "star inequality, genus >= 1"
                     : bound == 1.0   ? "star inequality, confined star or localization point"
                                      : "star inequality, 3-localized sphere";
  return make_report("star[" + std::to_string(x) + "]", value, bound, opt.tolerance, std::move(prov));
}

CheckReport check_pb_bound(const Cover& U, const PositiveCollection& F, const Measure& mu,
                           const VerifyOptions& opt) {
  require_same_chart(U.chart(), mu.chart(), "check_pb_bound");
  Hypotheses storage;
  const Hypotheses& h = resolve(U, F, opt, storage);
  require_base(h, "check_pb_bound");
  if (!h.genus_positive && !h.localized3) {
    throw Error(ErrorCode::hypotheses_unmet, "check_pb_bound: sphere cover without a 3-localization");
  }
  double worst = 0.0;
  for (const auto& d : U.discs()) worst = std::max(worst, mu.of(d.mask()));
  const double bound = mu.total() / worst;
  return make_report(std::string("pb_bound[") + to_string(mu.kind()) + "]", integrate(F.pb()), bound,
                     opt.tolerance, "averaged star inequality");
}

CheckReport check_half_capacity_bound(const Cover& U, const PositiveCollection& F,
                                      const VerifyOptions& opt) {
  require_same_chart(U.chart(), F.chart(), "check_half_capacity_bound");
  const double bound = U.chart().total_area() / (2.0 * U.capacity());
  return make_report("pb_bound_half_capacity", integrate(F.pb()), bound, opt.tolerance,
                     "earlier Area/(2c) lower bound");
}

CheckReport check_essential_count(const Cover& U, const PositiveCollection& F,
                                  const VerifyOptions& opt) {
  Hypotheses storage;
  require_base(resolve(U, F, opt, storage), "check_essential_count");
  const double bound = static_cast<double>(confined_essential_discs(U).size());
  return make_report("essential_count", integrate(F.pb()), bound, opt.tolerance,
                     "sum of confined-essential disc inequalities");
}

CheckReport check_partition_refinement(const Cover& U, const PositiveCollection& F, int j,
                                       const VerifyOptions& opt) {
  require_partition(F, "check_partition_refinement");
  require_disc_index(U, j);
  require_confined_essential(U, j, "check_partition_refinement");
  Hypotheses storage;
  require_base(resolve(U, F, opt, storage), "check_partition_refinement");
  const double value = integrate_over(F.pb(), U.disc(j).mask());
  return make_report("partition_refinement[" + std::to_string(j) + "]", value, 2.0, opt.tolerance,
                     "partition of unity doubles the confined-essential bound");
}

CheckReport check_partition_disjoint(const Cover& U, const PositiveCollection& F,
                                     const std::vector<int>& discs, const VerifyOptions& opt) {
  require_partition(F, "check_partition_disjoint");
  if (discs.empty()) throw Error(ErrorCode::invalid_argument, "check_partition_disjoint: no discs");
  for (std::size_t a = 0; a < discs.size(); ++a) {
    require_disc_index(U, discs[a]);
    require_confined_essential(U, discs[a], "check_partition_disjoint");
    for (std::size_t b = 0; b < a; ++b) {
      const Mask& ma = U.disc(discs[a]).mask();
      const Mask& mb = U.disc(discs[b]).mask();
      for (NodeIndex k = 0; k < ma.size(); ++k) {
        if (ma[k] && mb[k]) {
          throw Error(ErrorCode::precondition, "check_partition_disjoint: discs " +
                                                   std::to_string(discs[a]) + " and " +
                                                   std::to_string(discs[b]) + " overlap");
        }
      }
    }
  }
  Hypotheses storage;
  require_base(resolve(U, F, opt, storage), "check_partition_disjoint");
  const double bound = 2.0 * static_cast<double>(discs.size());
  return make_report("partition_disjoint[J=" + std::to_string(discs.size()) + "]", integrate(F.pb()),
                     bound, opt.tolerance, "partition of unity, disjoint confined-essential discs");
}

AveragingReport averaging_report(const Cover& U, const PositiveCollection& F, const Measure& mu,
                                 const VerifyOptions& opt) {
  require_same_chart(U.chart(), F.chart(), "averaging_report");
  require_same_chart(U.chart(), mu.chart(), "averaging_report");
  Hypotheses storage;
  const Hypotheses& h = resolve(U, F, opt, storage);

  // sum_i |{f_i, f_j}| for every field j, and its integral over M.
  std::vector<ScalarField> columns;
  std::vector<double> column(F.size());
  for (std::size_t j = 0; j < F.size(); ++j) {
    columns.emplace_back(F.chart_ptr(), bracket_column_sum(F, {static_cast<int>(j)}));
    column[j] = integrate(columns.back());
  }

  // Star values and constants depend on x only through its membership set
  // (plus, on a localized sphere, whether x is a declared point).
  struct Group {
    std::vector<double> weights;
    NodeIndex sample = 0;
    bool declared = false;
  };
  std::map<std::pair<std::vector<std::uint32_t>, bool>, Group> groups;
  for (NodeIndex k : mu.support()) {
    const auto m = U.members_at(k);
    const bool declared = is_declared_point(U, k);
    auto& g = groups[{std::vector<std::uint32_t>(m.begin(), m.end()), declared}];
    if (g.weights.empty()) {
      g.sample = k;
      g.declared = declared;
    }
    g.weights.push_back(mu.weights()[k]);
  }

  std::vector<double> c_terms;
  std::vector<double> star_terms;
  for (const auto& [key, g] : groups) {
    const double w = pairwise_sum(g.weights);
    double cx = 0.0;
    if (h.base()) {
      try {
        cx = star_constant(U, g.sample, h);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::hypotheses_unmet) throw;
      }
    }
    c_terms.push_back(w * cx);
    const Mask star = U.star_region(g.sample);
    std::vector<double> per_field;
    for (int j : fields_of_discs(F, key.first)) {
      per_field.push_back(integrate_over(columns[static_cast<std::size_t>(j)], star));
    }
    star_terms.push_back(w * pairwise_sum(per_field));
  }

  std::vector<double> disc_mu(U.size());
  for (std::size_t i = 0; i < U.size(); ++i) disc_mu[i] = mu.of(U.disc(i).mask());
  std::vector<double> rhs_terms;
  for (std::size_t j = 0; j < F.size(); ++j) {
    if (F.disc_of(j) < 0) continue;
    rhs_terms.push_back(disc_mu[static_cast<std::size_t>(F.disc_of(j))] * column[j]);
  }

  AveragingReport r;
  r.mu_c = pairwise_sum(c_terms);
  r.mu_u = *std::max_element(disc_mu.begin(), disc_mu.end());
  r.fubini_lhs = pairwise_sum(star_terms);
  r.fubini_rhs = pairwise_sum(rhs_terms);
  r.pb_integral = integrate(F.pb());
  r.lower = r.mu_c / r.mu_u;
  r.chain_holds = r.lower <= r.pb_integral * (1.0 + opt.tolerance);
  return r;
}

}  // namespace pbsurf
