#include "pbsurf/collection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "pbsurf/error.hpp"
#include "pbsurf/fields.hpp"
#include "pbsurf/parallel.hpp"

namespace pbsurf {

const char* to_string(CollectionMode mode) {
  return mode == CollectionMode::partition ? "partition" : "positive";
}

namespace {

struct Derivatives {
  std::vector<std::vector<double>> d1;
  std::vector<std::vector<double>> d2;
};

Derivatives differentiate(const std::vector<ScalarField>& fields) {
  Derivatives d;
  for (const auto& f : fields) {
    check_pole_band(f);
    d.d1.push_back(derivative1(f.chart(), f.values()));
    d.d2.push_back(derivative2(f.chart(), f.values()));
  }
  return d;
}

double bracket_at(const Derivatives& d, std::size_t i, std::size_t j, NodeIndex k, double rho) {
  return (d.d1[i][k] * d.d2[j][k] - d.d2[i][k] * d.d1[j][k]) / rho;
}

}  // namespace

// --- PositiveCollection -----------------------------------------------------

PositiveCollection::PositiveCollection(ChartPtr chart, std::vector<ScalarField> fields,
                                       std::vector<int> disc_of, CollectionMode mode)
    : chart_(std::move(chart)),
      fields_(std::move(fields)),
      disc_of_(std::move(disc_of)),
      mode_(mode) {
  if (disc_of_.size() != fields_.size()) {
    throw Error(ErrorCode::invalid_argument, "collection needs one disc index per field");
  }
  for (const auto& f : fields_) require_same_chart(f.chart(), *chart_, "PositiveCollection");
  std::vector<double> s(chart_->size(), 0.0);
  for (const auto& f : fields_) {
    const auto v = f.values();
    for (NodeIndex k = 0; k < s.size(); ++k) s[k] += v[k];
  }
  sum_ = ScalarField(chart_, std::move(s));
}

const ScalarField& PositiveCollection::pb() const {
  std::call_once(cache_->once, [&] { cache_->pb = std::make_unique<ScalarField>(pb_function(*this)); });
  return *cache_->pb;
}

PositiveCollection PositiveCollection::normalized() const {
  const auto s = sum_.values();
  for (NodeIndex k = 0; k < s.size(); ++k) {
    if (!(s[k] > 0.0)) {
      throw Error(ErrorCode::precondition, "cannot normalize: S_F vanishes at a node");
    }
  }
  std::vector<ScalarField> out;
  out.reserve(fields_.size());
  for (const auto& f : fields_) {
    std::vector<double> v(f.values().begin(), f.values().end());
    for (NodeIndex k = 0; k < v.size(); ++k) v[k] /= s[k];
    out.emplace_back(chart_, std::move(v));
  }
  return PositiveCollection(chart_, std::move(out), disc_of_, CollectionMode::partition);
}

// --- validation -------------------------------------------------------------

bool ValidationReport::pass() const {
  return std::all_of(items.begin(), items.end(), [](const ValidationItem& i) { return i.pass; });
}

const ValidationItem* ValidationReport::find(const std::string& name) const {
  for (const auto& i : items) {
    if (i.name == name) return &i;
  }
  return nullptr;
}

ValidationReport validate(const PositiveCollection& F, const Cover& U) {
  ValidationReport rep;
  const SurfaceChart& c = F.chart();
  if (!c.same_grid(U.chart())) {
    rep.items.push_back({"chart", false, 0.0, -1, 0});
    return rep;
  }

  ValidationItem nonneg{"nonnegative", true, 0.0, -1, 0};
  for (std::size_t i = 0; i < F.size(); ++i) {
    const auto v = F.field(i).values();
    for (NodeIndex k = 0; k < v.size(); ++k) {
      if (v[k] < nonneg.worst) {
        nonneg = {"nonnegative", false, v[k], static_cast<int>(i), k};
      }
    }
  }
  rep.items.push_back(nonneg);

  ValidationItem sub{"subordinate", true, 0.0, -1, 0};
  for (std::size_t i = 0; i < F.size(); ++i) {
    const int d = F.disc_of(i);
    if (d < 0 || static_cast<std::size_t>(d) >= U.size()) {
      if (sub.pass) sub = {"subordinate", false, 0.0, static_cast<int>(i), 0};
      sub.worst += 1.0;
      continue;
    }
    const auto v = F.field(i).values();
    Mask nz(v.size());
    for (NodeIndex k = 0; k < v.size(); ++k) nz[k] = v[k] != 0.0;
    const Mask grown = dilate(c, nz, 1);
    const Mask& disc = U.disc(static_cast<std::size_t>(d)).mask();
    for (NodeIndex k = 0; k < v.size(); ++k) {
      if (grown[k] && !disc[k]) {
        if (sub.pass) sub = {"subordinate", false, 0.0, static_cast<int>(i), k};
        sub.worst += 1.0;
      }
    }
  }
  rep.items.push_back(sub);

  const auto s = F.sum().values();
  if (F.mode() == CollectionMode::positive) {
    ValidationItem it{"sum_at_least_one", true, 0.0, -1, 0};
    double lo = std::numeric_limits<double>::infinity();
    for (NodeIndex k = 0; k < s.size(); ++k) {
      if (s[k] < lo) {
        lo = s[k];
        it.node = k;
      }
    }
    it.worst = lo;
    it.pass = lo >= 1.0 - 1e-9;
    rep.items.push_back(it);
  } else {
    ValidationItem it{"sum_equals_one", true, 0.0, -1, 0};
    for (NodeIndex k = 0; k < s.size(); ++k) {
      const double e = std::abs(s[k] - 1.0);
      if (e > it.worst) {
        it.worst = e;
        it.node = k;
      }
    }
    it.pass = it.worst <= 1e-9;
    rep.items.push_back(it);
  }
  return rep;
}

// --- bracket functions ------------------------------------------------------

ScalarField pb_function(const PositiveCollection& F) {
  const SurfaceChart& c = F.chart();
  const std::size_t n = F.size();
  const Derivatives d = differentiate(F.fields());
  std::vector<double> out(c.size(), 0.0);
  parallel_for(c.size(), [&](std::size_t b, std::size_t e) {
    for (NodeIndex k = b; k < e; ++k) {
      const double rho = c.density(k);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) acc += std::abs(bracket_at(d, i, j, k, rho));
      }
      out[k] = 2.0 * acc;
    }
  });
  return ScalarField(F.chart_ptr(), std::move(out));
}

ScalarField pb_pair_function(const PositiveCollection& F, const PositiveCollection& G) {
  require_same_chart(F.chart(), G.chart(), "pb_pair_function");
  const SurfaceChart& c = F.chart();
  const Derivatives df = differentiate(F.fields());
  const Derivatives dg = differentiate(G.fields());
  std::vector<double> out(c.size(), 0.0);
  parallel_for(c.size(), [&](std::size_t b, std::size_t e) {
    for (NodeIndex k = b; k < e; ++k) {
      const double rho = c.density(k);
      double acc = 0.0;
      for (std::size_t i = 0; i < F.size(); ++i) {
        for (std::size_t j = 0; j < G.size(); ++j) {
          acc += std::abs((df.d1[i][k] * dg.d2[j][k] - df.d2[i][k] * dg.d1[j][k]) / rho);
        }
      }
      out[k] = acc;
    }
  });
  return ScalarField(F.chart_ptr(), std::move(out));
}

std::vector<double> bracket_column_sum(const PositiveCollection& F, const std::vector<int>& js) {
  const SurfaceChart& c = F.chart();
  for (int j : js) {
    if (j < 0 || static_cast<std::size_t>(j) >= F.size()) {
      throw Error(ErrorCode::invalid_argument, "bracket_column_sum: field index out of range");
    }
  }
  const Derivatives d = differentiate(F.fields());
  std::vector<double> out(c.size(), 0.0);
  parallel_for(c.size(), [&](std::size_t b, std::size_t e) {
    for (NodeIndex k = b; k < e; ++k) {
      const double rho = c.density(k);
      double acc = 0.0;
      for (int j : js) {
        for (std::size_t i = 0; i < F.size(); ++i) {
          acc += std::abs(bracket_at(d, i, static_cast<std::size_t>(j), k, rho));
        }
      }
      out[k] = acc;
    }
  });
  return out;
}

// --- operations -------------------------------------------------------------

PositiveCollection condense(const PositiveCollection& F, const std::vector<int>& c) {
  if (c.size() != F.size()) {
    throw Error(ErrorCode::invalid_argument, "condensation map needs one entry per field");
  }
  const int m = c.empty() ? 0 : *std::max_element(c.begin(), c.end()) + 1;
  std::vector<int> hits(static_cast<std::size_t>(m), 0);
  for (int j : c) {
    if (j < 0) throw Error(ErrorCode::invalid_argument, "condensation map has a negative index");
    ++hits[static_cast<std::size_t>(j)];
  }
  if (std::find(hits.begin(), hits.end(), 0) != hits.end()) {
    throw Error(ErrorCode::invalid_argument, "condensation map is not surjective");
  }
  const std::size_t nodes = F.chart().size();
  std::vector<std::vector<double>> acc(static_cast<std::size_t>(m), std::vector<double>(nodes, 0.0));
  std::vector<int> disc(static_cast<std::size_t>(m), -2);
  for (std::size_t i = 0; i < F.size(); ++i) {
    const auto j = static_cast<std::size_t>(c[i]);
    const auto v = F.field(i).values();
    for (NodeIndex k = 0; k < nodes; ++k) acc[j][k] += v[k];
    if (disc[j] == -2) {
      disc[j] = F.disc_of(i);
    } else if (disc[j] != F.disc_of(i)) {
      disc[j] = -1;
    }
  }
  std::vector<ScalarField> fields;
  fields.reserve(acc.size());
  for (auto& v : acc) fields.emplace_back(F.chart_ptr(), std::move(v));
  return PositiveCollection(F.chart_ptr(), std::move(fields), std::move(disc), F.mode());
}

PositiveCollection fragment(const PositiveCollection& F) {
  const SurfaceChart& c = F.chart();
  std::vector<ScalarField> out;
  std::vector<int> disc;
  for (std::size_t i = 0; i < F.size(); ++i) {
    const auto v = F.field(i).values();
    Mask nz(v.size());
    for (NodeIndex k = 0; k < v.size(); ++k) nz[k] = v[k] != 0.0;
    const auto comps = mask_components(c, nz);
    if (comps.size() <= 1) {
      out.push_back(F.field(i));
      disc.push_back(F.disc_of(i));
      continue;
    }
    std::vector<int> label(c.size(), -1);
    for (std::size_t a = 0; a < comps.size(); ++a) {
      for (NodeIndex k = 0; k < c.size(); ++k) {
        if (comps[a][k]) label[k] = static_cast<int>(a);
      }
    }
    // Union-find over components that share a stencil.
    std::vector<int> parent(comps.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (NodeIndex k = 0; k < c.size(); ++k) {
      int first = -1;
      for_each_stencil_node(c, k, [&](NodeIndex m) {
        if (label[m] < 0) return;
        if (first < 0) {
          first = label[m];
        } else {
          const int a = find(first);
          const int b = find(label[m]);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
      });
    }
    std::vector<int> group_of(comps.size());
    std::vector<int> roots;
    for (std::size_t a = 0; a < comps.size(); ++a) {
      const int r = find(static_cast<int>(a));
      auto it = std::find(roots.begin(), roots.end(), r);
      if (it == roots.end()) {
        roots.push_back(r);
        it = roots.end() - 1;
      }
      group_of[a] = static_cast<int>(it - roots.begin());
    }
    std::vector<std::vector<double>> parts(roots.size(), std::vector<double>(c.size(), 0.0));
    for (NodeIndex k = 0; k < c.size(); ++k) {
      if (label[k] >= 0) parts[static_cast<std::size_t>(group_of[label[k]])][k] = v[k];
    }
    for (auto& p : parts) {
      out.emplace_back(F.chart_ptr(), std::move(p));
      disc.push_back(F.disc_of(i));
    }
  }
  return PositiveCollection(F.chart_ptr(), std::move(out), std::move(disc), F.mode());
}

// --- pb invariant -----------------------------------------------------------

PbBounds pb_invariant(const PositiveCollection& F, PbMethod method) {
  const SurfaceChart& c = F.chart();
  const std::size_t n = F.size();
  if (method == PbMethod::sandwich) {
    const Derivatives d = differentiate(F.fields());
    PbBounds out;
    for (NodeIndex k = 0; k < c.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          out.lower = std::max(out.lower, std::abs(bracket_at(d, i, j, k, c.density(k))));
        }
      }
    }
    out.upper = sup_norm(F.pb());
    return out;
  }

  if (n > kPbExactMaxFields) {
    throw Error(ErrorCode::invalid_argument,
                "exact pb invariant is limited to " + std::to_string(kPbExactMaxFields) + " fields");
  }
  const Derivatives d = differentiate(F.fields());
  const auto p = F.pb().values();
  std::vector<NodeIndex> order(c.size());
  std::iota(order.begin(), order.end(), NodeIndex{0});
  std::stable_sort(order.begin(), order.end(), [&](NodeIndex a, NodeIndex b) { return p[a] > p[b]; });

  // For fixed a, max over b of |a^T B b| is |B^T a|_1 = |B a|_1; enumerate a
  // up to global sign with a Gray code over the fields active at the node.
  double best = 0.0;
  std::vector<double> b(n * n);
  std::vector<std::size_t> active;
  std::vector<double> v(n);
  for (NodeIndex k : order) {
    if (p[k] <= best) break;
    const double rho = c.density(k);
    active.clear();
    for (std::size_t i = 0; i < n; ++i) {
      bool any = false;
      for (std::size_t j = 0; j < n; ++j) {
        b[i * n + j] = i == j ? 0.0 : bracket_at(d, i, j, k, rho);
        any = any || b[i * n + j] != 0.0;
      }
      if (any) active.push_back(i);
    }
    const std::size_t m = active.size();
    if (m < 2) continue;
    std::vector<double> sign(m, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < m; ++q) s += b[active[q] * n + j];
      v[j] = s;
    }
    auto l1 = [&] {
      double s = 0.0;
      for (std::size_t q = 0; q < m; ++q) s += std::abs(v[active[q]]);
      return s;
    };
    double node_best = l1();
    const std::uint64_t steps = std::uint64_t{1} << (m - 1);
    for (std::uint64_t t = 1; t < steps; ++t) {
      const std::size_t g = static_cast<std::size_t>(std::countr_zero(t)) + 1;
      sign[g] = -sign[g];
      const std::size_t row = active[g];
      for (std::size_t q = 0; q < m; ++q) {
        v[active[q]] += 2.0 * sign[g] * b[row * n + active[q]];
      }
      node_best = std::max(node_best, l1());
    }
    best = std::max(best, node_best);
  }
  return {best, best};
}

}  // namespace pbsurf
