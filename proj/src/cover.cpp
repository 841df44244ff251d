#include "pbsurf/cover.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <tuple>

#include "pbsurf/error.hpp"
#include "pbsurf/fields.hpp"

namespace pbsurf {

namespace {

constexpr int kDirs4[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
constexpr int kDirs8[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1},
                              {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

std::size_t count(const Mask& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

double mask_area(const SurfaceChart& c, const Mask& m) {
  std::vector<double> v(m.begin(), m.end());
  return integrate_values(c, v);
}

}  // namespace

// --- topology helpers -------------------------------------------------------

int euler_characteristic(const SurfaceChart& c, const Mask& mask) {
  long v = 0;
  long e = 0;
  long f = 0;
  for (NodeIndex k = 0; k < c.size(); ++k) {
    if (!mask[k]) continue;
    ++v;
    const auto right = c.neighbor(k, 1, 0);
    const auto up = c.neighbor(k, 0, 1);
    if (right && mask[*right]) ++e;
    if (up && mask[*up]) ++e;
    if (right && up) {
      const auto diag = c.neighbor(k, 1, 1);
      if (mask[*right] && mask[*up] && mask[*diag]) ++f;
    }
  }
  if (c.kind() == ChartKind::sphere) {
    for (int j : {0, c.n2() - 1}) {
      bool full = true;
      for (int i = 0; i < c.n1() && full; ++i) full = mask[c.index(i, j)] != 0;
      if (full) {
        // Pole vertex, n1 spokes and n1 triangles.
        v += 1;
        e += c.n1();
        f += c.n1();
      }
    }
  }
  return static_cast<int>(v - e + f);
}

bool mask_wraps(const SurfaceChart& c, const Mask& mask) {
  constexpr long kUnset = std::numeric_limits<long>::min();
  std::vector<long> ui(c.size(), kUnset);
  std::vector<long> uj(c.size(), kUnset);
  std::vector<NodeIndex> stack;
  for (NodeIndex seed = 0; seed < c.size(); ++seed) {
    if (!mask[seed] || ui[seed] != kUnset) continue;
    ui[seed] = c.i_of(seed);
    uj[seed] = c.j_of(seed);
    stack.push_back(seed);
    while (!stack.empty()) {
      const NodeIndex k = stack.back();
      stack.pop_back();
      for (const auto& d : kDirs4) {
        const auto nb = c.neighbor(k, d[0], d[1]);
        if (!nb || !mask[*nb]) continue;
        const long ei = ui[k] + d[0];
        const long ej = uj[k] + d[1];
        if (ui[*nb] == kUnset) {
          ui[*nb] = ei;
          uj[*nb] = ej;
          stack.push_back(*nb);
        } else if (ui[*nb] != ei || uj[*nb] != ej) {
          return true;
        }
      }
    }
  }
  return false;
}

void require_disc_mask(const SurfaceChart& c, const Mask& mask) {
  if (mask.size() != c.size()) throw Error(ErrorCode::chart_mismatch, "disc mask size mismatch");
  if (count(mask) == 0) throw Error(ErrorCode::topology, "disc mask is empty");
  const auto comps = mask_components(c, mask);
  if (comps.size() != 1) {
    throw Error(ErrorCode::topology,
                "disc mask has " + std::to_string(comps.size()) + " connected components");
  }
  const int chi = euler_characteristic(c, mask);
  if (chi != 1) {
    throw Error(ErrorCode::topology,
                "disc mask is not simply connected (Euler characteristic " + std::to_string(chi) + ")");
  }
}

Mask dilate(const SurfaceChart& c, const Mask& mask, int rings) {
  Mask cur = mask;
  for (int r = 0; r < rings; ++r) {
    Mask next = cur;
    for (NodeIndex k = 0; k < c.size(); ++k) {
      if (!cur[k]) continue;
      for (const auto& d : kDirs4) {
        if (const auto nb = c.neighbor(k, d[0], d[1])) next[*nb] = 1;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

std::vector<double> signed_distance(const SurfaceChart& c, const Mask& mask) {
  const double far = std::hypot(c.length1(), c.length2());
  std::vector<double> dist(c.size(), std::numeric_limits<double>::infinity());
  std::vector<ChartPoint> source(c.size());
  using Item = std::pair<double, NodeIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;

  // Seeds: midpoints of edges joining an inside node to an outside node.
  for (NodeIndex k = 0; k < c.size(); ++k) {
    const ChartPoint p = c.point(k);
    for (const auto& d : kDirs4) {
      const auto nb = c.neighbor(k, d[0], d[1]);
      if (!nb || mask[*nb] == mask[k]) continue;
      const ChartPoint q = c.point(*nb);
      const ChartPoint step = c.displacement(p, q);
      const ChartPoint mid{p.u + 0.5 * step.u, p.v + 0.5 * step.v};
      const double r = std::hypot(0.5 * step.u, 0.5 * step.v);
      if (r < dist[k]) {
        dist[k] = r;
        source[k] = mid;
      }
    }
    if (std::isfinite(dist[k])) heap.emplace(dist[k], k);
  }
  std::vector<std::uint8_t> done(c.size(), 0);
  while (!heap.empty()) {
    const auto [dk, k] = heap.top();
    heap.pop();
    if (done[k] || dk > dist[k]) continue;
    done[k] = 1;
    for (const auto& d : kDirs8) {
      const auto nb = c.neighbor(k, d[0], d[1]);
      if (!nb || done[*nb] || mask[*nb] != mask[k]) continue;
      const double cand = c.distance(source[k], c.point(*nb));
      if (cand < dist[*nb]) {
        dist[*nb] = cand;
        source[*nb] = source[k];
        heap.emplace(cand, *nb);
      }
    }
  }
  std::vector<double> out(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    const double d = std::isfinite(dist[k]) ? dist[k] : far;
    out[k] = mask[k] ? -d : d;
  }
  return out;
}

// --- Disc -------------------------------------------------------------------

Disc::Disc(ChartPtr chart, std::vector<double> level, Mask mask)
    : chart_(std::move(chart)), level_(std::move(level)), mask_(std::move(mask)) {
  require_disc_mask(*chart_, mask_);
  area_ = mask_area(*chart_, mask_);
}

Disc Disc::geometric(const ChartPtr& chart, ChartPoint center, double radius) {
  if (!(radius > 0)) throw Error(ErrorCode::invalid_argument, "disc radius must be positive");
  const SurfaceChart& c = *chart;
  center = c.wrap(center);
  std::vector<double> level(c.size());
  Mask mask(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    level[k] = c.distance(center, c.point(k)) - radius;
    mask[k] = level[k] < 0.0;
  }
  return Disc(chart, std::move(level), std::move(mask));
}

Disc Disc::implicit(const ChartPtr& chart, std::vector<double> level) {
  if (level.size() != chart->size()) {
    throw Error(ErrorCode::chart_mismatch, "implicit disc level field size mismatch");
  }
  Mask mask(level.size());
  for (std::size_t k = 0; k < level.size(); ++k) {
    if (!std::isfinite(level[k])) {
      throw Error(ErrorCode::invalid_argument, "implicit disc level field is not finite");
    }
    mask[k] = level[k] < 0.0;
  }
  return Disc(chart, std::move(level), std::move(mask));
}

Disc Disc::cap(const ChartPtr& chart, double z0, bool north) {
  if (chart->kind() != ChartKind::sphere) {
    throw Error(ErrorCode::invalid_argument, "cap discs live on the sphere chart");
  }
  std::vector<double> level(chart->size());
  for (NodeIndex k = 0; k < chart->size(); ++k) {
    const double z = chart->point(k).v;
    level[k] = north ? z0 - z : z - z0;
  }
  return implicit(chart, std::move(level));
}

Disc Disc::from_mask(const ChartPtr& chart, Mask mask) {
  if (mask.size() != chart->size()) {
    throw Error(ErrorCode::chart_mismatch, "disc mask size mismatch");
  }
  auto level = signed_distance(*chart, mask);
  return Disc(chart, std::move(level), std::move(mask));
}

Disc Disc::on_chart(const ChartPtr& chart) const {
  if (!chart->same_grid(*chart_)) {
    throw Error(ErrorCode::chart_mismatch, "disc moved to a different grid");
  }
  Disc d = *this;
  d.chart_ = chart;
  d.area_ = mask_area(*chart, d.mask_);
  return d;
}

// --- Cover ------------------------------------------------------------------

Cover::Cover(ChartPtr chart, std::vector<Disc> discs) : chart_(std::move(chart)) {
  const SurfaceChart& c = *chart_;
  if (discs.empty()) throw Error(ErrorCode::invalid_argument, "cover has no discs");
  discs_.reserve(discs.size());
  for (auto& d : discs) {
    if (!d.chart().same_grid(c)) {
      throw Error(ErrorCode::chart_mismatch, "cover disc lives on a different grid");
    }
    discs_.push_back(d.chart().same_as(c) ? std::move(d) : d.on_chart(chart_));
  }

  offsets_.assign(c.size() + 1, 0);
  for (NodeIndex k = 0; k < c.size(); ++k) {
    std::uint32_t n = 0;
    for (const auto& d : discs_) n += d.contains(k);
    if (n == 0) {
      throw Error(ErrorCode::invalid_argument,
                  "discs do not cover node (" + std::to_string(c.i_of(k)) + ", " +
                      std::to_string(c.j_of(k)) + ")");
    }
    offsets_[k + 1] = offsets_[k] + n;
  }
  members_.resize(offsets_.back());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    std::uint32_t pos = offsets_[k];
    for (std::uint32_t i = 0; i < discs_.size(); ++i) {
      if (discs_[i].contains(k)) members_[pos++] = i;
    }
  }

  const std::size_t n = discs_.size();
  std::vector<std::uint8_t> single(n, 0);
  std::vector<std::uint8_t> meets(n * n, 0);
  for (NodeIndex k = 0; k < c.size(); ++k) {
    const auto m = members_at(k);
    if (m.size() == 1) single[m[0]] = 1;
    for (auto a : m) {
      for (auto b : m) meets[a * n + b] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (single[i]) essential_.push_back(static_cast<int>(i));
    capacity_ = std::max(capacity_, discs_[i].area());
    int deg = 0;
    for (std::size_t j = 0; j < n; ++j) deg += meets[i * n + j];
    degree_bar_ = std::max(degree_bar_, deg);
  }
}

Mask Cover::star_region(NodeIndex x) const {
  Mask star(chart_->size(), 0);
  for (auto i : members_at(x)) {
    const Mask& m = discs_[i].mask();
    for (NodeIndex k = 0; k < star.size(); ++k) star[k] |= m[k];
  }
  return star;
}

double Cover::star_area(NodeIndex x) const { return mask_area(*chart_, star_region(x)); }

bool Cover::is_essential(int i) const {
  return std::binary_search(essential_.begin(), essential_.end(), i);
}

bool Cover::covers_without(int i) const {
  for (NodeIndex k = 0; k < chart_->size(); ++k) {
    const auto m = members_at(k);
    if (m.size() == 1 && static_cast<int>(m[0]) == i) return false;
  }
  return true;
}

Confinement Cover::is_confined(NodeIndex x) const {
  const SurfaceChart& c = *chart_;
  const Mask star = star_region(x);
  Mask boundary(c.size(), 0);
  bool any = false;
  for (NodeIndex k = 0; k < c.size(); ++k) {
    if (star[k]) continue;
    for (const auto& d : kDirs4) {
      const auto nb = c.neighbor(k, d[0], d[1]);
      if (nb && star[*nb]) {
        boundary[k] = 1;
        any = true;
        break;
      }
    }
  }
  Confinement out;
  if (!any) {
    out.no_boundary = true;
    return out;
  }

  std::vector<std::uint8_t> seen(c.size(), 0);
  std::vector<NodeIndex> stack;
  std::vector<NodeIndex> comp;
  for (NodeIndex seed = 0; seed < c.size(); ++seed) {
    if (!boundary[seed] || seen[seed]) continue;
    comp.clear();
    seen[seed] = 1;
    stack.push_back(seed);
    while (!stack.empty()) {
      const NodeIndex k = stack.back();
      stack.pop_back();
      comp.push_back(k);
      for (const auto& d : kDirs8) {
        const auto nb = c.neighbor(k, d[0], d[1]);
        if (nb && boundary[*nb] && !seen[*nb]) {
          seen[*nb] = 1;
          stack.push_back(*nb);
        }
      }
    }
    ++out.boundary_components;
    bool in_single = false;
    for (auto i : members_at(comp.front())) {
      const Mask& m = discs_[i].mask();
      if (std::all_of(comp.begin(), comp.end(), [&](NodeIndex k) { return m[k] != 0; })) {
        in_single = true;
        break;
      }
    }
    if (!in_single) out.confined = true;
  }
  return out;
}

bool Cover::check_localized(std::span<const NodeIndex> points) const {
  std::vector<int> hits(discs_.size(), 0);
  for (NodeIndex p : points) {
    if (p >= chart_->size()) throw Error(ErrorCode::invalid_argument, "localization point off the grid");
    for (auto i : members_at(p)) {
      if (++hits[i] > 1) return false;
    }
  }
  return true;
}

std::optional<std::vector<NodeIndex>> Cover::find_localization(int m) const {
  if (m < 1) throw Error(ErrorCode::invalid_argument, "localization size must be at least 1");
  const SurfaceChart& c = *chart_;
  std::vector<std::tuple<std::size_t, double, NodeIndex>> order;
  order.reserve(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) {
    double area = 0.0;
    for (auto i : members_at(k)) area += discs_[i].area();
    order.emplace_back(members_at(k).size(), area, k);
  }
  std::sort(order.begin(), order.end());
  std::vector<std::uint8_t> blocked(discs_.size(), 0);
  std::vector<NodeIndex> points;
  for (const auto& [n, area, k] : order) {
    const auto mem = members_at(k);
    if (std::any_of(mem.begin(), mem.end(), [&](std::uint32_t i) { return blocked[i] != 0; })) {
      continue;
    }
    for (auto i : mem) blocked[i] = 1;
    points.push_back(k);
    if (static_cast<int>(points.size()) == m) return points;
  }
  return std::nullopt;
}

void Cover::declare_localization(std::vector<NodeIndex> points) {
  if (!check_localized(points)) {
    throw Error(ErrorCode::invalid_argument, "declared points are not a localization of the cover");
  }
  localization_ = std::move(points);
}

GeneralPositionReport Cover::check_general_position(double threshold) const {
  const SurfaceChart& c = *chart_;
  struct Near {
    NodeIndex node;
    int disc;
    double g1;
    double g2;
    double offset;  // signed distance to the level set in cells, to first order
  };
  std::vector<Near> near;
  for (std::size_t i = 0; i < discs_.size(); ++i) {
    const auto phi = discs_[i].level();
    for (NodeIndex k = 0; k < c.size(); ++k) {
      const double g1 = d1_at(c, phi, c.i_of(k), c.j_of(k));
      const double g2 = d2_at(c, phi, c.i_of(k), c.j_of(k));
      const double g = std::abs(g1) * c.h1() + std::abs(g2) * c.h2();
      if (g == 0.0) continue;
      const double off = phi[k] / g;
      if (std::abs(off) <= 1.0) near.push_back({k, static_cast<int>(i), g1, g2, off});
    }
  }
  std::stable_sort(near.begin(), near.end(),
                   [](const Near& a, const Near& b) { return a.node < b.node; });

  // Sign pattern of two level fields over the 3x3 block around k: bit
  // 2 * (phi_a < 0) + (phi_b < 0). All four bits mean the boundaries cross.
  auto quadrants = [&](NodeIndex k, int a, int b) {
    const auto pa = discs_[static_cast<std::size_t>(a)].level();
    const auto pb = discs_[static_cast<std::size_t>(b)].level();
    unsigned bits = 0;
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        const auto nb = c.neighbor(k, di, dj);
        if (!nb) continue;
        bits |= 1u << (2 * (pa[*nb] < 0) + (pb[*nb] < 0));
      }
    }
    return bits;
  };

  // Two boundaries meet near a node when their signs cross there, or when
  // they run nearly parallel less than a cell apart (tangency, coincidence).
  // Nearly parallel boundaries further apart are disjoint and ignored.
  struct Meeting {
    bool meets = false;
    double angle = 0.0;
  };
  auto meeting = [&](const Near& x, const Near& y) {
    const double cross = std::abs(x.g1 * y.g2 - x.g2 * y.g1);
    const double s = cross / (std::hypot(x.g1, x.g2) * std::hypot(y.g1, y.g2));
    Meeting m;
    m.angle = std::asin(std::min(1.0, s));
    if (quadrants(x.node, x.disc, y.disc) == 0xF) {
      m.meets = true;
    } else if (m.angle < threshold) {
      const bool same_side = x.g1 * y.g1 + x.g2 * y.g2 > 0;
      const double gap = same_side ? std::abs(x.offset - y.offset) : std::abs(x.offset + y.offset);
      m.meets = gap <= 1.0;
    }
    return m;
  };

  GeneralPositionReport rep;
  rep.threshold = threshold;
  rep.min_angle = std::numbers::pi / 2;
  const std::size_t n = discs_.size();
  std::vector<double> pair_min(n * n, std::numeric_limits<double>::infinity());
  std::vector<NodeIndex> pair_node(n * n, 0);
  for (std::size_t a = 0; a < near.size();) {
    std::size_t b = a;
    while (b < near.size() && near[b].node == near[a].node) ++b;
    std::vector<std::size_t> tight;
    std::vector<std::uint8_t> meets((b - a) * (b - a), 0);
    for (std::size_t p = a; p < b; ++p) {
      if (std::abs(near[p].offset) <= 0.5) tight.push_back(p - a);
      for (std::size_t q = p + 1; q < b; ++q) {
        const Near& x = near[p];
        const Near& y = near[q];
        const Meeting m = meeting(x, y);
        if (!m.meets) continue;
        meets[(p - a) * (b - a) + (q - a)] = meets[(q - a) * (b - a) + (p - a)] = 1;
        const int lo = std::min(x.disc, y.disc);
        const int hi = std::max(x.disc, y.disc);
        if (m.angle < pair_min[lo * n + hi]) {
          pair_min[lo * n + hi] = m.angle;
          pair_node[lo * n + hi] = x.node;
        }
      }
    }
    bool triple = false;
    const std::size_t w = b - a;
    for (std::size_t u = 0; u < tight.size() && !triple; ++u) {
      for (std::size_t v = u + 1; v < tight.size() && !triple; ++v) {
        if (!meets[tight[u] * w + tight[v]]) continue;
        for (std::size_t z = v + 1; z < tight.size() && !triple; ++z) {
          triple = meets[tight[u] * w + tight[z]] && meets[tight[v] * w + tight[z]];
        }
      }
    }
    if (triple) rep.triple_points.push_back(near[a].node);
    a = b;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double ang = pair_min[i * n + j];
      if (!std::isfinite(ang)) continue;
      GeneralPositionReport::Crossing cr{static_cast<int>(i), static_cast<int>(j), ang,
                                         pair_node[i * n + j]};
      rep.crossings.push_back(cr);
      rep.min_angle = std::min(rep.min_angle, ang);
      if (ang < threshold) rep.failures.push_back(cr);
    }
  }
  return rep;
}

// --- enclosure --------------------------------------------------------------

Enclosure enclose_support_in_disc(const ChartPtr& chart, const Mask& component, int rings) {
  const SurfaceChart& c = *chart;
  if (component.size() != c.size()) {
    throw Error(ErrorCode::chart_mismatch, "component mask size mismatch");
  }
  if (rings < 0) throw Error(ErrorCode::invalid_argument, "dilation rings must be nonnegative");
  const auto comps = mask_components(c, component);
  if (comps.size() != 1) {
    throw Error(ErrorCode::invalid_argument, "enclose_support_in_disc expects one connected component");
  }
  if (c.kind() == ChartKind::sphere) {
    for (NodeIndex k = 0; k < c.size(); ++k) {
      if (component[k] && c.in_pole_band(c.j_of(k))) {
        throw Error(ErrorCode::pole_band, "support component meets the pole band");
      }
    }
  }
  if (mask_wraps(c, component)) {
    throw Error(ErrorCode::topology, "support component winds around the surface; no disc contains it");
  }
  Mask grown = dilate(c, component, rings);
  if (mask_wraps(c, grown)) {
    throw Error(ErrorCode::topology, "dilated component closes a non-contractible loop");
  }

  Mask outside(c.size());
  for (NodeIndex k = 0; k < c.size(); ++k) outside[k] = !grown[k];
  Mask filled = grown;
  for (const Mask& hole : mask_components(c, outside)) {
    bool exterior = mask_wraps(c, hole);
    if (!exterior && c.kind() == ChartKind::sphere) {
      for (int i = 0; i < c.n1() && !exterior; ++i) {
        exterior = hole[c.index(i, 0)] || hole[c.index(i, c.n2() - 1)];
      }
    }
    if (exterior) continue;
    for (NodeIndex k = 0; k < c.size(); ++k) filled[k] |= hole[k];
  }

  Enclosure out{Disc::from_mask(chart, std::move(filled)), 0.0, 0.0};
  out.input_area = mask_area(c, component);
  out.margin = out.disc.area() - out.input_area;
  return out;
}

}  // namespace pbsurf
