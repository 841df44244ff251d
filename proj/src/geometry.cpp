#include "pbsurf/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "pbsurf/error.hpp"
#include "pbsurf/parallel.hpp"

namespace pbsurf {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::chart_mismatch: return "chart_mismatch";
    case ErrorCode::pole_band: return "pole_band";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::hypotheses_unmet: return "hypotheses_unmet";
    case ErrorCode::infeasible: return "infeasible";
    case ErrorCode::topology: return "topology";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
  }
  return "unknown";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double positive_mod(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0) r += period;
  if (r >= period) r -= period;
  return r;
}

int wrap_index(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

}  // namespace

// --- SurfaceChart -----------------------------------------------------------

ChartPtr SurfaceChart::torus(int n1, int n2, double length1, double length2,
                             std::optional<double> area) {
  if (n1 < 4 || n2 < 4) {
    throw Error(ErrorCode::invalid_argument, "torus chart needs at least 4x4 nodes");
  }
  if (!(length1 > 0) || !(length2 > 0)) {
    throw Error(ErrorCode::invalid_argument, "torus side lengths must be positive");
  }
  const double a = area.value_or(length1 * length2);
  if (!(a > 0)) throw Error(ErrorCode::invalid_argument, "torus area must be positive");
  auto c = std::shared_ptr<SurfaceChart>(new SurfaceChart());
  c->kind_ = ChartKind::torus;
  c->n1_ = n1;
  c->n2_ = n2;
  c->ranges_ = {0.0, length1, 0.0, length2};
  c->h1_ = length1 / n1;
  c->h2_ = length2 / n2;
  c->declared_area_ = a;
  c->density_.assign(c->size(), a / (length1 * length2));
  return c;
}

ChartPtr SurfaceChart::sphere(int n1, int n2, double pole_band) {
  if (n1 < 4 || n2 < 4) {
    throw Error(ErrorCode::invalid_argument, "sphere chart needs at least 4x4 nodes");
  }
  if (!(pole_band >= 0 && pole_band < 0.5)) {
    throw Error(ErrorCode::invalid_argument, "pole band must lie in [0, 0.5)");
  }
  auto c = std::shared_ptr<SurfaceChart>(new SurfaceChart());
  c->kind_ = ChartKind::sphere;
  c->n1_ = n1;
  c->n2_ = n2;
  c->ranges_ = {0.0, kTwoPi, -1.0, 1.0};
  c->h1_ = kTwoPi / n1;
  c->h2_ = 2.0 / n2;
  c->pole_band_ = pole_band;
  c->declared_area_ = 4.0 * std::numbers::pi;
  c->density_.assign(c->size(), 1.0);
  return c;
}

ChartPtr SurfaceChart::with_density(const SurfaceChart& base,
                                    std::vector<double> density,
                                    std::optional<double> declared_area) {
  if (density.size() != base.size()) {
    throw Error(ErrorCode::invalid_argument, "density size does not match grid");
  }
  for (double r : density) {
    if (!(r > 0) || !std::isfinite(r)) {
      throw Error(ErrorCode::invalid_argument, "area density must be positive and finite");
    }
  }
  auto c = std::shared_ptr<SurfaceChart>(new SurfaceChart(base));
  c->density_ = std::move(density);
  c->declared_area_ = declared_area.value_or(
      integrate_values(*c, std::vector<double>(c->size(), 1.0)));
  return c;
}

double SurfaceChart::v_of(int j) const {
  if (kind_ == ChartKind::sphere) return ranges_[2] + (j + 0.5) * h2_;
  return ranges_[2] + j * h2_;
}

std::optional<NodeIndex> SurfaceChart::neighbor(NodeIndex k, int di, int dj) const {
  const int i = wrap_index(i_of(k) + di, n1_);
  int j = j_of(k) + dj;
  if (periodic2()) {
    j = wrap_index(j, n2_);
  } else if (j < 0 || j >= n2_) {
    return std::nullopt;
  }
  return index(i, j);
}

ChartPoint SurfaceChart::wrap(ChartPoint p) const {
  p.u = ranges_[0] + positive_mod(p.u - ranges_[0], length1());
  if (periodic2()) {
    p.v = ranges_[2] + positive_mod(p.v - ranges_[2], length2());
  } else {
    p.v = std::clamp(p.v, ranges_[2], ranges_[3]);
  }
  return p;
}

ChartPoint SurfaceChart::displacement(ChartPoint from, ChartPoint to) const {
  auto min_image = [](double d, double period) {
    d = std::fmod(d, period);
    if (d > 0.5 * period) d -= period;
    if (d < -0.5 * period) d += period;
    return d;
  };
  ChartPoint d{min_image(to.u - from.u, length1()), to.v - from.v};
  if (periodic2()) d.v = min_image(d.v, length2());
  return d;
}

double SurfaceChart::distance(ChartPoint a, ChartPoint b) const {
  const ChartPoint d = displacement(a, b);
  return std::hypot(d.u, d.v);
}

NodeIndex SurfaceChart::nearest_node(ChartPoint p) const {
  p = wrap(p);
  int i = wrap_index(static_cast<int>(std::lround((p.u - ranges_[0]) / h1_)), n1_);
  int j;
  if (kind_ == ChartKind::sphere) {
    j = std::clamp(static_cast<int>(std::floor((p.v - ranges_[2]) / h2_)), 0, n2_ - 1);
  } else {
    j = wrap_index(static_cast<int>(std::lround((p.v - ranges_[2]) / h2_)), n2_);
  }
  return index(i, j);
}

bool SurfaceChart::in_pole_band(int j) const {
  if (kind_ != ChartKind::sphere) return false;
  return std::abs(v_of(j)) > 1.0 - pole_band_;
}

bool SurfaceChart::same_grid(const SurfaceChart& o) const {
  return kind_ == o.kind_ && n1_ == o.n1_ && n2_ == o.n2_ && ranges_ == o.ranges_;
}

bool SurfaceChart::same_as(const SurfaceChart& o) const {
  if (this == &o) return true;
  return same_grid(o) && density_ == o.density_;
}

double SurfaceChart::total_area() const {
  return integrate_values(*this, std::vector<double>(size(), 1.0));
}

// --- ScalarField ------------------------------------------------------------

ScalarField::ScalarField(ChartPtr chart)
    : chart_(std::move(chart)),
      values_(chart_->size(), 0.0),
      support_(chart_->size(), 0) {}

ScalarField::ScalarField(ChartPtr chart, std::vector<double> values)
    : chart_(std::move(chart)), values_(std::move(values)) {
  if (values_.size() != chart_->size()) {
    throw Error(ErrorCode::invalid_argument, "field size does not match chart");
  }
  support_.resize(values_.size());
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw Error(ErrorCode::invalid_argument, "field has a non-finite sample");
    }
    support_[k] = values_[k] != 0.0;
  }
}

ScalarField::ScalarField(ChartPtr chart, std::vector<double> values, Mask support)
    : chart_(std::move(chart)), values_(std::move(values)), support_(std::move(support)) {
  if (values_.size() != chart_->size() || support_.size() != chart_->size()) {
    throw Error(ErrorCode::invalid_argument, "field size does not match chart");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw Error(ErrorCode::invalid_argument, "field has a non-finite sample");
    }
    if (!support_[k] && values_[k] != 0.0) {
      throw Error(ErrorCode::invalid_argument, "field is nonzero outside its support mask");
    }
  }
}

ScalarField ScalarField::constant(ChartPtr chart, double c) {
  const std::size_t n = chart->size();
  return ScalarField(std::move(chart), std::vector<double>(n, c), Mask(n, 1));
}

// --- checks -----------------------------------------------------------------

void require_same_chart(const SurfaceChart& a, const SurfaceChart& b,
                        const char* context) {
  if (!a.same_as(b)) {
    throw Error(ErrorCode::chart_mismatch, std::string(context) + ": fields live on different charts");
  }
}

void check_pole_band(const ScalarField& f) {
  const SurfaceChart& c = f.chart();
  if (c.kind() != ChartKind::sphere) return;
  const auto v = f.values();
  double scale = 1.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  const double tol = 1e-12 * scale;
  for (int j = 0; j < c.n2(); ++j) {
    if (!c.in_pole_band(j)) continue;
    const double ref = v[c.index(0, j)];
    for (int i = 1; i < c.n1(); ++i) {
      if (std::abs(v[c.index(i, j)] - ref) > tol) {
        throw Error(ErrorCode::pole_band,
                    "sphere field depends on theta inside the pole band at z = " +
                        std::to_string(c.v_of(j)));
      }
    }
  }
}

// --- differentiation --------------------------------------------------------

double d1_at(const SurfaceChart& c, std::span<const double> f, int i, int j) {
  const int n1 = c.n1();
  const int ip = i + 1 == n1 ? 0 : i + 1;
  const int im = i == 0 ? n1 - 1 : i - 1;
  return (f[c.index(ip, j)] - f[c.index(im, j)]) / (2.0 * c.h1());
}

double d2_at(const SurfaceChart& c, std::span<const double> f, int i, int j) {
  const int n2 = c.n2();
  const NodeIndex row = static_cast<NodeIndex>(i) * n2;
  if (c.periodic2()) {
    const int jp = j + 1 == n2 ? 0 : j + 1;
    const int jm = j == 0 ? n2 - 1 : j - 1;
    return (f[row + jp] - f[row + jm]) / (2.0 * c.h2());
  }
  if (j == 0) {
    return (-3.0 * f[row] + 4.0 * f[row + 1] - f[row + 2]) / (2.0 * c.h2());
  }
  if (j == n2 - 1) {
    return (3.0 * f[row + j] - 4.0 * f[row + j - 1] + f[row + j - 2]) / (2.0 * c.h2());
  }
  return (f[row + j + 1] - f[row + j - 1]) / (2.0 * c.h2());
}

std::vector<double> derivative1(const SurfaceChart& c, std::span<const double> f) {
  std::vector<double> out(c.size());
  parallel_for(c.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) out[k] = d1_at(c, f, c.i_of(k), c.j_of(k));
  });
  return out;
}

std::vector<double> derivative2(const SurfaceChart& c, std::span<const double> f) {
  std::vector<double> out(c.size());
  parallel_for(c.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) out[k] = d2_at(c, f, c.i_of(k), c.j_of(k));
  });
  return out;
}

void add_derivative1_transpose(const SurfaceChart& c, std::span<const double> a,
                               std::span<double> out) {
  // D1 is periodic and antisymmetric, so D1^T a = -D1 a.
  const int n1 = c.n1();
  for (int i = 0; i < n1; ++i) {
    const int ip = i + 1 == n1 ? 0 : i + 1;
    const int im = i == 0 ? n1 - 1 : i - 1;
    for (int j = 0; j < c.n2(); ++j) {
      out[c.index(i, j)] -= (a[c.index(ip, j)] - a[c.index(im, j)]) / (2.0 * c.h1());
    }
  }
}

void add_derivative2_transpose(const SurfaceChart& c, std::span<const double> a,
                               std::span<double> out) {
  const int n2 = c.n2();
  const double s = 1.0 / (2.0 * c.h2());
  for (int i = 0; i < c.n1(); ++i) {
    const NodeIndex row = static_cast<NodeIndex>(i) * n2;
    for (int j = 0; j < n2; ++j) {
      const double aj = a[row + j] * s;
      if (c.periodic2()) {
        out[row + (j + 1 == n2 ? 0 : j + 1)] += aj;
        out[row + (j == 0 ? n2 - 1 : j - 1)] -= aj;
      } else if (j == 0) {
        out[row] -= 3.0 * aj;
        out[row + 1] += 4.0 * aj;
        out[row + 2] -= aj;
      } else if (j == n2 - 1) {
        out[row + j] += 3.0 * aj;
        out[row + j - 1] -= 4.0 * aj;
        out[row + j - 2] += aj;
      } else {
        out[row + j + 1] += aj;
        out[row + j - 1] -= aj;
      }
    }
  }
}

// --- brackets and quadrature ------------------------------------------------

void bracket_values(const SurfaceChart& c, std::span<const double> f,
                    std::span<const double> g, std::span<double> out) {
  parallel_for(c.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const int i = c.i_of(k);
      const int j = c.j_of(k);
      const double f1 = d1_at(c, f, i, j);
      const double f2 = d2_at(c, f, i, j);
      const double g1 = d1_at(c, g, i, j);
      const double g2 = d2_at(c, g, i, j);
      out[k] = (f1 * g2 - f2 * g1) / c.density(k);
    }
  });
}

ScalarField poisson_bracket(const ScalarField& f, const ScalarField& g) {
  require_same_chart(f.chart(), g.chart(), "poisson_bracket");
  check_pole_band(f);
  check_pole_band(g);
  const SurfaceChart& c = f.chart();
  std::vector<double> out(c.size());
  bracket_values(c, f.values(), g.values(), out);
  // The bracket is supported in supp f ∩ supp g, widened by the stencil.
  Mask support(c.size(), 0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k] != 0.0) support[k] = 1;
  }
  return ScalarField(f.chart_ptr(), std::move(out), std::move(support));
}

double pairwise_sum(std::span<const double> xs) {
  constexpr std::size_t kBlock = 16;
  if (xs.size() <= kBlock) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double integrate_values(const SurfaceChart& c, std::span<const double> v) {
  std::vector<double> w(c.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = v[k] * c.density(k);
  return pairwise_sum(w) * c.cell_area();
}

double integrate(const ScalarField& f) { return integrate_values(f.chart(), f.values()); }

double integrate_over(const ScalarField& f, const Mask& region) {
  const SurfaceChart& c = f.chart();
  if (region.size() != c.size()) {
    throw Error(ErrorCode::chart_mismatch, "integrate_over: region mask size mismatch");
  }
  std::vector<double> w(c.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = region[k] ? f[k] * c.density(k) : 0.0;
  }
  return pairwise_sum(w) * c.cell_area();
}

double sup_norm(const ScalarField& f) {
  double m = 0.0;
  for (double x : f.values()) m = std::max(m, std::abs(x));
  return m;
}

// --- interpolation ----------------------------------------------------------

namespace {

// Grid coordinates within 1e-9 cells of a node snap to it, so points that are
// nodes up to rounding reproduce the node value exactly.
double snap(double s) {
  const double r = std::nearbyint(s);
  return std::abs(s - r) < 1e-9 ? r : s;
}

}  // namespace

double interpolate(const SurfaceChart& c, std::span<const double> values, ChartPoint p) {
  const double s = snap((p.u - c.ranges()[0]) / c.h1());
  const double fs = std::floor(s);
  const double a = s - fs;
  const int i0 = wrap_index(static_cast<int>(fs), c.n1());
  const int i1 = i0 + 1 == c.n1() ? 0 : i0 + 1;

  int j0;
  int j1;
  double b;
  if (c.periodic2()) {
    const double t = snap((p.v - c.ranges()[2]) / c.h2());
    const double ft = std::floor(t);
    b = t - ft;
    j0 = wrap_index(static_cast<int>(ft), c.n2());
    j1 = j0 + 1 == c.n2() ? 0 : j0 + 1;
  } else {
    // Node j sits at t = j in these units; clamp the cell index so points
    // past the outer rows extrapolate from the last two rows.
    const double t = snap((p.v - c.ranges()[2]) / c.h2() - 0.5);
    j0 = std::clamp(static_cast<int>(std::floor(t)), 0, c.n2() - 2);
    j1 = j0 + 1;
    b = t - j0;
  }
  const double f00 = values[c.index(i0, j0)];
  const double f10 = values[c.index(i1, j0)];
  const double f01 = values[c.index(i0, j1)];
  const double f11 = values[c.index(i1, j1)];
  const double lo = f00 + a * (f10 - f00);
  const double hi = f01 + a * (f11 - f01);
  return lo + b * (hi - lo);
}

// --- field dumps ------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) {
    throw Error(ErrorCode::io, "field dump truncated");
  }
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_field_dump(const ScalarField& f) {
  const SurfaceChart& c = f.chart();
  std::vector<std::uint8_t> out{'P', 'B', 'S', 'F'};
  out.reserve(4 + 4 + 1 + 8 + 32 + 8 * f.size());
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(c.kind()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.n1()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.n2()));
  for (double r : c.ranges()) put_le<double>(out, r);
  for (double v : f.values()) put_le<double>(out, v);
  return out;
}

FieldDump decode_field_dump(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), "PBSF", 4) != 0) {
    throw Error(ErrorCode::io, "not a field dump (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(in, pos);
  if (version != 1) {
    throw Error(ErrorCode::io, "unsupported field dump version " + std::to_string(version));
  }
  FieldDump d;
  const auto kind = get_le<std::uint8_t>(in, pos);
  if (kind > 1) throw Error(ErrorCode::io, "unknown chart kind in field dump");
  d.kind = static_cast<ChartKind>(kind);
  d.n1 = get_le<std::uint32_t>(in, pos);
  d.n2 = get_le<std::uint32_t>(in, pos);
  for (double& r : d.ranges) r = get_le<double>(in, pos);
  const std::size_t n = static_cast<std::size_t>(d.n1) * d.n2;
  if (in.size() - pos != n * sizeof(double)) {
    throw Error(ErrorCode::io, "field dump payload size does not match its header");
  }
  d.values.resize(n);
  for (double& v : d.values) v = get_le<double>(in, pos);
  return d;
}

void write_field_dump(const std::string& path, const ScalarField& f) {
  const auto bytes = encode_field_dump(f);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::io, "failed writing " + path);
}

FieldDump read_field_dump(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::io, "cannot open field dump " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return decode_field_dump(bytes);
}

ScalarField field_from_dump(ChartPtr chart, const FieldDump& d) {
  if (d.kind != chart->kind() || static_cast<int>(d.n1) != chart->n1() ||
      static_cast<int>(d.n2) != chart->n2() || d.ranges != chart->ranges()) {
    throw Error(ErrorCode::chart_mismatch, "field dump header does not match the chart");
  }
  return ScalarField(std::move(chart), d.values);
}

}  // namespace pbsurf
