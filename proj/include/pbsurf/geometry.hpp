#pragma once

// Discretized closed surfaces: flat tori and the sphere in cylindrical
// coordinates (theta, z). Area forms are stored as a per-node density rho so
// that omega = rho * du ^ dv in chart coordinates.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pbsurf {

using Mask = std::vector<std::uint8_t>;
using NodeIndex = std::size_t;

enum class ChartKind : std::uint8_t { torus = 0, sphere = 1 };

/// Chart coordinates: (x, y) on a torus, (theta, z) on the sphere.
struct ChartPoint {
  double u = 0.0;
  double v = 0.0;
};

class SurfaceChart;
using ChartPtr = std::shared_ptr<const SurfaceChart>;

class SurfaceChart {
 public:
  /// Flat torus [0,L1) x [0,L2) with constant density area / (L1 L2).
  static ChartPtr torus(int n1, int n2, double length1 = 1.0,
                        double length2 = 1.0,
                        std::optional<double> area = std::nullopt);

  /// Round unit sphere, theta periodic and z in [-1,1]. Nodes in z are cell
  /// centred, z_j = -1 + (j + 1/2) h2, so the density-1 form has area 4 pi.
  static ChartPtr sphere(int n1, int n2, double pole_band = 0.05);

  /// Same grid as base with a replacement density (corrected area forms).
  static ChartPtr with_density(const SurfaceChart& base,
                               std::vector<double> density,
                               std::optional<double> declared_area = std::nullopt);

  ChartKind kind() const { return kind_; }
  int n1() const { return n1_; }
  int n2() const { return n2_; }
  std::size_t size() const { return static_cast<std::size_t>(n1_) * n2_; }
  double h1() const { return h1_; }
  double h2() const { return h2_; }
  double cell_area() const { return h1_ * h2_; }
  /// lo1, hi1, lo2, hi2.
  const std::array<double, 4>& ranges() const { return ranges_; }
  double length1() const { return ranges_[1] - ranges_[0]; }
  double length2() const { return ranges_[3] - ranges_[2]; }
  double pole_band() const { return pole_band_; }
  double declared_area() const { return declared_area_; }
  std::span<const double> density() const { return density_; }
  double density(NodeIndex k) const { return density_[k]; }

  bool periodic2() const { return kind_ == ChartKind::torus; }

  NodeIndex index(int i, int j) const {
    return static_cast<NodeIndex>(i) * n2_ + static_cast<NodeIndex>(j);
  }
  int i_of(NodeIndex k) const { return static_cast<int>(k / n2_); }
  int j_of(NodeIndex k) const { return static_cast<int>(k % n2_); }
  double u_of(int i) const { return ranges_[0] + i * h1_; }
  double v_of(int j) const;
  ChartPoint point(NodeIndex k) const { return {u_of(i_of(k)), v_of(j_of(k))}; }

  /// Neighbor (i+di, j+dj) with periodic wrap; nullopt past the sphere's
  /// z boundary.
  std::optional<NodeIndex> neighbor(NodeIndex k, int di, int dj) const;

  /// Reduces periodic coordinates into range; clamps z on the sphere.
  ChartPoint wrap(ChartPoint p) const;
  /// Minimal-image displacement to - from.
  ChartPoint displacement(ChartPoint from, ChartPoint to) const;
  double distance(ChartPoint a, ChartPoint b) const;
  NodeIndex nearest_node(ChartPoint p) const;

  bool in_pole_band(int j) const;

  /// Same kind, resolution and coordinate ranges.
  bool same_grid(const SurfaceChart& other) const;
  /// same_grid and bitwise-equal densities.
  bool same_as(const SurfaceChart& other) const;

  /// Sum of rho h1 h2 over all nodes (pairwise summation).
  double total_area() const;

 private:
  SurfaceChart() = default;

  ChartKind kind_ = ChartKind::torus;
  int n1_ = 0;
  int n2_ = 0;
  double h1_ = 0.0;
  double h2_ = 0.0;
  std::array<double, 4> ranges_{};
  double pole_band_ = 0.0;
  double declared_area_ = 0.0;
  std::vector<double> density_;
};

/// Grid-sampled function with an explicit support mask. Samples vanish
/// wherever the mask is false, and are finite everywhere.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(ChartPtr chart);
  /// Support inferred as the nonzero set.
  ScalarField(ChartPtr chart, std::vector<double> values);
  ScalarField(ChartPtr chart, std::vector<double> values, Mask support);

  const ChartPtr& chart_ptr() const { return chart_; }
  const SurfaceChart& chart() const { return *chart_; }
  std::size_t size() const { return values_.size(); }
  double operator[](NodeIndex k) const { return values_[k]; }
  std::span<const double> values() const { return values_; }
  const Mask& support() const { return support_; }

  /// Constant field with full support.
  static ScalarField constant(ChartPtr chart, double c);

 private:
  ChartPtr chart_;
  std::vector<double> values_;
  Mask support_;
};

/// Throws chart_mismatch unless both fields live on the same chart.
void require_same_chart(const SurfaceChart& a, const SurfaceChart& b,
                        const char* context);

/// Throws pole_band if a sphere field varies in theta on a pole-band row.
void check_pole_band(const ScalarField& f);

/// {f,g} = (d1 f d2 g - d2 f d1 g) / rho with second-order differences.
ScalarField poisson_bracket(const ScalarField& f, const ScalarField& g);

/// Bracket samples only, without the pole-band check (callers that have
/// already validated their inputs).
void bracket_values(const SurfaceChart& chart, std::span<const double> f,
                    std::span<const double> g, std::span<double> out);

double integrate(const ScalarField& f);
double integrate_over(const ScalarField& f, const Mask& region);
double sup_norm(const ScalarField& f);

/// Deterministic tree summation.
double pairwise_sum(std::span<const double> xs);

/// Integral of raw samples against the chart density.
double integrate_values(const SurfaceChart& chart, std::span<const double> v);

// Finite-difference derivatives in chart coordinates.
double d1_at(const SurfaceChart& c, std::span<const double> f, int i, int j);
double d2_at(const SurfaceChart& c, std::span<const double> f, int i, int j);
std::vector<double> derivative1(const SurfaceChart& c, std::span<const double> f);
std::vector<double> derivative2(const SurfaceChart& c, std::span<const double> f);
/// out += D1^T a, out += D2^T a (adjoints of the difference operators).
void add_derivative1_transpose(const SurfaceChart& c, std::span<const double> a,
                               std::span<double> out);
void add_derivative2_transpose(const SurfaceChart& c, std::span<const double> a,
                               std::span<double> out);

/// Calls fn(node) for every node read by the derivative stencils at k.
template <typename Fn>
void for_each_stencil_node(const SurfaceChart& c, NodeIndex k, Fn&& fn);

/// Bilinear interpolation with periodic wrap; on the sphere, values beyond
/// the outermost z rows are extrapolated linearly.
double interpolate(const SurfaceChart& c, std::span<const double> values,
                   ChartPoint p);

// Field dump: "PBSF", u32 version, u8 kind, u32 n1, u32 n2, f64 ranges[4],
// then n1*n2 little-endian f64 samples in row-major (i, j) order.
struct FieldDump {
  ChartKind kind = ChartKind::torus;
  std::uint32_t n1 = 0;
  std::uint32_t n2 = 0;
  std::array<double, 4> ranges{};
  std::vector<double> values;
};

void write_field_dump(const std::string& path, const ScalarField& f);
std::vector<std::uint8_t> encode_field_dump(const ScalarField& f);
FieldDump decode_field_dump(std::span<const std::uint8_t> bytes);
FieldDump read_field_dump(const std::string& path);
ScalarField field_from_dump(ChartPtr chart, const FieldDump& dump);

// ---------------------------------------------------------------------------

template <typename Fn>
void for_each_stencil_node(const SurfaceChart& c, NodeIndex k, Fn&& fn) {
  fn(k);
  for (int s : {-1, 1}) {
    if (auto nb = c.neighbor(k, s, 0)) fn(*nb);
  }
  const int j = c.j_of(k);
  if (c.periodic2() || (j > 0 && j + 1 < c.n2())) {
    for (int s : {-1, 1}) {
      if (auto nb = c.neighbor(k, 0, s)) fn(*nb);
    }
  } else {
    const int dir = j == 0 ? 1 : -1;
    for (int s : {1, 2}) {
      if (auto nb = c.neighbor(k, 0, dir * s)) fn(*nb);
    }
  }
}

}  // namespace pbsurf
