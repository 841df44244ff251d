#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbsurf/geometry.hpp"

namespace pbsurf {

/// An open disc U_i on a chart. The level field is negative inside; the mask
/// is the set of interior nodes and is what every combinatorial query uses.
class Disc {
 public:
  /// {x : dist(center, x) < radius} in chart coordinates (minimal image).
  static Disc geometric(const ChartPtr& chart, ChartPoint center, double radius);
  /// {x : level(x) < 0}.
  static Disc implicit(const ChartPtr& chart, std::vector<double> level);
  /// Sphere cap {z > z0} (north = true) or {z < z0}.
  static Disc cap(const ChartPtr& chart, double z0, bool north);
  /// Mask given directly; the level field is a signed distance to its edge.
  static Disc from_mask(const ChartPtr& chart, Mask mask);

  const ChartPtr& chart_ptr() const { return chart_; }
  const SurfaceChart& chart() const { return *chart_; }
  const Mask& mask() const { return mask_; }
  std::span<const double> level() const { return level_; }
  double area() const { return area_; }
  bool contains(NodeIndex k) const { return mask_[k] != 0; }

  /// Recomputed with a different density (same grid).
  Disc on_chart(const ChartPtr& chart) const;

 private:
  Disc(ChartPtr chart, std::vector<double> level, Mask mask);

  ChartPtr chart_;
  std::vector<double> level_;
  Mask mask_;
  double area_ = 0.0;
};

/// V - E + F of the grid complex spanned by a mask (nodes, 4-edges, unit
/// squares). On the sphere a mask holding a whole extreme row is closed off
/// by a virtual pole vertex.
int euler_characteristic(const SurfaceChart& chart, const Mask& mask);

/// True when the 4-connected mask winds around a periodic direction.
bool mask_wraps(const SurfaceChart& chart, const Mask& mask);

/// Throws topology unless mask is nonempty, 4-connected and has chi = 1.
void require_disc_mask(const SurfaceChart& chart, const Mask& mask);

/// Adds every 4-neighbor of the mask, `rings` times.
Mask dilate(const SurfaceChart& chart, const Mask& mask, int rings = 1);

/// Approximate signed distance to the edge of the mask (negative inside).
std::vector<double> signed_distance(const SurfaceChart& chart, const Mask& mask);

struct Confinement {
  bool confined = false;
  bool no_boundary = false;  // the star is the whole surface
  int boundary_components = 0;
};

struct GeneralPositionReport {
  struct Crossing {
    int i = 0;
    int j = 0;
    double min_angle = 0.0;  // radians, in [0, pi/2]
    NodeIndex worst_node = 0;
  };
  double threshold = 1e-2;
  std::vector<Crossing> crossings;     // every pair whose boundaries meet
  std::vector<Crossing> failures;      // crossings below the threshold
  std::vector<NodeIndex> triple_points;
  double min_angle = 0.0;              // over all crossings (pi/2 if none)
  bool pass() const { return failures.empty() && triple_points.empty(); }
};

class Cover {
 public:
  /// Throws invalid_argument if the discs miss a node or live on another grid.
  Cover(ChartPtr chart, std::vector<Disc> discs);

  const ChartPtr& chart_ptr() const { return chart_; }
  const SurfaceChart& chart() const { return *chart_; }
  std::size_t size() const { return discs_.size(); }
  const Disc& disc(std::size_t i) const { return discs_[i]; }
  const std::vector<Disc>& discs() const { return discs_; }

  std::span<const std::uint32_t> members_at(NodeIndex x) const {
    return {members_.data() + offsets_[x], members_.data() + offsets_[x + 1]};
  }
  Mask star_region(NodeIndex x) const;
  double star_area(NodeIndex x) const;

  const std::vector<int>& essential_discs() const { return essential_; }
  bool is_essential(int i) const;
  /// Whether the remaining discs still cover the surface.
  bool covers_without(int i) const;

  Confinement is_confined(NodeIndex x) const;

  bool check_localized(std::span<const NodeIndex> points) const;
  std::optional<std::vector<NodeIndex>> find_localization(int m) const;

  double capacity() const { return capacity_; }
  int degree_bar() const { return degree_bar_; }

  GeneralPositionReport check_general_position(double threshold = 1e-2) const;

  /// Localization points declared with the cover (possibly empty).
  const std::vector<NodeIndex>& declared_localization() const { return localization_; }
  void declare_localization(std::vector<NodeIndex> points);

 private:
  ChartPtr chart_;
  std::vector<Disc> discs_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> members_;
  std::vector<int> essential_;
  double capacity_ = 0.0;
  int degree_bar_ = 0;
  std::vector<NodeIndex> localization_;
};

struct Enclosure {
  Disc disc;
  double input_area = 0.0;
  double margin = 0.0;  // disc area minus input area
};

/// Smallest disc found by dilating the component `rings` times and filling
/// its holes. Throws topology when the component winds around the torus.
Enclosure enclose_support_in_disc(const ChartPtr& chart, const Mask& component,
                                  int rings = 1);

}  // namespace pbsurf
