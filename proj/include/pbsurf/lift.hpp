#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pbsurf/collection.hpp"
#include "pbsurf/cover.hpp"
#include "pbsurf/geometry.hpp"

namespace pbsurf {

enum class CoveringKind { torus_unroll, sphere_square, weierstrass, composite };

const char* to_string(CoveringKind kind);

struct BranchPoint {
  ChartPoint target;
  int local_degree = 1;
  std::vector<ChartPoint> preimages;  // critical points in source coordinates
};

/// A map p from a source chart onto a target chart, finite-to-one and a
/// local diffeomorphism away from its branch points. The source chart carries
/// the pulled-back area form: each node's density is the cell average of
/// |det Dp| * rho_target(p), so p is area preserving sheet by sheet.
class CoveringMap {
 public:
  using PointMap = std::function<ChartPoint(ChartPoint)>;
  using PointDensity = std::function<double(ChartPoint)>;

  /// (x, y) -> (k1 x, k2 y) mod the target periods. The source has the
  /// target's lengths; by default it has k1 n1 x k2 n2 nodes, so every source
  /// node lands on a target node and cells keep their size in target units.
  static CoveringMap torus_unroll(const ChartPtr& target, int k1, int k2, int n1 = 0, int n2 = 0);

  /// w -> w^2 in stereographic coordinates: (theta, z) -> (2 theta, 2z/(1+z^2)).
  static CoveringMap sphere_square(const ChartPtr& target, int n1 = 0, int n2 = 0);

  /// Torus [0,L)^2 -> sphere through q = M(p(z)/e1), M(w) = (1 + i w)/(1 - i w),
  /// then inverse stereographic projection. The branch values p = 0, e1, -e1,
  /// infinity land on the equator at theta = 0, pi/2, 3pi/2, pi.
  static CoveringMap weierstrass(const ChartPtr& target, double side, int n);

  /// outer o inner; inner's target must be outer's source grid.
  static CoveringMap compose(const CoveringMap& outer, const CoveringMap& inner);

  CoveringKind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  const ChartPtr& source() const { return source_; }
  const ChartPtr& target() const { return target_; }
  int degree() const { return degree_; }
  const std::vector<BranchPoint>& branch_points() const { return branch_; }
  /// Deck translation counts (k1, k2) for torus_unroll; (1, 1) otherwise.
  std::pair<int, int> deck() const { return deck_; }

  ChartPoint map(ChartPoint x) const { return map_(x); }
  /// |det Dp| in chart coordinates.
  double jacobian(ChartPoint x) const { return jacobian_(x); }
  /// |det Dp| * rho_target(p(x)), pointwise.
  double pulled_density(ChartPoint x) const;
  /// p at every source node, cached.
  const std::vector<ChartPoint>& node_images() const { return images_; }

 private:
  CoveringMap() = default;
  void finish(const ChartPtr& source_grid, bool constant_density);

  CoveringKind kind_ = CoveringKind::torus_unroll;
  std::string label_;
  ChartPtr source_;
  ChartPtr target_;
  int degree_ = 1;
  std::vector<BranchPoint> branch_;
  std::pair<int, int> deck_{1, 1};
  PointMap map_;
  PointDensity jacobian_;
  std::vector<ChartPoint> images_;
};

/// (p* f)(x') = f(p(x')) by bilinear interpolation.
ScalarField pull_back_field(const CoveringMap& p, const ScalarField& f);

/// All x with p(x) = y, found cell by cell on the source grid and polished
/// by Newton's method; duplicates closer than 1e-6 are merged.
std::vector<ChartPoint> preimages(const CoveringMap& p, ChartPoint y);

/// Source nodes where the pointwise pulled density has a strict local
/// minimum below rel_threshold times its mean.
std::vector<NodeIndex> critical_nodes(const CoveringMap& p, double rel_threshold = 1e-3);

/// Winding number of p around a source point, measured on a circle of the
/// given radius (source chart units).
int local_degree(const CoveringMap& p, ChartPoint x, double radius);

struct LiftedCover {
  Cover cover;
  std::vector<int> parent;        // base disc of each lifted disc
  std::vector<int> sheet_degree;  // degree of p restricted to the lifted disc
};

/// Each disc's preimage split into connected components; every component
/// must itself be a disc.
LiftedCover lift_cover(const CoveringMap& p, const Cover& U);

/// Pulls every field back and splits it by the lifted disc carrying each
/// support component, so each sheet gets its own field.
PositiveCollection lift_collection(const CoveringMap& p, const PositiveCollection& F,
                                   const LiftedCover& lifted);

struct CorrectedForm {
  ChartPtr chart;
  double added_area = 0.0;
  double floor = 0.0;  // min density after correction
  Mask bump_region;    // nodes where the correction is nonzero
};

/// p* omega + eta, eta a smooth bump around every branch preimage, supported
/// where p lands within branch_radius of the branch value and carrying total
/// area epsilon / 2. When F is given, P_F must vanish on the bump region so
/// that the correction leaves every bracket unchanged.
CorrectedForm corrected_area_form(const CoveringMap& p, double branch_radius, double epsilon,
                                  const PositiveCollection* F = nullptr);

/// The same fields and discs on a chart with the same grid but another density.
PositiveCollection rebind(const PositiveCollection& F, const ChartPtr& chart);
Cover rebind(const Cover& U, const ChartPtr& chart);

}  // namespace pbsurf
