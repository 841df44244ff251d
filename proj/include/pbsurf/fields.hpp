#pragma once

#include <functional>
#include <vector>

#include "pbsurf/geometry.hpp"

namespace pbsurf {

/// Monotone transition s: [0,1] -> [0,1] with s = 0 for t <= 0, s = 1 for
/// t >= 1 and vanishing slope at both plateau joins.
///
///   smoothstep  classic Hermite smoothstep of odd degree 2k+1
///   poly_bump   1 - (1 - t^2)^m, degree 2m
///   table       monotone cubic (Fritsch-Carlson) through (t_k, v_k)
class Profile {
 public:
  enum class Kind { poly_bump, smoothstep, table };

  static Profile smoothstep(int degree = 5);
  static Profile poly_bump(int degree = 4);
  static Profile table(std::vector<double> knots, std::vector<double> values);

  Kind kind() const { return kind_; }
  int degree() const { return degree_; }

  double step(double t) const;
  double slope(double t) const;

  /// Radial bump: 1 for r <= r_in, 0 for r >= r_out.
  double bump(double r, double r_in, double r_out) const {
    return 1.0 - step((r - r_in) / (r_out - r_in));
  }

 private:
  Kind kind_ = Kind::smoothstep;
  int degree_ = 5;
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> slopes_;
  std::vector<double> coeffs_;
};

/// Samples fn(u, v) at every node.
ScalarField sample_field(const ChartPtr& chart,
                         const std::function<double(double, double)>& fn);

ScalarField bump_disc(const ChartPtr& chart, ChartPoint center, double r_inner,
                      double r_outer, const Profile& profile = Profile::smoothstep());

/// Separable convolution with the normalized kernel (1 - (s/w)^2)^2 on |s| < w.
/// Width is in chart units and must span at least two cells along each axis.
/// On the sphere the kernel is renormalized where it is cut by z = +-1.
ScalarField mollify(const ScalarField& f, double width);

struct FlattenReport {
  double core_radius = 0.0;     // radius of the constant region actually produced
  double mollify_width = 0.0;
  double max_radial_slope = 0.0;  // sup of the radial map's derivative
};

/// Makes f exactly constant (= f(center)) on the radius-sigma disc and leaves
/// it untouched outside radius delta. Inside, f is pulled back by a radial
/// retraction, mollified with width mollify_width (0 picks two cells), and
/// blended back into f.
ScalarField flatten_on_disc(const ScalarField& f, ChartPoint center, double sigma,
                            double delta, double mollify_width = 0.0,
                            FlattenReport* report = nullptr);

/// max over nodes of |{f_after, g}| - |{f_before, g}|.
double bracket_excess(const ScalarField& before, const ScalarField& after,
                      const ScalarField& g);

/// 4-connected components of a mask with periodic wrap, ordered by their
/// smallest node index.
std::vector<Mask> mask_components(const SurfaceChart& chart, const Mask& mask);

inline std::vector<Mask> support_components(const ScalarField& f) {
  return mask_components(f.chart(), f.support());
}

}  // namespace pbsurf
