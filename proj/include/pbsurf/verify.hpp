#pragma once

#include <string>
#include <vector>

#include "pbsurf/collection.hpp"
#include "pbsurf/cover.hpp"
#include "pbsurf/geometry.hpp"

namespace pbsurf {

enum class MeasureKind { area_form, dirac_sum, custom };

const char* to_string(MeasureKind kind);

/// A finite measure on the nodes of a chart. Every measure is stored as a
/// per-node weight vector so that mu(A) is a plain masked sum.
class Measure {
 public:
  /// omega restricted to the grid; normalized divides by the total area.
  static Measure area_form(const ChartPtr& chart, bool normalized = true);
  /// Sum of point masses. Empty weights mean unit weights.
  static Measure dirac_sum(const ChartPtr& chart, std::vector<NodeIndex> points,
                           std::vector<double> weights = {});
  /// density * omega for a nonnegative density.
  static Measure custom(const ScalarField& density, bool normalized = true);

  MeasureKind kind() const { return kind_; }
  bool normalized() const { return normalized_; }
  const SurfaceChart& chart() const { return *chart_; }
  const std::vector<double>& weights() const { return weights_; }
  /// Nodes with positive weight, ascending.
  const std::vector<NodeIndex>& support() const { return support_; }

  double total() const;
  double of(const Mask& region) const;

 private:
  Measure(ChartPtr chart, MeasureKind kind, bool normalized, std::vector<double> weights);

  ChartPtr chart_;
  MeasureKind kind_;
  bool normalized_;
  std::vector<double> weights_;
  std::vector<NodeIndex> support_;
};

struct CheckReport {
  std::string check;
  double value = 0.0;
  double bound = 0.0;
  double margin = 0.0;     // value - bound
  double tolerance = 0.0;  // absolute, = relative tolerance * |bound|
  bool pass = false;       // margin >= -tolerance
  std::string provenance;
};

CheckReport make_report(std::string check, double value, double bound, double rel_tol,
                        std::string provenance);

/// Everything the inequalities assume about (U, F), evaluated once so that
/// repeated checks on the same data do not redo the expensive parts.
struct Hypotheses {
  bool collection_valid = false;  // nonnegative, subordinate, S_F >= 1
  bool discs_only = false;        // every field is assigned to a disc
  bool general_position = false;
  bool genus_positive = false;    // torus chart
  bool localized3 = false;        // declared localization with >= 3 points, verified
  std::string summary;            // first unmet item, empty when all hold

  bool base() const { return collection_valid && discs_only && general_position; }
};

Hypotheses assess_hypotheses(const Cover& U, const PositiveCollection& F);

struct VerifyOptions {
  double tolerance = 0.05;
  const Hypotheses* hypotheses = nullptr;  // computed on demand when null
};

/// Disc j is confined-essential when some node lies in U_j alone and the star
/// of that node (which is U_j) is confined.
struct DiscClass {
  bool essential = false;
  bool confined = false;
  NodeIndex witness = 0;
};
DiscClass classify_disc(const Cover& U, int j);
std::vector<int> confined_essential_discs(const Cover& U);

/// Integral over U_j of sum_i |{f_i, f_j}|, summed over the fields assigned
/// to U_j; bound 1.
CheckReport check_confined_essential(const Cover& U, const PositiveCollection& F, int j,
                                     const VerifyOptions& opt = {});

/// Integral over the star of x of sum_i sum_{j in U_x} |{f_i, f_j}|. The bound
/// is 1 on the torus, 1 on the sphere when the star is confined or x is a
/// declared localization point, 1/4 on a 3-localized sphere otherwise.
CheckReport check_star(const Cover& U, const PositiveCollection& F, NodeIndex x,
                       const VerifyOptions& opt = {});

/// The star constant C(x) that check_star would use; throws hypotheses_unmet
/// where none applies.
double star_constant(const Cover& U, NodeIndex x, const Hypotheses& h);

/// Integral of P_F against the bound mu(M) / max_i mu(U_i).
CheckReport check_pb_bound(const Cover& U, const PositiveCollection& F, const Measure& mu,
                           const VerifyOptions& opt = {});

/// Integral of P_F against the earlier Area / (2 c(U)) lower bound.
CheckReport check_half_capacity_bound(const Cover& U, const PositiveCollection& F,
                                      const VerifyOptions& opt = {});

/// Integral of P_F against the number of confined-essential discs.
CheckReport check_essential_count(const Cover& U, const PositiveCollection& F,
                                  const VerifyOptions& opt = {});

/// Partition mode only: integral of P_F over U_j, bound 2.
CheckReport check_partition_refinement(const Cover& U, const PositiveCollection& F, int j,
                                       const VerifyOptions& opt = {});

/// Partition mode only: integral of P_F over M against 2 J for the given
/// pairwise disjoint confined-essential discs.
CheckReport check_partition_disjoint(const Cover& U, const PositiveCollection& F,
                                     const std::vector<int>& discs, const VerifyOptions& opt = {});

struct AveragingReport {
  double mu_c = 0.0;        // integral of C(x) d mu
  double mu_u = 0.0;        // max_i mu(U_i)
  double fubini_lhs = 0.0;  // integral of the star values d mu
  double fubini_rhs = 0.0;  // sum_j mu(U_j) * integral of sum_i |{f_i, f_j}|
  double pb_integral = 0.0;
  double lower = 0.0;       // mu_c / mu_u
  bool chain_holds = false;  // lower <= pb_integral within tolerance
};

/// C(x) is taken as 0 wherever no case of the star inequality applies, so
/// the report exists for every input.
AveragingReport averaging_report(const Cover& U, const PositiveCollection& F, const Measure& mu,
                                 const VerifyOptions& opt = {});

}  // namespace pbsurf
