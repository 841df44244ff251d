#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "pbsurf/cover.hpp"
#include "pbsurf/geometry.hpp"

namespace pbsurf {

enum class CollectionMode { positive, partition };

const char* to_string(CollectionMode mode);

/// Nonnegative fields f_1..f_N, each assigned to a disc of some cover
/// (disc index -1 marks a field with no single subordinate disc, as produced
/// by condensing fields of different discs).
class PositiveCollection {
 public:
  PositiveCollection(ChartPtr chart, std::vector<ScalarField> fields,
                     std::vector<int> disc_of, CollectionMode mode);

  const ChartPtr& chart_ptr() const { return chart_; }
  const SurfaceChart& chart() const { return *chart_; }
  std::size_t size() const { return fields_.size(); }
  const ScalarField& field(std::size_t i) const { return fields_[i]; }
  const std::vector<ScalarField>& fields() const { return fields_; }
  int disc_of(std::size_t i) const { return disc_of_[i]; }
  const std::vector<int>& disc_map() const { return disc_of_; }
  CollectionMode mode() const { return mode_; }

  /// S_F = sum of the fields.
  const ScalarField& sum() const { return sum_; }
  /// P_F, computed on first use.
  const ScalarField& pb() const;

  /// Pointwise division by S_F; the result is in partition mode.
  PositiveCollection normalized() const;

 private:
  struct Cache {
    std::once_flag once;
    std::unique_ptr<ScalarField> pb;
  };

  ChartPtr chart_;
  std::vector<ScalarField> fields_;
  std::vector<int> disc_of_;
  CollectionMode mode_;
  ScalarField sum_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

struct ValidationItem {
  std::string name;
  bool pass = true;
  double worst = 0.0;
  int field = -1;
  NodeIndex node = 0;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool pass() const;
  const ValidationItem* find(const std::string& name) const;
};

/// Nonnegativity, strict subordination (a one-node margin inside the disc)
/// and the S_F condition of the collection's mode.
ValidationReport validate(const PositiveCollection& F, const Cover& U);

/// P_F = sum over ordered pairs of |{f_i, f_j}|.
ScalarField pb_function(const PositiveCollection& F);

/// P_{F,G} = sum over i, j of |{f_i, g_j}|.
ScalarField pb_pair_function(const PositiveCollection& F, const PositiveCollection& G);

/// sum over all i and j in js of |{f_i, f_j}|.
std::vector<double> bracket_column_sum(const PositiveCollection& F, const std::vector<int>& js);

/// f'_j = sum of f_i over c(i) = j; c must map onto {0..M-1}.
PositiveCollection condense(const PositiveCollection& F, const std::vector<int>& c);

/// Splits each field along its support components. Components whose
/// derivative stencils touch a common node stay together, so P is preserved
/// exactly on the grid.
PositiveCollection fragment(const PositiveCollection& F);

enum class PbMethod { exact, sandwich };

struct PbBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// pb(F) = max over a, b in [-1,1]^N of |{a.F, b.F}|_sup. The exact method
/// enumerates sign vectors (N <= 14); sandwich gives max_ij |{f_i,f_j}| and
/// |P_F|.
PbBounds pb_invariant(const PositiveCollection& F, PbMethod method);

inline constexpr std::size_t kPbExactMaxFields = 14;

}  // namespace pbsurf
