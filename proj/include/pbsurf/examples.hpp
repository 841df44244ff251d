#pragma once

#include <cstdint>

#include "pbsurf/collection.hpp"
#include "pbsurf/cover.hpp"
#include "pbsurf/fields.hpp"

namespace pbsurf {

struct CoverAndCollection {
  Cover cover;
  PositiveCollection collection;
};

/// Sphere caps U_n = {z > -1/2}, U_s = {z < 1/2} with the z-only partition
/// f_n = s((z + 0.4) / 0.8), f_s = 1 - f_n.
CoverAndCollection two_cap_partition(int n1, int n2);

/// The same caps with a theta-dependent positive collection: field i is
/// multiplied by 1 + amplitude sin(theta + i) 4 f_n f_s, which vanishes
/// wherever either z-only field does.
CoverAndCollection two_cap_wavy(int n1, int n2, double amplitude);

/// k x k lattice of discs on the unit torus with one radial bump per disc.
/// Plateaus overlap so S_F >= 1; jitter moves centres and radii.
struct TorusBumpParams {
  int n = 128;
  int per_side = 4;
  double jitter = 0.0;
  double ramp = 0.05;        // width of the bump's transition annulus
  double amplitude_spread = 0.0;  // fields scaled by 1 + spread * U(-1,1)
  std::uint64_t seed = 1;
  CollectionMode mode = CollectionMode::partition;
};
CoverAndCollection torus_bump_collection(const TorusBumpParams& params);

/// Round-sphere family with d + 3 functions:
///   f_+ = h(z), f_- = h(-z),
///   f_j = (1/d) (1 - h(z)) (1 - h(-z)) w(theta + 2 pi j / (d + 1)),
/// where h rises from 0 at u = a to 1 at u = b and w rises from 0 at |t| = t0
/// to 1 at |t| = t1 = 2 pi / (3 (d + 1)). The cover is made of slightly
/// enlarged supports: caps {+-z > a - m} and boxes {|z| < b + m_j} minus a
/// shrunken wedge. The m_j are spaced 2.5 cells apart so that no two box
/// edges run inside the same cell.
struct SharpnessParams {
  int d = 4;
  int n_theta = 256;
  int n_z = 256;
  double a = 0.2;
  double b = 0.8;
  double t0_fraction = 0.3;  // t0 = t0_fraction * t1
  double margin = 0.05;
  Profile h_profile = Profile::smoothstep(5);
  Profile w_profile = Profile::smoothstep(5);
};

struct SharpnessExample {
  Cover cover;
  PositiveCollection collection;
  int north = 0;  // disc and field index of f_+
  int south = 1;
  /// theta = 0 on the top row, the bottom row and at z = 0: one point in each
  /// cap and one in the gap of the first wedge.
  std::vector<NodeIndex> localization;
};

SharpnessExample build_sharpness_example(const SharpnessParams& params);

}  // namespace pbsurf
