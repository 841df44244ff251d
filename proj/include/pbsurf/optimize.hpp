#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pbsurf/collection.hpp"
#include "pbsurf/cover.hpp"
#include "pbsurf/geometry.hpp"

namespace pbsurf {

// --- minimizing P_F over collections subordinate to a fixed cover ------------

enum class Objective { l1_pb, smoothed_linf };
enum class Projection { positive, partition };

const char* to_string(Objective o);
const char* to_string(Projection p);

struct OptimizerParams {
  Objective objective = Objective::l1_pb;
  /// |t| is replaced by sqrt(t^2 + eps^2) - eps. Zero picks 1e-3 times the
  /// largest value of P_F at the projected start.
  double softabs_eps = 0.0;
  /// Sharpness beta of the smoothed sup, (1/beta) log mean exp(beta P).
  double linf_beta = 20.0;
  /// Largest change of any field value on the first trial step.
  double initial_step = 0.05;
  double backtrack = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 40;
  /// Steps follow the Sobolev gradient (I - l^2 Lap)^{-1} g, l in grid cells.
  /// Zero uses the plain gradient.
  double sobolev_length = 2.0;
  /// Polak-Ribiere+ directions instead of plain steepest descent.
  bool conjugate = true;
  int iterations = 200;
  Projection projection = Projection::partition;
  int restarts = 5;
  double restart_noise = 0.2;
  std::uint64_t seed = 1;
  /// A run stops once the integral of P_F is at or below this.
  double stop_pb_integral = 0.0;
};

struct OptimizeResult {
  PositiveCollection best;
  std::vector<double> trace;     // objective after each accepted step, best run
  std::vector<double> pb_trace;  // integral of P_F alongside
  double softabs_eps = 0.0;
  int best_restart = 0;
  int iterations = 0;            // accepted steps in the best run
};

/// Projection onto collections subordinate to U: values outside each field's
/// eroded disc are zeroed, negatives clamped, then the fields are divided by
/// S_F (partition) or by min(S_F, 1) (positive). Sphere nodes in the pole band
/// keep their current values.
PositiveCollection project_collection(const Cover& U, const PositiveCollection& F, Projection mode);

/// Objective value and, when grad is not null, its gradient with respect to
/// every node value of every field (unprojected).
double pb_objective(const PositiveCollection& F, const OptimizerParams& params, double eps,
                    std::vector<std::vector<double>>* grad = nullptr);

OptimizeResult minimize_pb(const Cover& U, const PositiveCollection& F0, const OptimizerParams& params);

// --- Moser rescaling on the torus ---------------------------------------------

class MoserFlow;

/// A grid diffeomorphism phi stored as displacements at the nodes:
/// phi(x_k) = x_k + forward_k and phi^{-1}(x_k) = x_k + inverse_k. When it
/// comes from a flow, off-grid points are mapped by integrating that flow.
class DiffeoGrid {
 public:
  static DiffeoGrid identity(const ChartPtr& chart);

  const ChartPtr& chart_ptr() const { return chart_; }
  const std::vector<ChartPoint>& forward_displacement() const { return fwd_; }
  const std::vector<ChartPoint>& inverse_displacement() const { return inv_; }
  const std::string& history() const { return history_; }

  ChartPoint forward(ChartPoint x) const;
  ChartPoint inverse(ChartPoint x) const;
  ChartPoint forward_node(NodeIndex k) const;
  ChartPoint inverse_node(NodeIndex k) const;

  /// max over nodes of |phi(phi^{-1}(x_k)) - x_k| in chart units.
  double inverse_consistency() const;
  /// det D phi at every node, by central differences of the displacement.
  std::vector<double> jacobian() const;
  double max_displacement() const;

 private:
  friend DiffeoGrid moser_rescale(const ChartPtr& chart, const ScalarField& P);
  DiffeoGrid() = default;

  ChartPtr chart_;
  std::vector<ChartPoint> fwd_;
  std::vector<ChartPoint> inv_;
  std::shared_ptr<const MoserFlow> flow_;
  std::string history_;
};

/// phi with phi^* omega_0 = omega for omega_0 = (Area / int P omega) P omega.
/// Uses a spectral periodic Poisson solve for the primitive and 64 RK4 steps
/// of the Moser flow. Torus charts only; P must be positive.
DiffeoGrid moser_rescale(const ChartPtr& chart, const ScalarField& P);

/// max over nodes of |det D phi * rho_0(phi) - rho| / max rho, rho_0 being the
/// rescaled density of moser_rescale.
double pullback_residual(const DiffeoGrid& phi, const ScalarField& P);

/// phi^* U (discs {x : phi(x) in U_i}) and phi^* F (f o phi).
Cover apply_diffeo(const Cover& U, const DiffeoGrid& phi);
PositiveCollection apply_diffeo(const PositiveCollection& F, const DiffeoGrid& phi);

struct Transported {
  Cover cover;
  PositiveCollection collection;
  ValidationReport validation;
};
/// Both at once, with the transported collection validated against the
/// transported cover.
Transported transport(const Cover& U, const PositiveCollection& F, const DiffeoGrid& phi);

/// A positive field P >= f: a moving maximum over a square window of
/// half-width `width`, mollified at the same width, plus delta.
ScalarField smooth_majorant(const ScalarField& f, double width, double delta);

}  // namespace pbsurf
