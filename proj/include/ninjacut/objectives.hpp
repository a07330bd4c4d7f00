#pragma once

#include <vector>

#include "ninjacut/mpm.hpp"
#include "ninjacut/trajectory.hpp"

namespace ninjacut {

struct CollisionLossConfig {
  int n_samples = 5;
  double exponent = 4.0;
  double safety_margin = 0.02;

  void validate() const;
};

struct LossWeights {
  double eta_col = 2e4;
  double eta_e = 0.15;

  void validate() const;
};

struct LossBreakdown {
  /// Negated soft cut-mass ratio (the differentiable surrogate).
  double mass_term = 0.0;
  double collision_term = 0.0;
  double energy_term = 0.0;
  double total = 0.0;
  /// Hard classification of the final particles against the executed path.
  double cut_mass_ratio = 0.0;
  double max_step_energy = 0.0;
  /// Minimum core SDF over all edge samples of all poses (negative means penetration).
  double min_clearance = 0.0;
  int steps = 0;
};

/// Sum over edge samples of max(d_i + d_hat, 0)^k with d_i = -core_sdf.
double collision_loss(const KnifePose& pose, const CoreShape& core, const KnifeGeometry& geom,
                      const CollisionLossConfig& cfg);
/// Same, with the gradient with respect to (tip.x, tip.y, theta).
double collision_loss(const KnifePose& pose, const CoreShape& core, const KnifeGeometry& geom,
                      const CollisionLossConfig& cfg, Vec3& grad);

struct EnergySummary {
  double total = 0.0;
  double max = 0.0;
  std::vector<double> series;
};

EnergySummary energy_objective(const std::vector<StepRecord>& records);

/// Smoothstep side weight in [0, 1] for signed path distance sd over half-width h.
double soft_side(double sd, double h, double* dweight = nullptr);

/// Soft cut-mass ratio of the particles against the path; optionally accumulates
/// d(ratio)/d(particle position) and d(ratio)/d(tip k).
double soft_cut_ratio(const std::vector<Particle>& particles, const std::vector<Vec2>& tips,
                      double half_width, double total_mass, std::vector<Vec2>* grad_x = nullptr,
                      std::vector<Vec2>* grad_tips = nullptr);

/// Thrown when the rollout inside total_loss fails; carries the partial breakdown.
class LossEvaluationError : public NumericalFailure {
 public:
  LossEvaluationError(const std::string& what, LossBreakdown partial, int failed_step)
      : NumericalFailure(what), partial_(partial), failed_step_(failed_step) {}
  const LossBreakdown& partial() const { return partial_; }
  int failed_step() const { return failed_step_; }

 private:
  LossBreakdown partial_;
  int failed_step_;
};

/// Assembles the breakdown from its parts; total is mass + eta_col col + eta_e energy.
LossBreakdown make_breakdown(double soft_ratio, double collision, double energy,
                             const LossWeights& weights);

/// Rolls the simulator out along traj and evaluates every objective.
LossBreakdown total_loss(const Trajectory& traj, const Scene& scene, const LossWeights& weights,
                         const CollisionLossConfig& cfg);

/// Full-rollout variant that also returns the final state and the per-step records.
LossBreakdown total_loss(const Trajectory& traj, const Scene& scene, const LossWeights& weights,
                         const CollisionLossConfig& cfg, SimState* final_state,
                         std::vector<StepRecord>* records);

}  // namespace ninjacut
