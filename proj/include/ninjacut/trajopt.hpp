#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ninjacut/objectives.hpp"
#include "ninjacut/trajectory.hpp"

namespace ninjacut {

enum class GradientMode { ReverseMode, FiniteDifference };

std::string_view to_string(GradientMode m);
GradientMode gradient_mode_from_string(std::string_view s);

struct OptimizerConfig {
  int iterations = 300;
  double learning_rate = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int checkpoint_interval = 8;
  GradientMode gradient_mode = GradientMode::ReverseMode;
  /// Central-difference step on free parameters.
  double fd_step = 1e-4;

  void validate() const;
};

/// Deliberate adjoint corruption used to prove the gradient checker can fail.
enum class AdjointFault { None, SignFlip };

struct GradientResult {
  LossBreakdown loss;
  std::vector<double> grad;
};

/// Vertical collision-free descent beside the core down to the board.
Trajectory init_trajectory(const Scene& scene, const CollisionLossConfig& cfg);

/// d(total)/d(free_params) in the configured mode.
GradientResult gradient(const Trajectory& traj, const Scene& scene, const LossWeights& weights,
                        const CollisionLossConfig& cfg, const OptimizerConfig& opt,
                        AdjointFault fault = AdjointFault::None);

struct OptimizeResult {
  Trajectory best;
  /// Evaluation sequence: entry 0 is traj0, entry i the iterate after i updates.
  std::vector<LossBreakdown> history;
  std::size_t best_index = 0;
  /// Per-entry failure flags (loss recorded as +inf).
  std::vector<bool> failed;
};

using IterationCallback = std::function<void(int iteration, const LossBreakdown&)>;

OptimizeResult optimize(const Trajectory& traj0, const Scene& scene, const LossWeights& weights,
                        const CollisionLossConfig& cfg, const OptimizerConfig& opt,
                        const IterationCallback& on_iteration = {});

struct Demonstration {
  std::size_t core_index = 0;
  CoreShape core;
  Trajectory trajectory;
  std::vector<LossBreakdown> loss_history;
  /// Breakdown of the best trajectory re-evaluated on the evaluation scene.
  LossBreakdown breakdown_final;
  bool failed = false;
  std::string failure;
};

struct DemonstrationOptions {
  SimConfig optimize_sim = SimConfig::reduced();
  SimConfig evaluate_sim = SimConfig{};
  std::uint64_t seed = 0;
  /// Concurrent per-core optimizations (0 = NINJACUT_THREADS or 1).
  int threads = 0;
};

std::vector<Demonstration> collect_demonstrations(const std::vector<CoreShape>& cores,
                                                  const LossWeights& weights,
                                                  const CollisionLossConfig& cfg,
                                                  const OptimizerConfig& opt,
                                                  const DemonstrationOptions& options);

/// Worker count from NINJACUT_THREADS, clamped to [1, hardware threads].
int thread_budget(int requested = 0);

}  // namespace ninjacut
