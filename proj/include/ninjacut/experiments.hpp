#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ninjacut/config.hpp"

namespace ninjacut {

struct GradcheckCase {
  Scene scene;
  Trajectory trajectory;
};

/// Seeded small scene: reduced grid, shrunken soft box, randomized descent near the core.
GradcheckCase gradcheck_case(const GradcheckSpec& spec, int index);

struct GradcheckRow {
  int scene = 0;
  std::size_t particles = 0;
  double loss = 0.0;
  double rel_l2 = 0.0;
  double cosine = 0.0;
  double seconds = 0.0;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  bool pass() const;
};

double relative_l2(const std::vector<double>& a, const std::vector<double>& ref);
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

GradcheckReport run_gradcheck(const GradcheckSpec& spec, const LossWeights& weights,
                              const CollisionLossConfig& cfg, const OptimizerConfig& opt,
                              AdjointFault fault = AdjointFault::None, int threads = 0);

struct SweepRow {
  double eta_e = 0.0;
  double total_energy = 0.0;
  double max_step_energy = 0.0;
  double cut_mass_ratio = 0.0;
  double collision_term = 0.0;
  double loss = 0.0;
  Trajectory initial;
  Trajectory best;
  std::vector<LossBreakdown> history;
  std::vector<bool> failed;
};

/// Optimizes the sweep core once per energy weight on the optimization scene.
std::vector<SweepRow> energy_sweep(const RunConfig& cfg,
                                   const std::function<void(const SweepRow&)>& on_row = {});

struct AblationRow {
  std::string parameter;
  double value = 0.0;
  std::size_t episodes = 0;
  Metrics mean;
  /// Mean forward-step count, the trajectory-length side of the trade-off.
  double forward_steps = 0.0;
};

/// Adaptive-policy episodes over the cores for each value of a policy parameter.
std::vector<AblationRow> policy_ablation(const std::vector<CoreShape>& cores, const EpisodeConfig& base,
                                         const std::string& parameter, const std::vector<double>& values,
                                         int threads = 0);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace ninjacut
