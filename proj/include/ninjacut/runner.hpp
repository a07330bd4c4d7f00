#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ninjacut/estimator.hpp"
#include "ninjacut/mpm.hpp"
#include "ninjacut/policy.hpp"

namespace ninjacut {

struct EpisodeLimits {
  int max_collisions = 10;
  double max_step_energy = 3.0;
  /// Forward-step cap; 0 derives it from the domain height and max_collisions.
  int max_forward_steps = 0;

  int forward_step_cap(const SimConfig& sim, double step_length) const;
  void validate() const;
};

enum class EpisodeStatus { Completed, FailedCollisions, FailedEnergy, FailedStepLimit, NumericalFailure };

std::string_view to_string(EpisodeStatus s);
EpisodeStatus episode_status_from_string(std::string_view s);

struct EpisodeConfig {
  SimConfig sim;
  PolicyConfig policy;
  EstimatorConfig estimator;
  EpisodeLimits limits;
  std::uint64_t seed = 0;
  /// Use the ground-truth core as the estimate (ablation).
  bool oracle = false;
  /// Keep full CoreEstimate snapshots in the result.
  bool keep_estimates = false;
  int max_bisections = 6;
  /// Target |clearance| of a truncated collision pose.
  double contact_tolerance = 2e-4;
};

struct StepLog {
  Action action;
  /// Pose after the action; theta is accumulated without wrapping.
  Vec3 pose = Vec3::Zero();
  double energy = 0.0;
  double min_sdf = 0.0;
  bool retraction = false;
  bool truncated = false;
  double tolerance = 0.0;
  Phase phase = Phase::Forward;
};

struct CollisionEvent {
  /// Index into EpisodeResult::steps of the truncated action.
  std::size_t step = 0;
  Vec2 point = Vec2::Zero();
};

struct EpisodeResult {
  EpisodeStatus status = EpisodeStatus::Completed;
  std::string message;
  /// Start pose; theta raw.
  Vec3 start = Vec3::Zero();
  std::vector<StepLog> steps;
  std::vector<CollisionEvent> collision_events;
  double cut_mass_ratio = 0.0;
  /// Step index after which each estimate was made (initial estimate: -1).
  std::vector<long> estimate_steps;
  std::vector<CoreEstimate> estimates;

  std::vector<KnifePose> poses() const;
  std::size_t forward_steps() const;
  std::vector<double> forward_energies() const;
};

struct Metrics {
  double completion = 0.0;
  double cut_mass_ratio = 0.0;
  double collision_ratio = 0.0;
  double avg_energy = 0.0;
  double max_energy = 0.0;
};

/// Start pose on the top row, scanning from the right to the first point within
/// half a band of the target level.
KnifePose find_start_pose(const SdfGrid& est_sdf, const SimConfig& sim, const PolicyConfig& policy);

/// Closed-loop episode: estimate, act, detect collisions, retract, re-estimate.
EpisodeResult run_episode(const CoreShape& core, const EpisodeConfig& cfg,
                          const Estimator* estimator = nullptr);

Metrics compute_metrics(const EpisodeResult& r);
Metrics mean_metrics(const std::vector<Metrics>& ms);

struct ReplayReport {
  bool identical = true;
  std::size_t steps_checked = 0;
  std::string mismatch;
};

/// Re-simulates the logged actions and compares poses, energies and clearances bit-exactly.
ReplayReport replay_episode(const CoreShape& core, const EpisodeConfig& cfg, const EpisodeResult& r);

struct EvalEpisode {
  std::string split;
  PolicyVariant variant = PolicyVariant::Adaptive;
  std::size_t core_index = 0;
  CoreShape core;
  EpisodeConfig config;
  EpisodeResult result;
  Metrics metrics;
};

struct EvalRow {
  std::string split;
  PolicyVariant variant = PolicyVariant::Adaptive;
  std::size_t episodes = 0;
  Metrics mean;
};

struct EvalSplit {
  std::string name;
  std::vector<CoreShape> cores;
};

using EpisodeCallback = std::function<void(const EvalEpisode&)>;

/// Runs every (split, variant, core) episode; failures are recorded, never abort the sweep.
/// Estimate snapshots are visible to on_episode only and dropped afterwards.
std::vector<EvalRow> evaluate(const std::vector<EvalSplit>& splits,
                              const std::vector<PolicyVariant>& variants, const EpisodeConfig& base,
                              std::vector<EvalEpisode>* episodes = nullptr,
                              const EpisodeCallback& on_episode = {}, int threads = 0);

}  // namespace ninjacut
