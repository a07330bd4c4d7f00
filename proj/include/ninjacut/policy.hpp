#pragma once

#include <string_view>
#include <vector>

#include "ninjacut/geometry.hpp"
#include "ninjacut/trajectory.hpp"

namespace ninjacut {

struct PolicyConfig {
  /// R_dis: retraction steps after a collision, also the elevated-hold length.
  int retract_steps = 8;
  /// tau+: tolerance added per collision.
  double tolerance_increment = 0.005;
  int decay_steps = 5;
  double base_clearance = 0.02;
  double step_length = kStepLength;
  double dtheta_max = kDthetaMax;
  /// Width of the contour-following band around the target level.
  double band = 0.004;
  /// Greedy baseline turns this off and rotates straight to the target angle.
  bool limit_rotation = true;

  void validate() const;
};

enum class PolicyVariant { Adaptive, NonAdaptive, Greedy };

std::string_view to_string(PolicyVariant v);
PolicyVariant policy_variant_from_string(std::string_view s);
/// Applies the variant's overrides on top of a base configuration.
PolicyConfig variant_config(PolicyVariant v, const PolicyConfig& base);

enum class Phase { Forward, Retracting, Elevated, Decaying };

std::string_view to_string(Phase p);

struct PolicyState {
  double tolerance = 0.0;
  Phase phase = Phase::Forward;
  int remaining = 0;
  /// Tolerance when the current decay started; each decay step removes 1/decay_steps of it.
  double decay_start = 0.0;
  /// Every forward action emitted, in order.
  std::vector<Action> action_history;
  /// Indices into action_history not yet undone by a retraction (a stack).
  std::vector<std::size_t> unretracted;
  int collision_count = 0;
  KnifePose initial_pose;
};

PolicyState initial_policy_state(const KnifePose& start);

/// Contour-following action on the estimated core SDF at level base + tolerance.
Action next_action(const SdfGrid& est_sdf, const KnifePose& pose, const PolicyState& state,
                   const PolicyConfig& cfg);

/// Records an emitted forward action (history and retraction stack).
void record_forward(PolicyState& state, const Action& a);

PolicyState on_collision(const PolicyState& state, const PolicyConfig& cfg);

/// Exact inverse of the most recent unretracted forward action; once the
/// history runs out, a straight step back toward the initial pose.
Action retract_action(PolicyState& state, const KnifePose& pose, const PolicyConfig& cfg);

/// Called once per emitted forward action.
PolicyState advance_schedule(const PolicyState& state, const PolicyConfig& cfg);

/// Pose after applying an action (theta normalized).
KnifePose apply(const KnifePose& pose, const Action& a);

}  // namespace ninjacut
