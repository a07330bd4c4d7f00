#pragma once

#include <cstdint>
#include <vector>

#include "ninjacut/geometry.hpp"
#include "ninjacut/mpm.hpp"

namespace ninjacut {

inline constexpr double kStepLength = 0.002;
inline constexpr double kDthetaMax = 0.1;

struct Action {
  Vec2 dpos = Vec2::Zero();
  double dtheta = 0.0;
};

/// Knife motion parameterized by per-step heading phi_t and rotation parameter psi_t:
/// dpos_t = step_length (cos phi_t, sin phi_t), dtheta_t = dtheta_max tanh(psi_t).
struct Trajectory {
  KnifePose initial_pose;
  /// Interleaved (phi_0, psi_0, phi_1, psi_1, ...).
  std::vector<double> free_params;
  double step_length = kStepLength;
  double dtheta_max = kDthetaMax;

  std::size_t steps() const { return free_params.size() / 2; }
  Action action(std::size_t t) const;
  std::vector<Action> actions() const;
  /// T + 1 raw poses (x, y, theta) with theta accumulated without wrapping.
  std::vector<Vec3> raw_poses() const;
  std::vector<KnifePose> poses() const;
  void validate() const;

  static Trajectory from_actions(const KnifePose& initial, const std::vector<Action>& actions,
                                 double step_length = kStepLength, double dtheta_max = kDthetaMax);
};

/// Simulation scene: hidden core plus solver configuration and particle seed.
struct Scene {
  CoreShape core;
  SimConfig sim;
  std::uint64_t seed = 0;
};

}  // namespace ninjacut
