#include "ninjacut/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ninjacut {

Action Trajectory::action(std::size_t t) const {
  const double phi = free_params[2 * t];
  const double psi = free_params[2 * t + 1];
  return Action{step_length * Vec2(std::cos(phi), std::sin(phi)), dtheta_max * std::tanh(psi)};
}

std::vector<Action> Trajectory::actions() const {
  std::vector<Action> out;
  out.reserve(steps());
  for (std::size_t t = 0; t < steps(); ++t) out.push_back(action(t));
  return out;
}

std::vector<Vec3> Trajectory::raw_poses() const {
  std::vector<Vec3> q;
  q.reserve(steps() + 1);
  q.emplace_back(initial_pose.tip.x(), initial_pose.tip.y(), initial_pose.theta);
  for (std::size_t t = 0; t < steps(); ++t) {
    const Action a = action(t);
    q.push_back(q.back() + Vec3(a.dpos.x(), a.dpos.y(), a.dtheta));
  }
  return q;
}

std::vector<KnifePose> Trajectory::poses() const {
  std::vector<KnifePose> out;
  for (const auto& q : raw_poses()) out.push_back(KnifePose{Vec2(q[0], q[1]), q[2]}.normalized());
  return out;
}

void Trajectory::validate() const {
  if (free_params.size() % 2 != 0) throw std::invalid_argument("trajectory: odd free_params length");
  if (!(step_length > 0.0) || !(dtheta_max > 0.0))
    throw std::invalid_argument("trajectory: step_length and dtheta_max must be positive");
  for (double v : free_params)
    if (!std::isfinite(v)) throw std::invalid_argument("trajectory: non-finite parameter");
  if (!initial_pose.tip.allFinite() || !std::isfinite(initial_pose.theta))
    throw std::invalid_argument("trajectory: non-finite initial pose");
}

Trajectory Trajectory::from_actions(const KnifePose& initial, const std::vector<Action>& actions,
                                    double step_length, double dtheta_max) {
  Trajectory tr;
  tr.initial_pose = initial;
  tr.step_length = step_length;
  tr.dtheta_max = dtheta_max;
  tr.free_params.reserve(2 * actions.size());
  for (const auto& a : actions) {
    tr.free_params.push_back(std::atan2(a.dpos.y(), a.dpos.x()));
    const double r = std::clamp(a.dtheta / dtheta_max, -1.0 + 1e-12, 1.0 - 1e-12);
    tr.free_params.push_back(std::atanh(r));
  }
  return tr;
}

}  // namespace ninjacut
