#include "ninjacut/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ninjacut {

void PolicyConfig::validate() const {
  if (retract_steps < 1) throw std::invalid_argument("policy: retract_steps must be >= 1");
  if (decay_steps < 1) throw std::invalid_argument("policy: decay_steps must be >= 1");
  if (!(tolerance_increment >= 0.0)) throw std::invalid_argument("policy: tolerance_increment must be >= 0");
  if (!(base_clearance >= 0.0)) throw std::invalid_argument("policy: base_clearance must be >= 0");
  if (!(step_length > 0.0)) throw std::invalid_argument("policy: step_length must be positive");
  if (!(dtheta_max > 0.0)) throw std::invalid_argument("policy: dtheta_max must be positive");
  if (!(band > 0.0)) throw std::invalid_argument("policy: band must be positive");
}

std::string_view to_string(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::Adaptive: return "adaptive";
    case PolicyVariant::NonAdaptive: return "non-adaptive";
    case PolicyVariant::Greedy: return "greedy";
  }
  return "adaptive";
}

PolicyVariant policy_variant_from_string(std::string_view s) {
  if (s == "adaptive") return PolicyVariant::Adaptive;
  if (s == "non-adaptive") return PolicyVariant::NonAdaptive;
  if (s == "greedy") return PolicyVariant::Greedy;
  throw std::invalid_argument("unknown policy variant: " + std::string(s));
}

PolicyConfig variant_config(PolicyVariant v, const PolicyConfig& base) {
  PolicyConfig c = base;
  switch (v) {
    case PolicyVariant::Adaptive: break;
    case PolicyVariant::NonAdaptive: c.tolerance_increment = 0.0; break;
    case PolicyVariant::Greedy:
      c.tolerance_increment = 0.0;
      c.base_clearance = 0.0;
      c.limit_rotation = false;
      break;
  }
  return c;
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Forward: return "forward";
    case Phase::Retracting: return "retracting";
    case Phase::Elevated: return "elevated";
    case Phase::Decaying: return "decaying";
  }
  return "forward";
}

PolicyState initial_policy_state(const KnifePose& start) {
  PolicyState s;
  s.initial_pose = start.normalized();
  return s;
}

KnifePose apply(const KnifePose& pose, const Action& a) {
  return KnifePose{pose.tip + a.dpos, wrap_angle(pose.theta + a.dtheta)};
}

namespace {

/// Lowest cell-centre height with a negative value, or +inf for an empty mask.
double mask_bottom(const SdfGrid& s) {
  for (int j = 0; j < s.spec.ny; ++j)
    for (int i = 0; i < s.spec.nx; ++i)
      if (s.at(i, j) < 0.0) return s.spec.cell_center(i, j).y();
  return std::numeric_limits<double>::infinity();
}

}  // namespace

Action next_action(const SdfGrid& est_sdf, const KnifePose& pose, const PolicyState& state,
                   const PolicyConfig& cfg) {
  if (state.phase == Phase::Retracting)
    throw std::logic_error("next_action: called while retracting");
  if (!est_sdf.spec.contains(pose.tip))
    throw std::invalid_argument("next_action: knife tip outside the estimate window");
  const double level = cfg.base_clearance + state.tolerance;
  const double phi = est_sdf.sample(pose.tip);
  Vec2 g = est_sdf.gradient(pose.tip);
  g = g.norm() > 1e-12 ? Vec2(g.normalized()) : Vec2(1.0, 0.0);

  // Preferred direction: straight down, or down and inward once below the core.
  Vec2 d(0.0, -1.0);
  if (pose.tip.y() < mask_bottom(est_sdf)) d = Vec2(-1.0, -1.0).normalized();

  // Clearance rate r = h.g: never below the preferred direction's rate, pushed
  // outward when inside the level; r is non-decreasing in the level by construction.
  const double delta = d.dot(g);
  const double rho = std::clamp((level - phi) / cfg.band, -1.0, 1.0);
  const double r = std::max(delta, rho);
  Vec2 t = d - delta * g;
  if (t.norm() < 1e-9) {
    t = Vec2(g.y(), -g.x());
    if (t.y() > 0.0) t = -t;
  }
  t.normalize();
  Vec2 h = r * g + std::sqrt(std::max(0.0, 1.0 - r * r)) * t;
  if (r == delta) h = d;
  h.normalize();

  Action a;
  a.dpos = cfg.step_length * h;
  const double target = std::atan2(-h.y(), -h.x());
  a.dtheta = wrap_angle(target - pose.theta);
  if (cfg.limit_rotation) a.dtheta = std::clamp(a.dtheta, -cfg.dtheta_max, cfg.dtheta_max);
  return a;
}

void record_forward(PolicyState& state, const Action& a) {
  state.unretracted.push_back(state.action_history.size());
  state.action_history.push_back(a);
}

PolicyState on_collision(const PolicyState& state, const PolicyConfig& cfg) {
  if (state.phase == Phase::Retracting) throw std::logic_error("on_collision: already retracting");
  PolicyState s = state;
  s.tolerance += cfg.tolerance_increment;
  s.phase = Phase::Retracting;
  s.remaining = cfg.retract_steps;
  s.collision_count += 1;
  return s;
}

Action retract_action(PolicyState& state, const KnifePose& pose, const PolicyConfig& cfg) {
  if (state.phase != Phase::Retracting || state.remaining < 1)
    throw std::logic_error("retract_action: not retracting");
  Action a;
  if (!state.unretracted.empty()) {
    const Action& f = state.action_history[state.unretracted.back()];
    state.unretracted.pop_back();
    a.dpos = -f.dpos;
    a.dtheta = -f.dtheta;
  } else {
    const Vec2 to = state.initial_pose.tip - pose.tip;
    const double dist = to.norm();
    a.dpos = dist > cfg.step_length ? Vec2(cfg.step_length * to / dist) : to;
    a.dtheta = std::clamp(wrap_angle(state.initial_pose.theta - pose.theta), -cfg.dtheta_max,
                          cfg.dtheta_max);
  }
  if (--state.remaining == 0) {
    state.phase = Phase::Elevated;
    state.remaining = cfg.retract_steps;
  }
  return a;
}

PolicyState advance_schedule(const PolicyState& state, const PolicyConfig& cfg) {
  PolicyState s = state;
  switch (s.phase) {
    case Phase::Forward:
    case Phase::Retracting: break;
    case Phase::Elevated:
      if (--s.remaining <= 0) {
        s.phase = Phase::Decaying;
        s.decay_start = s.tolerance;
        s.remaining = cfg.decay_steps - 1;
        s.tolerance = s.decay_start * s.remaining / cfg.decay_steps;
      }
      break;
    case Phase::Decaying:
      if (s.remaining <= 0) {
        s.phase = Phase::Forward;
        s.tolerance = 0.0;
        s.remaining = 0;
      } else {
        --s.remaining;
        s.tolerance = s.decay_start * s.remaining / cfg.decay_steps;
      }
      break;
  }
  return s;
}

}  // namespace ninjacut
