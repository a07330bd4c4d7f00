#include "ninjacut/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ninjacut {

void CollisionLossConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("collision loss: n_samples must be >= 1");
  if (!(exponent >= 1.0)) throw std::invalid_argument("collision loss: exponent must be >= 1");
  if (!(safety_margin >= 0.0)) throw std::invalid_argument("collision loss: safety_margin must be >= 0");
}

void LossWeights::validate() const {
  if (!(eta_col >= 0.0) || !(eta_e >= 0.0))
    throw std::invalid_argument("loss weights must be non-negative");
}

double collision_loss(const KnifePose& pose, const CoreShape& core, const KnifeGeometry& geom,
                      const CollisionLossConfig& cfg) {
  Vec3 g;
  return collision_loss(pose, core, geom, cfg, g);
}

double collision_loss(const KnifePose& pose, const CoreShape& core, const KnifeGeometry& geom,
                      const CollisionLossConfig& cfg, Vec3& grad) {
  grad.setZero();
  double loss = 0.0;
  const Vec2 dir = pose.direction();
  const Vec2 ddir(-dir.y(), dir.x());
  const int n = cfg.n_samples;
  for (int i = 0; i < n; ++i) {
    const double s = n == 1 ? 0.0 : geom.spine_offset * static_cast<double>(i) / (n - 1);
    const Vec2 p = pose.tip + s * dir;
    const auto sd = core_sdf_full(core, p);
    const double r = -sd.value + cfg.safety_margin;
    if (!(r > 0.0)) continue;
    loss += std::pow(r, cfg.exponent);
    // d r / d p = -grad sdf
    const Vec2 g = -cfg.exponent * std::pow(r, cfg.exponent - 1.0) * sd.gradient;
    grad.x() += g.x();
    grad.y() += g.y();
    grad.z() += s * g.dot(ddir);
  }
  return loss;
}

EnergySummary energy_objective(const std::vector<StepRecord>& records) {
  EnergySummary e;
  e.series.reserve(records.size());
  for (const auto& r : records) {
    e.series.push_back(r.energy);
    e.total += r.energy;
    e.max = e.series.size() == 1 ? r.energy : std::max(e.max, r.energy);
  }
  return e;
}

double soft_side(double sd, double h, double* dweight) {
  const double t = 0.5 + sd / (2.0 * h);
  if (t <= 0.0 || t >= 1.0) {
    if (dweight) *dweight = 0.0;
    return t <= 0.0 ? 0.0 : 1.0;
  }
  if (dweight) *dweight = 6.0 * t * (1.0 - t) / (2.0 * h);
  return t * t * (3.0 - 2.0 * t);
}

double soft_cut_ratio(const std::vector<Particle>& particles, const std::vector<Vec2>& tips,
                      double half_width, double total_mass, std::vector<Vec2>* grad_x,
                      std::vector<Vec2>* grad_tips) {
  const CutPath path(tips);
  if (grad_x) grad_x->assign(particles.size(), Vec2::Zero());
  if (grad_tips) grad_tips->assign(tips.size(), Vec2::Zero());
  double m = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const Particle& p = particles[i];
    double dw = 0.0;
    if (!grad_x && !grad_tips) {
      m += p.mass * soft_side(path.signed_distance(p.x), half_width);
      continue;
    }
    Vec2 gp;
    // First pass without tip gradients to learn the weight derivative.
    const double sd = path.signed_distance(p.x, gp, nullptr, 0.0);
    m += p.mass * soft_side(sd, half_width, &dw);
    if (dw == 0.0) continue;
    const double scale = p.mass * dw / total_mass;
    if (grad_x) (*grad_x)[i] = scale * gp;
    if (grad_tips) path.signed_distance(p.x, gp, grad_tips, scale);
  }
  return m / total_mass;
}

LossBreakdown make_breakdown(double soft_ratio, double collision, double energy,
                             const LossWeights& weights) {
  LossBreakdown b;
  b.mass_term = -soft_ratio;
  b.collision_term = collision;
  b.energy_term = energy;
  b.total = b.mass_term + weights.eta_col * b.collision_term + weights.eta_e * b.energy_term;
  return b;
}

LossBreakdown total_loss(const Trajectory& traj, const Scene& scene, const LossWeights& weights,
                         const CollisionLossConfig& cfg) {
  return total_loss(traj, scene, weights, cfg, nullptr, nullptr);
}

LossBreakdown total_loss(const Trajectory& traj, const Scene& scene, const LossWeights& weights,
                         const CollisionLossConfig& cfg, SimState* final_state,
                         std::vector<StepRecord>* records) {
  traj.validate();
  weights.validate();
  cfg.validate();
  const auto q = traj.raw_poses();
  std::vector<Vec2> tips;
  tips.reserve(q.size());
  for (const auto& v : q) tips.emplace_back(v[0], v[1]);

  double collision = 0.0;
  double min_clear = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < q.size(); ++t) {
    const KnifePose pose{tips[t], q[t][2]};
    if (t > 0) collision += collision_loss(pose, scene.core, scene.sim.knife, cfg);
    min_clear = std::min(min_clear, knife_core_min_sdf(scene.core, pose, scene.sim.knife, cfg.n_samples));
  }

  SimState state = init_scene(scene.core, scene.sim, scene.seed, traj.initial_pose);
  std::vector<StepRecord> recs;
  recs.reserve(traj.steps());
  double energy = 0.0, emax = 0.0;
  for (std::size_t t = 0; t < traj.steps(); ++t) {
    try {
      recs.push_back(advance(state, q[t], q[t + 1]));
    } catch (const NumericalFailure& e) {
      std::vector<Vec2> done(tips.begin(), tips.begin() + static_cast<std::ptrdiff_t>(t) + 1);
      LossBreakdown partial = make_breakdown(
          soft_cut_ratio(state.particles, done, scene.sim.cell_size(), state.initial_soft_mass),
          collision, energy, weights);
      partial.steps = static_cast<int>(t);
      throw LossEvaluationError(e.what(), partial, static_cast<int>(t));
    }
    energy += recs.back().energy;
    emax = t == 0 ? recs.back().energy : std::max(emax, recs.back().energy);
  }
  const double ratio =
      soft_cut_ratio(state.particles, tips, scene.sim.cell_size(), state.initial_soft_mass);
  LossBreakdown b = make_breakdown(ratio, collision, energy, weights);
  b.cut_mass_ratio = cut_mass_mpm(state, tips) / state.initial_soft_mass;
  b.max_step_energy = emax;
  b.min_clearance = min_clear;
  b.steps = static_cast<int>(traj.steps());
  if (final_state) *final_state = std::move(state);
  if (records) *records = std::move(recs);
  return b;
}

}  // namespace ninjacut
