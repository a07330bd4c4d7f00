#include "ninjacut/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ninjacut/trajopt.hpp"

namespace ninjacut {

int EpisodeLimits::forward_step_cap(const SimConfig& sim, double step_length) const {
  if (max_forward_steps > 0) return max_forward_steps;
  const int per_pass = static_cast<int>(std::ceil(sim.domain_size / step_length));
  return per_pass * (1 + max_collisions);
}

void EpisodeLimits::validate() const {
  if (max_collisions < 0) throw std::invalid_argument("limits: max_collisions must be >= 0");
  if (!(max_step_energy > 0.0)) throw std::invalid_argument("limits: max_step_energy must be positive");
  if (max_forward_steps < 0) throw std::invalid_argument("limits: max_forward_steps must be >= 0");
}

std::string_view to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Completed: return "completed";
    case EpisodeStatus::FailedCollisions: return "failed_collisions";
    case EpisodeStatus::FailedEnergy: return "failed_energy";
    case EpisodeStatus::FailedStepLimit: return "failed_step_limit";
    case EpisodeStatus::NumericalFailure: return "numerical_failure";
  }
  return "completed";
}

EpisodeStatus episode_status_from_string(std::string_view s) {
  for (auto st : {EpisodeStatus::Completed, EpisodeStatus::FailedCollisions, EpisodeStatus::FailedEnergy,
                  EpisodeStatus::FailedStepLimit, EpisodeStatus::NumericalFailure})
    if (to_string(st) == s) return st;
  throw std::invalid_argument("unknown episode status: " + std::string(s));
}

std::vector<KnifePose> EpisodeResult::poses() const {
  std::vector<KnifePose> out;
  out.reserve(steps.size() + 1);
  out.push_back(KnifePose{Vec2(start[0], start[1]), wrap_angle(start[2])});
  for (const auto& s : steps) out.push_back(KnifePose{Vec2(s.pose[0], s.pose[1]), wrap_angle(s.pose[2])});
  return out;
}

std::size_t EpisodeResult::forward_steps() const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const StepLog& s) { return !s.retraction; }));
}

std::vector<double> EpisodeResult::forward_energies() const {
  std::vector<double> e;
  for (const auto& s : steps)
    if (!s.retraction) e.push_back(s.energy);
  return e;
}

KnifePose find_start_pose(const SdfGrid& est_sdf, const SimConfig& sim, const PolicyConfig& policy) {
  const double y = sim.soft_top + policy.step_length;
  const double target = policy.base_clearance + 0.5 * policy.band;
  const double dx = sim.cell_size();
  const double x_hi = sim.domain_size - 4.0 * dx;
  // Stops at the target clearance, or at the closest approach if the row never reaches it.
  double prev = std::numeric_limits<double>::infinity();
  for (double x = x_hi; x > 4.0 * dx; x -= est_sdf.spec.cell_size) {
    const double v = est_sdf.sample(Vec2(x, y));
    if (v <= target) return KnifePose{Vec2(x, y), kPi / 2.0};
    if (v > prev) return KnifePose{Vec2(x + est_sdf.spec.cell_size, y), kPi / 2.0};
    prev = v;
  }
  throw std::invalid_argument("find_start_pose: no start position at the target clearance");
}

namespace {

Vec3 raw_after(const Vec3& q, const Action& a) {
  return Vec3(q[0] + a.dpos.x(), q[1] + a.dpos.y(), q[2] + a.dtheta);
}

KnifePose pose_of(const Vec3& q) { return KnifePose{Vec2(q[0], q[1]), wrap_angle(q[2])}; }

Vec2 deepest_sample(const CoreShape& core, const KnifePose& pose, const KnifeGeometry& g, int n) {
  Vec2 best = pose.tip;
  double dmin = std::numeric_limits<double>::infinity();
  for (const auto& p : edge_samples(pose, g, n)) {
    const double d = core_sdf(core, p);
    if (d < dmin) {
      dmin = d;
      best = p;
    }
  }
  return best;
}

}  // namespace

EpisodeResult run_episode(const CoreShape& core, const EpisodeConfig& cfg, const Estimator* estimator) {
  cfg.sim.validate();
  cfg.policy.validate();
  cfg.limits.validate();
  std::unique_ptr<Estimator> own;
  if (!estimator && !cfg.oracle) {
    own = std::make_unique<Estimator>(cfg.estimator, core.anchor);
    estimator = own.get();
  }
  const KnifeGeometry& geom = cfg.sim.knife;
  const int ns = cfg.sim.contact_samples;
  EpisodeResult res;
  std::vector<EvidenceRecord> records;

  auto estimate = [&](long after_step) {
    CoreEstimate est = cfg.oracle ? oracle_estimate(core)
                                  : estimator->estimate(build_evidence(records, geom, ns));
    if (est.mask_count() == 0) throw NumericalFailure("estimator produced an empty mask");
    res.estimate_steps.push_back(after_step);
    SdfGrid sdf = est.sdf;
    if (cfg.keep_estimates) res.estimates.push_back(std::move(est));
    return sdf;
  };

  SdfGrid sdf = estimate(-1);
  const KnifePose start = find_start_pose(sdf, cfg.sim, cfg.policy);
  res.start = Vec3(start.tip.x(), start.tip.y(), start.theta);
  records.push_back({start, knife_core_min_sdf(core, start, geom, ns), start.tip});

  SimState state = init_scene(core, cfg.sim, cfg.seed, start);
  PolicyState ps = initial_policy_state(start);
  Vec3 q = res.start;
  const int cap = cfg.limits.forward_step_cap(cfg.sim, cfg.policy.step_length);
  int forward = 0;

  auto execute = [&](const Action& a, bool retraction, bool truncated) {
    const Vec3 q1 = raw_after(q, a);
    StepLog log;
    log.action = a;
    log.retraction = retraction;
    log.truncated = truncated;
    log.tolerance = ps.tolerance;
    log.phase = ps.phase;
    const StepRecord rec = advance(state, q, q1);
    q = q1;
    log.pose = q1;
    log.energy = rec.energy;
    log.min_sdf = rec.knife_core_min_sdf;
    res.steps.push_back(log);
    const KnifePose p = pose_of(q1);
    records.push_back({p, rec.knife_core_min_sdf, deepest_sample(core, p, geom, ns)});
    return rec;
  };

  try {
    for (;;) {
      if (q[1] <= cfg.sim.board_height) {
        res.status = EpisodeStatus::Completed;
        break;
      }
      if (forward >= cap) {
        res.status = EpisodeStatus::FailedStepLimit;
        res.message = "forward step cap reached";
        break;
      }
      Action a = next_action(sdf, pose_of(q), ps, cfg.policy);
      bool truncated = false;
      if (knife_core_min_sdf(core, pose_of(raw_after(q, a)), geom, ns) < 0.0) {
        // Bisect to the first contact; hi always penetrates.
        double lo = 0.0, hi = 1.0;
        for (int k = 0; k < cfg.max_bisections; ++k) {
          const Action th{hi * a.dpos, hi * a.dtheta};
          if (std::abs(knife_core_min_sdf(core, pose_of(raw_after(q, th)), geom, ns)) < cfg.contact_tolerance)
            break;
          const double mid = 0.5 * (lo + hi);
          const Action am{mid * a.dpos, mid * a.dtheta};
          (knife_core_min_sdf(core, pose_of(raw_after(q, am)), geom, ns) < 0.0 ? hi : lo) = mid;
        }
        a = Action{hi * a.dpos, hi * a.dtheta};
        truncated = true;
      }
      const StepRecord rec = execute(a, false, truncated);
      ++forward;
      record_forward(ps, a);
      if (rec.energy > cfg.limits.max_step_energy) {
        res.status = EpisodeStatus::FailedEnergy;
        res.message = "step energy limit exceeded";
        break;
      }
      if (truncated || rec.knife_core_min_sdf < 0.0) {
        res.collision_events.push_back({res.steps.size() - 1, records.back().deepest});
        if (static_cast<int>(res.collision_events.size()) > cfg.limits.max_collisions) {
          res.status = EpisodeStatus::FailedCollisions;
          res.message = "collision limit exceeded";
          break;
        }
        ps = on_collision(ps, cfg.policy);
        while (ps.phase == Phase::Retracting) {
          const Action r = retract_action(ps, pose_of(q), cfg.policy);
          execute(r, true, false);
        }
        sdf = estimate(static_cast<long>(res.steps.size()) - 1);
        continue;
      }
      ps = advance_schedule(ps, cfg.policy);
    }
  } catch (const NumericalFailure& e) {
    res.status = EpisodeStatus::NumericalFailure;
    res.message = e.what();
  }
  res.cut_mass_ratio = state.initial_soft_mass > 0.0
                           ? cut_mass_mpm(state, state.tip_path, res.status != EpisodeStatus::Completed) /
                                 state.initial_soft_mass
                           : 0.0;
  return res;
}

Metrics compute_metrics(const EpisodeResult& r) {
  Metrics m;
  m.completion = r.status == EpisodeStatus::Completed ? 1.0 : 0.0;
  m.cut_mass_ratio = r.cut_mass_ratio;
  const auto e = r.forward_energies();
  const std::size_t n = e.size();
  m.collision_ratio = n > 0 ? static_cast<double>(r.collision_events.size()) / static_cast<double>(n) : 0.0;
  double sum = 0.0;
  for (double v : e) {
    sum += v;
    m.max_energy = std::max(m.max_energy, v);
  }
  m.avg_energy = n > 0 ? sum / static_cast<double>(n) : 0.0;
  return m;
}

Metrics mean_metrics(const std::vector<Metrics>& ms) {
  Metrics m;
  if (ms.empty()) return m;
  for (const auto& x : ms) {
    m.completion += x.completion;
    m.cut_mass_ratio += x.cut_mass_ratio;
    m.collision_ratio += x.collision_ratio;
    m.avg_energy += x.avg_energy;
    m.max_energy += x.max_energy;
  }
  const double n = static_cast<double>(ms.size());
  m.completion /= n;
  m.cut_mass_ratio /= n;
  m.collision_ratio /= n;
  m.avg_energy /= n;
  m.max_energy /= n;
  return m;
}

ReplayReport replay_episode(const CoreShape& core, const EpisodeConfig& cfg, const EpisodeResult& r) {
  ReplayReport rep;
  const KnifePose start = pose_of(r.start);
  SimState state = init_scene(core, cfg.sim, cfg.seed, start);
  Vec3 q = r.start;
  auto fail = [&](std::size_t i, const std::string& what) {
    rep.identical = false;
    std::ostringstream os;
    os << "step " << i << ": " << what;
    rep.mismatch = os.str();
  };
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const StepLog& s = r.steps[i];
    const Vec3 q1 = raw_after(q, s.action);
    StepRecord rec;
    try {
      rec = advance(state, q, q1);
    } catch (const NumericalFailure& e) {
      fail(i, std::string("numerical failure on replay: ") + e.what());
      return rep;
    }
    q = q1;
    ++rep.steps_checked;
    if (q1 != s.pose) return fail(i, "pose differs"), rep;
    if (rec.energy != s.energy) return fail(i, "energy differs"), rep;
    if (rec.knife_core_min_sdf != s.min_sdf) return fail(i, "clearance differs"), rep;
  }
  const double ratio = state.initial_soft_mass > 0.0
                           ? cut_mass_mpm(state, state.tip_path, r.status != EpisodeStatus::Completed) /
                                 state.initial_soft_mass
                           : 0.0;
  if (r.status != EpisodeStatus::NumericalFailure && ratio != r.cut_mass_ratio)
    fail(r.steps.size(), "cut mass ratio differs");
  return rep;
}

std::vector<EvalRow> evaluate(const std::vector<EvalSplit>& splits,
                              const std::vector<PolicyVariant>& variants, const EpisodeConfig& base,
                              std::vector<EvalEpisode>* episodes, const EpisodeCallback& on_episode,
                              int threads) {
  std::vector<EvalEpisode> jobs;
  for (const auto& sp : splits)
    for (auto v : variants)
      for (std::size_t i = 0; i < sp.cores.size(); ++i) {
        EvalEpisode e;
        e.split = sp.name;
        e.variant = v;
        e.core_index = i;
        e.core = sp.cores[i];
        e.config = base;
        e.config.policy = variant_config(v, base.policy);
        jobs.push_back(std::move(e));
      }
  std::atomic<std::size_t> next{0};
  std::mutex cb_mu;
  auto worker = [&]() {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      EvalEpisode& e = jobs[k];
      try {
        e.result = run_episode(e.core, e.config);
      } catch (const std::exception& ex) {
        e.result.status = EpisodeStatus::NumericalFailure;
        e.result.message = ex.what();
      }
      e.metrics = compute_metrics(e.result);
      if (on_episode) {
        std::lock_guard<std::mutex> lock(cb_mu);
        on_episode(e);
      }
      // Snapshots are large; only the callback sees them.
      e.result.estimates.clear();
      e.result.estimates.shrink_to_fit();
    }
  };
  const int n = std::max(1, std::min<int>(thread_budget(threads), static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<EvalRow> rows;
  for (const auto& sp : splits)
    for (auto v : variants) {
      std::vector<Metrics> ms;
      for (const auto& e : jobs)
        if (e.split == sp.name && e.variant == v) ms.push_back(e.metrics);
      rows.push_back(EvalRow{sp.name, v, ms.size(), mean_metrics(ms)});
    }
  if (episodes) *episodes = std::move(jobs);
  return rows;
}

}  // namespace ninjacut
