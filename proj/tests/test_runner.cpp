#include <cmath>
#include <vector>

#include "doctest.h"

#include "ninjacut/runner.hpp"

using namespace ninjacut;

namespace {

EpisodeConfig small_config() {
  EpisodeConfig c;
  c.sim = SimConfig::reduced();
  return c;
}

StepLog step(double energy, bool retraction = false) {
  StepLog s;
  s.energy = energy;
  s.retraction = retraction;
  return s;
}

}  // namespace

TEST_SUITE("runner") {
  TEST_CASE("metrics of a hand-built episode") {
    EpisodeResult r;
    for (double e : {0.1, 0.3, 0.2, 0.4}) r.steps.push_back(step(e));
    r.steps.push_back(step(9.0, true));  // retractions do not count
    r.collision_events.push_back({1, Vec2::Zero()});
    r.cut_mass_ratio = 0.75;
    const Metrics m = compute_metrics(r);
    CHECK(m.completion == 1.0);
    CHECK(m.cut_mass_ratio == 0.75);
    CHECK(m.collision_ratio == 0.25);
    CHECK(m.avg_energy == doctest::Approx(0.25));
    CHECK(m.max_energy == 0.4);
    r.status = EpisodeStatus::FailedEnergy;
    CHECK(compute_metrics(r).completion == 0.0);

    const Metrics one = mean_metrics({m});
    CHECK(one.completion == m.completion);
    CHECK(one.avg_energy == m.avg_energy);
    CHECK(one.max_energy == m.max_energy);
    const Metrics none = mean_metrics({});
    CHECK(none.completion == 0.0);
  }

  TEST_CASE("status names round-trip") {
    for (auto s : {EpisodeStatus::Completed, EpisodeStatus::FailedCollisions, EpisodeStatus::FailedEnergy,
                   EpisodeStatus::FailedStepLimit, EpisodeStatus::NumericalFailure})
      CHECK(episode_status_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(episode_status_from_string("done"), std::invalid_argument);
  }

  TEST_CASE("oracle estimate cuts the soft region without collisions") {
    EpisodeConfig cfg = small_config();
    cfg.oracle = true;
    const CoreShape core = gen_core(CoreFamily::Spline3, 11);
    const EpisodeResult r = run_episode(core, cfg);
    CHECK(r.status == EpisodeStatus::Completed);
    CHECK(r.collision_events.empty());
    CHECK(r.cut_mass_ratio > 0.8);
    CHECK(r.cut_mass_ratio <= 1.0);
    const auto poses = r.poses();
    CHECK(poses.size() == r.steps.size() + 1);
    CHECK(poses.back().tip.y() <= cfg.sim.board_height);
    for (const auto& s : r.steps) CHECK(s.min_sdf >= 0.0);
  }

  TEST_CASE("collision handling: truncation, retraction and the collision limit") {
    EpisodeConfig cfg = small_config();
    cfg.policy = variant_config(PolicyVariant::Greedy, cfg.policy);
    const CoreShape core = gen_core(CoreFamily::Spline3, 12);
    const EpisodeResult r = run_episode(core, cfg);
    REQUIRE_FALSE(r.collision_events.empty());
    const auto& ev = r.collision_events.front();
    const StepLog& hit = r.steps[ev.step];
    CHECK(hit.truncated);
    CHECK_FALSE(hit.retraction);
    CHECK(std::abs(core_sdf(core, ev.point)) <= 2e-3);
    // Retractions follow the collision immediately.
    REQUIRE(ev.step + 1 < r.steps.size());
    CHECK(r.steps[ev.step + 1].retraction);
    CHECK(r.steps[ev.step + 1].phase == Phase::Retracting);
    // One estimate before the episode and one after each handled collision.
    CHECK(r.estimate_steps.front() == -1);

    cfg.limits.max_collisions = 0;
    const EpisodeResult f = run_episode(core, cfg);
    CHECK(f.status == EpisodeStatus::FailedCollisions);
    CHECK(f.collision_events.size() == 1);
    CHECK(compute_metrics(f).completion == 0.0);
    CHECK(f.cut_mass_ratio >= 0.0);
    CHECK(f.cut_mass_ratio < 1.0);
  }

  TEST_CASE("non-adaptive policy never raises the tolerance") {
    EpisodeConfig cfg = small_config();
    cfg.policy = variant_config(PolicyVariant::NonAdaptive, cfg.policy);
    const EpisodeResult r = run_episode(gen_core(CoreFamily::Spline3, 13), cfg);
    for (const auto& s : r.steps) CHECK(s.tolerance == 0.0);
  }

  TEST_CASE("replay reproduces a logged episode bit for bit") {
    EpisodeConfig cfg = small_config();
    cfg.policy = variant_config(PolicyVariant::Greedy, cfg.policy);
    const CoreShape core = gen_core(CoreFamily::Spline3, 14);
    EpisodeResult r = run_episode(core, cfg);
    const ReplayReport ok = replay_episode(core, cfg, r);
    CHECK(ok.identical);
    CHECK(ok.steps_checked == r.steps.size());

    REQUIRE(r.steps.size() > 3);
    r.steps[2].action.dpos.x() += 1e-12;
    const ReplayReport bad = replay_episode(core, cfg, r);
    CHECK_FALSE(bad.identical);
    CHECK(bad.mismatch.find("step 2") == 0);
  }

  TEST_CASE("evaluate records every episode and averages per split and variant") {
    EpisodeConfig cfg = small_config();
    cfg.oracle = true;
    cfg.limits.max_forward_steps = 6;
    const std::vector<CoreShape> cores{gen_core(CoreFamily::Spline3, 15), gen_core(CoreFamily::Spline2, 16)};
    std::vector<EvalEpisode> eps;
    std::size_t seen = 0;
    const auto rows = evaluate({EvalSplit{"a", cores}}, {PolicyVariant::Adaptive, PolicyVariant::NonAdaptive}, cfg,
                               &eps, [&](const EvalEpisode&) { ++seen; }, 1);
    REQUIRE(rows.size() == 2);
    CHECK(eps.size() == 4);
    CHECK(seen == 4);
    for (const auto& row : rows) {
      CHECK(row.episodes == 2);
      // Six forward steps never reach the board: every episode fails on the step cap.
      CHECK(row.mean.completion == 0.0);
    }
    for (const auto& e : eps) {
      CHECK(e.result.status == EpisodeStatus::FailedStepLimit);
      CHECK(e.result.estimates.empty());
    }
  }

  TEST_CASE("start pose sits at the target clearance on the top row") {
    const SimConfig sim;
    const PolicyConfig pol;
    const CoreShape core = gen_core(CoreFamily::Spline3, 17);
    const auto est = oracle_estimate(core);
    const KnifePose p = find_start_pose(est.sdf, sim, pol);
    CHECK(p.tip.y() == doctest::Approx(sim.soft_top + pol.step_length));
    CHECK(est.sdf.sample(p.tip) <= pol.base_clearance + 0.5 * pol.band);
    CHECK(est.sdf.sample(p.tip + Vec2(est.window.cell_size, 0.0)) > pol.base_clearance + 0.5 * pol.band);
  }
}
