#include <cmath>
#include <vector>

#include "doctest.h"

#include "ninjacut/experiments.hpp"
#include "ninjacut/trajopt.hpp"

using namespace ninjacut;

TEST_SUITE("trajopt") {
  TEST_CASE("initial descent clears every in-distribution core") {
    const CollisionLossConfig cfg;
    for (std::uint64_t s = 0; s < 10; ++s) {
      Scene scene{gen_core(CoreFamily::Spline3, s), SimConfig{}, s};
      const Trajectory tr = init_trajectory(scene, cfg);
      CHECK(tr.initial_pose.tip.x() >= scene.core.max_x() + cfg.safety_margin);
      const double drop = tr.initial_pose.tip.y() - scene.sim.board_height;
      CHECK(tr.steps() == static_cast<std::size_t>(std::ceil(drop / 0.002 - 1e-9)));
      double col = 0.0;
      for (const auto& p : tr.poses()) col += collision_loss(p, scene.core, scene.sim.knife, cfg);
      CHECK(col == 0.0);
    }
  }

  TEST_CASE("no interaction gives a zero gradient") {
    Scene scene{gen_core(CoreFamily::Spline3, 1), SimConfig::reduced(), 0};
    scene.sim.gravity = 0.0;
    scene.sim.soft_right = 0.14;
    Trajectory tr;
    tr.initial_pose = KnifePose{Vec2(0.215, 0.2), kPi / 2};
    for (int t = 0; t < 4; ++t) {
      tr.free_params.push_back(-kPi / 2 + 0.1 * t);
      tr.free_params.push_back(0.3);
    }
    const auto g = gradient(tr, scene, LossWeights{}, CollisionLossConfig{}, OptimizerConfig{});
    for (double v : g.grad) CHECK(v == 0.0);
  }

  TEST_CASE("reverse mode agrees with central differences on a small scene") {
    const GradcheckSpec spec;
    const GradcheckCase c = gradcheck_case(spec, 1);
    OptimizerConfig opt;
    const auto r = gradient(c.trajectory, c.scene, LossWeights{}, CollisionLossConfig{}, opt);
    opt.gradient_mode = GradientMode::FiniteDifference;
    const auto f = gradient(c.trajectory, c.scene, LossWeights{}, CollisionLossConfig{}, opt);
    CHECK(relative_l2(r.grad, f.grad) < 1e-3);
    CHECK(cosine_similarity(r.grad, f.grad) > 0.999);
    CHECK(r.loss.total == f.loss.total);
  }

  TEST_CASE("collision-only gradient matches the per-pose analytic chain rule") {
    // Knife hugging a rectangle inside the margin, no material in reach: the
    // only loss is the collision term, differentiated through the pose recursion.
    Scene scene{make_core(CoreFamily::Rectangle, std::vector<double>{0.03, 0.06}, default_anchor()),
                SimConfig::reduced(), 0};
    // Material stays more than one cell from the extended path, so the soft
    // cut ratio is locally constant.
    scene.sim.soft_right = 0.089;
    scene.sim.soft_top = 0.04;
    const LossWeights w{1.0, 0.0};
    Trajectory tr;
    tr.initial_pose = KnifePose{Vec2(0.095, 0.075), kPi / 2};
    for (int t = 0; t < 3; ++t) {
      tr.free_params.push_back(-kPi / 2 - 0.2);
      tr.free_params.push_back(0.5);
    }
    const auto g = gradient(tr, scene, w, CollisionLossConfig{}, OptimizerConfig{});
    REQUIRE(g.loss.collision_term > 0.0);
    // Chain rule: pose t depends on (phi_s, psi_s) for s < t.
    const auto poses = tr.raw_poses();
    std::vector<double> expect(tr.free_params.size(), 0.0);
    for (std::size_t t = 1; t < poses.size(); ++t) {
      Vec3 gp;
      const KnifePose p{Vec2(poses[t][0], poses[t][1]), poses[t][2]};
      collision_loss(p, scene.core, scene.sim.knife, CollisionLossConfig{}, gp);
      for (std::size_t s = 0; s < t; ++s) {
        const double phi = tr.free_params[2 * s], psi = tr.free_params[2 * s + 1];
        expect[2 * s] += tr.step_length * (-gp[0] * std::sin(phi) + gp[1] * std::cos(phi));
        expect[2 * s + 1] += gp[2] * tr.dtheta_max * (1.0 - std::tanh(psi) * std::tanh(psi));
      }
    }
    for (std::size_t k = 0; k < expect.size(); ++k)
      CHECK(g.grad[k] == doctest::Approx(expect[k]).epsilon(1e-6).scale(1e-12));
  }

  TEST_CASE("checkpoint interval does not change loss or gradient bits") {
    const GradcheckCase c = gradcheck_case(GradcheckSpec{}, 3);
    OptimizerConfig opt;
    std::vector<GradientResult> rs;
    for (int interval : {1, 8, 64}) {
      opt.checkpoint_interval = interval;
      rs.push_back(gradient(c.trajectory, c.scene, LossWeights{}, CollisionLossConfig{}, opt));
    }
    for (std::size_t k = 1; k < rs.size(); ++k) {
      CHECK(rs[k].loss.total == rs[0].loss.total);
      CHECK(rs[k].grad == rs[0].grad);
    }
  }

  TEST_CASE("sign-flipped adjoint is caught by the gradient check") {
    GradcheckSpec spec;
    spec.scenes = 2;
    const auto ok = run_gradcheck(spec, LossWeights{}, CollisionLossConfig{}, OptimizerConfig{});
    const auto bad =
        run_gradcheck(spec, LossWeights{}, CollisionLossConfig{}, OptimizerConfig{}, AdjointFault::SignFlip);
    CHECK(ok.pass());
    CHECK_FALSE(bad.pass());
    for (const auto& r : bad.rows) CHECK(r.cosine < 0.999);
  }

  TEST_CASE("zero iterations return the initial trajectory") {
    Scene scene{gen_core(CoreFamily::Spline3, 2), SimConfig::reduced(), 0};
    const Trajectory t0 = init_trajectory(scene, CollisionLossConfig{});
    OptimizerConfig opt;
    opt.iterations = 0;
    const auto res = optimize(t0, scene, LossWeights{}, CollisionLossConfig{}, opt);
    CHECK(res.best.free_params == t0.free_params);
    CHECK(res.history.size() == 1);
  }

  TEST_CASE("optimization bookkeeping: best is the argmin, best-so-far never rises, steps stay 2 mm") {
    const GradcheckCase c = gradcheck_case(GradcheckSpec{}, 0);
    OptimizerConfig opt;
    opt.iterations = 6;
    int calls = 0;
    const auto res = optimize(c.trajectory, c.scene, LossWeights{}, CollisionLossConfig{}, opt,
                              [&](int, const LossBreakdown&) { ++calls; });
    REQUIRE(res.history.size() == 7);
    CHECK(calls >= 6);
    double best = INFINITY, running = INFINITY;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < res.history.size(); ++k) {
      if (res.history[k].total < best) {
        best = res.history[k].total;
        arg = k;
      }
      CHECK(std::min(running, res.history[k].total) <= running);
      running = std::min(running, res.history[k].total);
    }
    CHECK(res.best_index == arg);
    CHECK(res.history.back().total <= res.history.front().total);
    for (const auto& a : res.best.actions()) {
      CHECK(a.dpos.norm() == doctest::Approx(0.002).epsilon(1e-14));
      CHECK(std::abs(a.dtheta) <= kDthetaMax);
    }
  }

  TEST_CASE("one core yields one demonstration re-evaluated at the evaluation scene") {
    OptimizerConfig opt;
    opt.iterations = 2;
    DemonstrationOptions o;
    o.evaluate_sim = SimConfig::reduced();
    const auto demos =
        collect_demonstrations({gen_core(CoreFamily::Spline3, 5)}, LossWeights{}, CollisionLossConfig{}, opt, o);
    REQUIRE(demos.size() == 1);
    CHECK_FALSE(demos[0].failed);
    CHECK(demos[0].loss_history.size() == 3);
    const auto again =
        collect_demonstrations({gen_core(CoreFamily::Spline3, 5)}, LossWeights{}, CollisionLossConfig{}, opt, o);
    CHECK(again[0].trajectory.free_params == demos[0].trajectory.free_params);
    CHECK(again[0].breakdown_final.total == demos[0].breakdown_final.total);
  }

  TEST_CASE("gradient mode names round-trip") {
    for (auto m : {GradientMode::ReverseMode, GradientMode::FiniteDifference})
      CHECK(gradient_mode_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(gradient_mode_from_string("adjoint"), std::invalid_argument);
  }
}
