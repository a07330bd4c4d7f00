#include <cmath>
#include <vector>

#include "doctest.h"

#include "ninjacut/objectives.hpp"
#include "ninjacut/trajopt.hpp"

using namespace ninjacut;

namespace {

CoreShape rect_core() {
  const std::vector<double> wh{0.03, 0.06};
  return make_core(CoreFamily::Rectangle, wh, default_anchor());
}

/// Right edge of rect_core sits at anchor.x + width.
double rect_edge() { return default_anchor().x() + 0.03; }

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("single sample on the surface contributes d_hat^k") {
    CollisionLossConfig cfg;
    cfg.n_samples = 1;
    const KnifePose pose{Vec2(rect_edge(), 0.05), 0.0};
    CHECK(collision_loss(pose, rect_core(), KnifeGeometry{}, cfg) == doctest::Approx(1.6e-7).epsilon(1e-12));
  }

  TEST_CASE("five samples pointing away from the surface: hand-computed sum") {
    // Samples at 0, 5, 10, 15, 20 mm clearance: 0.02^4 + 0.015^4 + 0.01^4 + 0.005^4 + 0.
    const KnifePose pose{Vec2(rect_edge(), 0.05), 0.0};
    const double expected = 1.6e-7 + 5.0625e-8 + 1e-8 + 6.25e-10;
    CHECK(collision_loss(pose, rect_core(), KnifeGeometry{}, CollisionLossConfig{}) ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("zero iff every sample clears the safety margin") {
    const CollisionLossConfig cfg;
    const KnifeGeometry g;
    CHECK(collision_loss(KnifePose{Vec2(rect_edge() + 0.02, 0.05), kPi / 2}, rect_core(), g, cfg) == 0.0);
    CHECK(collision_loss(KnifePose{Vec2(rect_edge() + 0.0199, 0.05), kPi / 2}, rect_core(), g, cfg) > 0.0);
    CounterRng rng(21);
    for (int k = 0; k < 300; ++k) {
      const KnifePose p{Vec2(rng.uniform(0.05, 0.2), rng.uniform(0.02, 0.12)), rng.uniform(-kPi, kPi)};
      double min_clear = 1e9;
      for (const auto& s : edge_samples(p, g, cfg.n_samples)) min_clear = std::min(min_clear, core_sdf(rect_core(), s));
      const double l = collision_loss(p, rect_core(), g, cfg);
      CHECK((l == 0.0) == (min_clear >= cfg.safety_margin));
    }
  }

  TEST_CASE("non-decreasing while translating along the inward normal") {
    const CollisionLossConfig cfg;
    double prev = -1.0;
    for (double x = rect_edge() + 0.03; x > rect_edge() - 0.01; x -= 0.0005) {
      const double l = collision_loss(KnifePose{Vec2(x, 0.05), kPi / 2 + 0.3}, rect_core(), KnifeGeometry{}, cfg);
      CHECK(l >= prev);
      prev = l;
    }
  }

  TEST_CASE("analytic gradient matches the closed-form chain rule") {
    // Horizontal blade right of the flat edge: d_i = -(x_tip + s_i cos(theta) - x_edge).
    const CollisionLossConfig cfg;
    const KnifeGeometry g;
    const double theta = 0.2;
    const KnifePose pose{Vec2(rect_edge() + 0.003, 0.05), theta};
    Vec3 grad;
    const double l = collision_loss(pose, rect_core(), g, cfg, grad);
    double L = 0.0, gx = 0.0, gt = 0.0;
    for (int i = 0; i < cfg.n_samples; ++i) {
      const double s = g.spine_offset * i / (cfg.n_samples - 1);
      const double clear = pose.tip.x() + s * std::cos(theta) - rect_edge();
      const double a = std::max(cfg.safety_margin - clear, 0.0);
      L += std::pow(a, cfg.exponent);
      gx += -cfg.exponent * std::pow(a, cfg.exponent - 1);
      gt += cfg.exponent * std::pow(a, cfg.exponent - 1) * s * std::sin(theta);
    }
    CHECK(l == doctest::Approx(L).epsilon(1e-12));
    CHECK(grad[0] == doctest::Approx(gx).epsilon(1e-6));
    CHECK(grad[1] == doctest::Approx(0.0).scale(std::abs(gx)).epsilon(1e-9));
    CHECK(grad[2] == doctest::Approx(gt).epsilon(1e-6));
  }

  TEST_CASE("C1 smoothness probe: gradient agrees with finite differences away from the margin") {
    const CollisionLossConfig cfg;
    const KnifeGeometry g;
    const CoreShape core = gen_core(CoreFamily::Spline3, 5);
    CounterRng rng(2);
    int checked = 0;
    for (int k = 0; k < 200 && checked < 40; ++k) {
      const KnifePose p{Vec2(core.max_x() + rng.uniform(-0.005, 0.02), rng.uniform(0.03, 0.08)),
                        kPi / 2 + rng.uniform(-0.5, 0.5)};
      Vec3 grad;
      if (collision_loss(p, core, g, cfg, grad) == 0.0) continue;
      const double h = 1e-7;
      for (int c = 0; c < 3; ++c) {
        KnifePose a = p, b = p;
        if (c < 2) {
          a.tip[c] += h;
          b.tip[c] -= h;
        } else {
          a.theta += h;
          b.theta -= h;
        }
        const double fd = (collision_loss(a, core, g, cfg) - collision_loss(b, core, g, cfg)) / (2 * h);
        CHECK(grad[c] == doctest::Approx(fd).epsilon(1e-4).scale(1e-12));
      }
      ++checked;
    }
    CHECK(checked >= 20);
  }

  TEST_CASE("energy objective sums and maximizes") {
    CHECK(energy_objective({}).total == 0.0);
    CHECK(energy_objective({}).max == 0.0);
    std::vector<StepRecord> recs(3);
    recs[0].energy = 0.1;
    recs[1].energy = 0.2;
    recs[2].energy = 0.3;
    const auto e = energy_objective(recs);
    CHECK(e.total == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(e.max == 0.3);
    CHECK(e.series.size() == 3);
  }

  TEST_CASE("trajectory far from the object has zero loss") {
    Scene scene{gen_core(CoreFamily::Spline3, 1), SimConfig::reduced(), 0};
    scene.sim.soft_right = 0.16;
    Trajectory tr;
    tr.initial_pose = KnifePose{Vec2(0.22, 0.2), kPi / 2};
    for (int t = 0; t < 5; ++t) {
      tr.free_params.push_back(0.0);
      tr.free_params.push_back(0.0);
    }
    const LossBreakdown b = total_loss(tr, scene, LossWeights{}, CollisionLossConfig{});
    CHECK(b.mass_term == 0.0);
    CHECK(b.collision_term == 0.0);
    CHECK(b.energy_term == 0.0);
    CHECK(b.total == 0.0);
  }

  TEST_CASE("zero weights reduce the total to the mass term and total_loss is deterministic") {
    Scene scene{gen_core(CoreFamily::Spline3, 1), SimConfig::reduced(), 3};
    const Trajectory tr = init_trajectory(scene, CollisionLossConfig{});
    Trajectory bent = tr;
    for (std::size_t t = 0; t < bent.steps(); ++t) bent.free_params[2 * t] += 0.2;
    const LossBreakdown b = total_loss(bent, scene, LossWeights{0.0, 0.0}, CollisionLossConfig{});
    CHECK(b.total == b.mass_term);
    const LossBreakdown c = total_loss(bent, scene, LossWeights{0.0, 0.0}, CollisionLossConfig{});
    CHECK(c.total == b.total);
    CHECK(c.energy_term == b.energy_term);
  }

  TEST_CASE("rapid rotation costs more peak energy than contour following") {
    Scene scene{gen_core(CoreFamily::Spline3, 4), SimConfig::reduced(), 1};
    const Trajectory follow = init_trajectory(scene, CollisionLossConfig{});
    Trajectory spin = follow;
    for (std::size_t t = 4; t < spin.steps(); ++t) spin.free_params[2 * t + 1] = (t % 10 < 5) ? 5.0 : -5.0;
    const auto a = total_loss(follow, scene, LossWeights{}, CollisionLossConfig{});
    const auto b = total_loss(spin, scene, LossWeights{}, CollisionLossConfig{});
    CHECK(b.max_step_energy > a.max_step_energy);
  }
}
