#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "ninjacut/estimator.hpp"

using namespace ninjacut;

namespace {

constexpr int kSamples = 5;

EvidenceRecord record_at(const CoreShape& core, const KnifePose& pose) {
  EvidenceRecord r{pose, 1e9, Vec2::Zero()};
  for (const auto& s : edge_samples(pose, KnifeGeometry{}, kSamples)) {
    const double d = core_sdf(core, s);
    if (d < r.min_sdf) {
      r.min_sdf = d;
      r.deepest = s;
    }
  }
  return r;
}

/// Random walk of knife poses around the core, a mix of clear and penetrating records.
std::vector<EvidenceRecord> random_log(const CoreShape& core, CounterRng& rng, int n) {
  std::vector<EvidenceRecord> log;
  for (int k = 0; k < n; ++k) {
    const Vec2 tip(rng.uniform(core.min_x() - 0.02, core.max_x() + 0.04), rng.uniform(0.03, 0.16));
    log.push_back(record_at(core, KnifePose{tip, rng.uniform(-kPi, kPi)}));
  }
  return log;
}

bool subset(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  for (std::size_t c = 0; c < a.size(); ++c)
    if (a[c] && !b[c]) return false;
  return true;
}

}  // namespace

TEST_SUITE("estimator") {
  TEST_CASE("free-space cells are certified outside the true core") {
    CounterRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const CoreShape core = gen_core(CoreFamily::Spline3, 100 + trial);
      const auto ev = build_evidence(random_log(core, rng, 60), KnifeGeometry{}, kSamples);
      const GridSpec& g = ev.window;
      const double half_diag = 0.5 * std::sqrt(2.0) * g.cell_size;
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          if (ev.free_space[g.index(i, j)]) REQUIRE(core_sdf(core, g.cell_center(i, j)) > half_diag);
    }
  }

  TEST_CASE("mask never overlaps free space and sdf is non-negative there") {
    const Estimator est;
    CounterRng rng(4);
    for (int trial = 0; trial < 25; ++trial) {
      const CoreShape core = gen_core(CoreFamily::Spline3, 200 + trial);
      const auto ev = build_evidence(random_log(core, rng, 40), KnifeGeometry{}, kSamples);
      const auto e = est.estimate(ev);
      REQUIRE(e.mask_count() > 0);
      for (std::size_t c = 0; c < ev.free_space.size(); ++c)
        if (ev.free_space[c]) {
          REQUIRE(e.mask[c] == 0);
          REQUIRE(e.sdf.values[c] >= 0.0);
        }
    }
  }

  TEST_CASE("clear log yields no collision points, one penetration yields exactly one") {
    const CoreShape core = gen_core(CoreFamily::Spline3, 7);
    std::vector<EvidenceRecord> log;
    const double x = core.max_x() + 0.03;
    for (double y = 0.2; y > 0.06; y -= 0.01) log.push_back(record_at(core, KnifePose{Vec2(x, y), kPi / 2}));
    auto ev = build_evidence(log, KnifeGeometry{}, kSamples);
    CHECK(ev.collision_points.empty());
    CHECK(ev.free_count() > 0);

    // Slide left until the deepest edge sample sits just inside the contour.
    double lo = core.min_x(), hi = x;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (record_at(core, KnifePose{Vec2(mid, 0.07), kPi / 2}).min_sdf < 0.0 ? lo : hi) = mid;
    }
    const EvidenceRecord hit = record_at(core, KnifePose{Vec2(lo, 0.07), kPi / 2});
    REQUIRE(hit.min_sdf < 0.0);
    log.push_back(hit);
    log.push_back(hit);  // still in contact: not a new event
    ev = build_evidence(log, KnifeGeometry{}, kSamples);
    REQUIRE(ev.collision_points.size() == 1);
    CHECK(std::abs(core_sdf(core, ev.collision_points[0])) <= ev.window.cell_size);
    CHECK_NOTHROW(ev.validate());

    log.push_back(record_at(core, KnifePose{Vec2(x, 0.07), kPi / 2}));
    log.push_back(hit);
    CHECK(build_evidence(log, KnifeGeometry{}, kSamples).collision_points.size() == 2);
  }

  TEST_CASE("no evidence gives the prior predictive occupancy") {
    const EstimatorConfig cfg;
    const Estimator est(cfg);
    const auto e = est.estimate(CollisionEvidence{});
    CHECK(e.admissible == est.candidate_count());
    CHECK(est.candidate_count() == 21u * 21u * 21u);

    // Independent oracle: point-in-polygon over every prior candidate.
    std::vector<std::vector<Vec2>> polys;
    for (int a = 0; a < 21; ++a)
      for (int b = 0; b < 21; ++b)
        for (int c = 0; c < 21; ++c) {
          auto off = [](int k) { return -kOffsetRange + 2.0 * kOffsetRange * k / 20.0; };
          const std::vector<double> p{off(c), off(b), off(a)};
          polys.push_back(make_core(CoreFamily::Spline3, p, default_anchor()).contour);
        }
    const GridSpec& g = e.window;
    CounterRng rng(5);
    for (int n = 0; n < 40; ++n) {
      const Vec2 q(rng.uniform(default_anchor().x() - 0.02, default_anchor().x() + 0.08),
                   rng.uniform(default_anchor().y() + 0.002, default_anchor().y() + kCoreHeight - 0.002));
      const int i = static_cast<int>((q.x() - g.origin.x()) / g.cell_size);
      const int j = static_cast<int>((q.y() - g.origin.y()) / g.cell_size);
      const Vec2 cc = g.cell_center(i, j);
      double hits = 0.0;
      for (const auto& p : polys) hits += point_in_polygon(p, cc);
      CHECK(std::abs(e.probability[g.index(i, j)] - hits / polys.size()) <= 0.02);
    }
  }

  TEST_CASE("masks are nested across thresholds") {
    const Estimator est;
    CounterRng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      const CoreShape core = gen_core(CoreFamily::Spline3, 300 + trial);
      CounterRng pick(trial);
      const auto ev = synthetic_evidence(core, 1 + trial % 5, pick);
      const auto m15 = est.estimate(ev, 0.15).mask;
      const auto m30 = est.estimate(ev, 0.3).mask;
      const auto m50 = est.estimate(ev, 0.5).mask;
      CHECK(subset(m50, m30));
      CHECK(subset(m30, m15));
    }
  }

  TEST_CASE("adding collision points never grows the admissible set") {
    const Estimator est;
    for (int trial = 0; trial < 8; ++trial) {
      const CoreShape core = gen_core(CoreFamily::Spline3, 400 + trial);
      CounterRng rng(trial);
      const auto full = synthetic_evidence(core, 8, rng);
      std::size_t prev = est.candidate_count();
      for (std::size_t k = 1; k <= full.collision_points.size(); ++k) {
        CollisionEvidence ev(full.window);
        ev.collision_points.assign(full.collision_points.begin(), full.collision_points.begin() + k);
        ev.collision_poses.assign(full.collision_poses.begin(), full.collision_poses.begin() + k);
        const std::size_t a = est.estimate(ev).admissible;
        CHECK(a <= prev);
        prev = a;
      }
    }
  }

  TEST_CASE("synthetic evidence lies on the contour and is explained by the estimate") {
    const EstimatorConfig cfg;
    const Estimator est(cfg);
    for (int trial = 0; trial < 8; ++trial) {
      const CoreShape core = gen_core(CoreFamily::Spline3, 500 + trial);
      CounterRng rng(trial);
      const auto ev = synthetic_evidence(core, 9, rng);
      const auto e = est.estimate(ev);
      const double h = ev.window.cell_size;
      for (const auto& p : ev.collision_points) {
        CHECK(std::abs(core_sdf(core, p)) < 1e-12);
        CHECK(std::abs(e.sdf.sample(p)) <= std::max(cfg.eps_c, cfg.r_resid) + 2.0 * h);
      }
    }
  }

  TEST_CASE("unexplainable point is covered by a residual disk") {
    const Estimator est;
    CollisionEvidence ev;
    // Well right of any prior candidate front.
    const Vec2 p = default_anchor() + Vec2(kFrontBase + kOffsetRange + 0.03, 0.5 * kCoreHeight);
    ev.collision_points.push_back(p);
    ev.collision_poses.push_back(KnifePose{p, kPi / 2});
    const auto e = est.estimate(ev);
    REQUIRE(e.residual_points.size() == 1);
    CHECK(e.sdf.sample(p) < 0.0);
  }

  TEST_CASE("mask sdf of a disk matches the radius") {
    const GridSpec g = workspace_window();
    const Vec2 c(0.1, 0.1);
    const double radius = 0.02;
    std::vector<std::uint8_t> m(g.size(), 0);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) m[g.index(i, j)] = (g.cell_center(i, j) - c).norm() <= radius;
    const SdfGrid s = mask_sdf(g, m);
    CHECK(std::abs(s.sample(c) + radius) <= g.cell_size);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const double exact = (g.cell_center(i, j) - c).norm() - radius;
        REQUIRE(std::abs(s.at(i, j) - exact) <= g.cell_size);
      }
  }

  TEST_CASE("estimate sdf is 1-Lipschitz between neighbouring cells") {
    const Estimator est;
    CounterRng rng(8);
    const CoreShape core = gen_core(CoreFamily::Spline3, 600);
    const auto e = est.estimate(build_evidence(random_log(core, rng, 50), KnifeGeometry{}, kSamples));
    const GridSpec& g = e.window;
    for (int j = 0; j + 1 < g.ny; ++j)
      for (int i = 0; i + 1 < g.nx; ++i) {
        REQUIRE(std::abs(e.sdf.at(i + 1, j) - e.sdf.at(i, j)) <= g.cell_size * (1 + 1e-9));
        REQUIRE(std::abs(e.sdf.at(i, j + 1) - e.sdf.at(i, j)) <= g.cell_size * (1 + 1e-9));
      }
  }

  TEST_CASE("iou of identical masks is one and of disjoint masks zero") {
    const std::vector<std::uint8_t> a{1, 1, 0, 0}, b{0, 0, 1, 1};
    CHECK(mask_iou(a, a) == 1.0);
    CHECK(mask_iou(a, b) == 0.0);
    const CoreShape core = gen_core(CoreFamily::Spline3, 9);
    const auto o = oracle_estimate(core);
    CHECK(mask_iou(o.mask, core_mask(core, o.window)) == 1.0);
  }

  TEST_CASE("invalid inputs are rejected") {
    EstimatorConfig cfg;
    cfg.threshold = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.prior = CoreFamily::Rectangle;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CollisionEvidence ev;
    ev.free_space.assign(ev.free_space.size(), 1);
    ev.collision_points.push_back(Vec2(0.1, 0.1));
    ev.collision_poses.push_back(KnifePose{});
    CHECK_THROWS_AS(ev.validate(), std::invalid_argument);
    CHECK_THROWS_AS(Estimator().estimate(CollisionEvidence(workspace_window(0.25, 128))), std::invalid_argument);
  }
}
