#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ninjacut/geometry.hpp"

namespace ninjacut {

/// 256 x 256 cell-centred window over the square workspace.
GridSpec workspace_window(double domain_size = 0.25, int cells = 256);

struct CollisionEvidence {
  std::vector<Vec2> collision_points;
  std::vector<KnifePose> collision_poses;
  GridSpec window;
  /// One flag per window cell; set cells are certified core-free.
  std::vector<std::uint8_t> free_space;

  explicit CollisionEvidence(const GridSpec& w = workspace_window())
      : window(w), free_space(w.size(), 0) {}

  bool is_free(const Vec2& p) const;
  std::size_t free_count() const;
  void validate() const;
};

/// One logged knife pose with the sensed clearance and the deepest edge sample.
struct EvidenceRecord {
  KnifePose pose;
  double min_sdf = 0.0;
  Vec2 deepest = Vec2::Zero();
};

/// Marks cells that lie entirely within `clearance` of some edge sample, which
/// the clearance certifies as core-free; the carved strip never exceeds the blade body.
void carve_free_space(CollisionEvidence& ev, const KnifePose& pose, double clearance,
                      const KnifeGeometry& geom, int n_samples);

/// Collision events are records whose clearance drops below zero after a
/// non-negative one; every other non-negative record carves free space.
CollisionEvidence build_evidence(std::span<const EvidenceRecord> records, const KnifeGeometry& geom,
                                 int n_samples, const GridSpec& window = workspace_window());

/// k points drawn uniformly by arc length on the contour (synthetic evidence protocol).
CollisionEvidence synthetic_evidence(const CoreShape& core, int k, CounterRng& rng,
                                     const GridSpec& window = workspace_window());

struct EstimatorConfig {
  CoreFamily prior = CoreFamily::Spline3;
  int grid_per_axis = 21;
  double sigma_c = 0.002;
  double eps_c = 0.004;
  double r_resid = 0.006;
  double threshold = 0.3;

  /// Points farther than this from a candidate contour are not explained by it.
  double band() const { return eps_c; }
  void validate() const;
};

struct CoreEstimate {
  GridSpec window;
  std::vector<double> probability;
  std::vector<std::uint8_t> mask;
  SdfGrid sdf;
  double threshold_used = 0.0;
  /// Candidates consistent with free space and with every explainable point.
  std::size_t admissible = 0;
  std::size_t free_space_survivors = 0;
  /// Collision points no surviving candidate explains (covered by residual disks).
  std::vector<Vec2> residual_points;

  std::size_t mask_count() const;
};

/// Model-based replacement for the learned estimator: a posterior over a dense
/// grid of prior-family offsets, carved by free space, with residual inflation.
class Estimator {
 public:
  explicit Estimator(const EstimatorConfig& cfg = {}, const Vec2& anchor = default_anchor(),
                     const GridSpec& window = workspace_window());

  CoreEstimate estimate(const CollisionEvidence& ev) const;
  CoreEstimate estimate(const CollisionEvidence& ev, double threshold) const;

  const EstimatorConfig& config() const { return cfg_; }
  std::size_t candidate_count() const;

  struct Bank;

 private:
  EstimatorConfig cfg_;
  std::shared_ptr<const Bank> bank_;
};

CoreEstimate estimate_core(const CollisionEvidence& ev, const EstimatorConfig& cfg = {});

/// Mask from probability: threshold, remove free space, keep the component of the argmax.
std::vector<std::uint8_t> threshold_mask(const GridSpec& window, const std::vector<double>& prob,
                                         const std::vector<std::uint8_t>& free_space,
                                         double threshold);

/// Exact Euclidean signed distance of the mask boundary, negative inside.
SdfGrid mask_sdf(const GridSpec& window, const std::vector<std::uint8_t>& mask);
SdfGrid estimate_to_sdf(const CoreEstimate& est);

/// Ground-truth occupancy of the window by the core (cell centres).
std::vector<std::uint8_t> core_mask(const CoreShape& core, const GridSpec& window);
double mask_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);
/// Oracle estimate built from the true core (for ablations).
CoreEstimate oracle_estimate(const CoreShape& core, const GridSpec& window = workspace_window());

}  // namespace ninjacut
