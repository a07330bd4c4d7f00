#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "ninjacut/estimator.hpp"
#include "ninjacut/mpm.hpp"
#include "ninjacut/objectives.hpp"
#include "ninjacut/policy.hpp"
#include "ninjacut/runner.hpp"
#include "ninjacut/trajopt.hpp"

namespace ninjacut {

inline constexpr int kSchemaVersion = 1;

struct DatasetSpec {
  int train = 20;
  int eval_in = 10;
  int eval_ood = 10;
  std::uint64_t seed = 2024;
  /// Out-of-distribution families, cycled over the OOD split.
  std::vector<CoreFamily> ood_families = {CoreFamily::Spline2, CoreFamily::Spline4, CoreFamily::Triangle,
                                          CoreFamily::Rectangle, CoreFamily::Ellipse};

  /// 300 / 50 / 50 split.
  static DatasetSpec full_scale();
  void validate() const;
};

struct GradcheckSpec {
  int scenes = 10;
  int actions = 10;
  std::uint64_t seed = 7;
  double soft_top = 0.06;
  double soft_right = 0.16;
  double rel_l2_tol = 1e-3;
  double cosine_min = 0.999;

  void validate() const;
};

struct EvalSpec {
  std::vector<PolicyVariant> variants = {PolicyVariant::Adaptive, PolicyVariant::NonAdaptive,
                                         PolicyVariant::Greedy};
  bool oracle = false;
  bool write_svg = true;
};

struct SweepSpec {
  std::vector<double> eta_e = {0.0, 0.05, 0.15, 0.6};
  std::uint64_t core_seed = 11;
  int iterations = 100;

  void validate() const;
};

struct RunConfig {
  SimConfig sim;
  SimConfig optimize_sim = SimConfig::reduced();
  CollisionLossConfig collision;
  LossWeights weights;
  OptimizerConfig optimizer;
  PolicyConfig policy;
  EstimatorConfig estimator;
  EpisodeLimits limits;
  DatasetSpec dataset;
  GradcheckSpec gradcheck;
  EvalSpec eval;
  SweepSpec sweep;
  std::string output_dir = "ninjacut_out";
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const;
  EpisodeConfig episode_config() const;
};

nlohmann::json to_json(const RunConfig& c);
nlohmann::json to_json(const SimConfig& c);
nlohmann::json to_json(const PolicyConfig& c);
nlohmann::json to_json(const EstimatorConfig& c);
nlohmann::json to_json(const EpisodeLimits& c);

/// Strict parse: unknown fields and wrong types throw std::invalid_argument;
/// missing fields keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
SimConfig sim_config_from_json(const nlohmann::json& j, const SimConfig& defaults = {});
PolicyConfig policy_config_from_json(const nlohmann::json& j);
EstimatorConfig estimator_config_from_json(const nlohmann::json& j);
EpisodeLimits limits_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" overrides; the value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace ninjacut
