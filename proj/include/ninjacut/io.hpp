#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ninjacut/config.hpp"

namespace ninjacut {

namespace fs = std::filesystem;

struct Dataset {
  std::vector<CoreShape> train;
  std::vector<CoreShape> eval_in;
  std::vector<CoreShape> eval_ood;

  std::size_t size() const { return train.size() + eval_in.size() + eval_ood.size(); }
};

/// Train and in-distribution eval are Spline3 on disjoint seed streams; OOD cycles the listed families.
Dataset generate_dataset(const DatasetSpec& spec);

inline constexpr const char* kTrainFile = "cores_train.json";
inline constexpr const char* kEvalInFile = "cores_eval_in.json";
inline constexpr const char* kEvalOodFile = "cores_eval_ood.json";

nlohmann::json core_to_json(const CoreShape& c);
/// Rebuilds the core from family, params and anchor.
CoreShape core_from_json(const nlohmann::json& j);

nlohmann::json cores_file_json(const std::string& split, const std::vector<CoreShape>& cores,
                               const nlohmann::json& config_snapshot);
/// Reads a cores file (or a single core record).
std::vector<CoreShape> read_cores(const fs::path& path);
void write_dataset(const fs::path& dir, const Dataset& d, const nlohmann::json& config_snapshot);

/// Creates dir; throws std::invalid_argument if it exists non-empty and force is off.
void prepare_output_dir(const fs::path& dir, bool force);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
/// Pretty JSON with a trailing newline.
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

nlohmann::json pose_json(const KnifePose& p);
KnifePose pose_from_json(const nlohmann::json& j);
nlohmann::json breakdown_json(const LossBreakdown& b);

nlohmann::json demonstration_json(const Demonstration& d, const nlohmann::json& config_snapshot);
/// iteration,total,mass_term,collision_term,energy_term,cut_mass_ratio,max_step_energy,min_clearance,failed
std::string loss_history_csv(const std::vector<LossBreakdown>& history, const std::vector<bool>& failed = {});
/// step,energy
std::string energy_series_csv(const std::vector<double>& energies);

/// split,variant,episodes,completion,cut_mass_ratio,collision_ratio,avg_energy,max_energy
std::string metrics_csv(const std::vector<EvalRow>& rows);
nlohmann::json metrics_json(const std::vector<EvalRow>& rows, const nlohmann::json& config_snapshot);
nlohmann::json metrics_to_json(const Metrics& m);

nlohmann::json episode_config_json(const EpisodeConfig& c);
EpisodeConfig episode_config_from_json(const nlohmann::json& j);

struct EpisodeLog {
  CoreShape core;
  EpisodeConfig config;
  EpisodeResult result;
  Metrics metrics;
  std::string split;
  std::string variant;
};

/// Poses, actions, events, energies and estimate references, with the config snapshot.
nlohmann::json episode_log_json(const CoreShape& core, const EpisodeConfig& cfg, const EpisodeResult& r,
                                const std::string& split = "", const std::string& variant = "",
                                const std::vector<std::string>& estimate_refs = {});
EpisodeLog episode_log_from_json(const nlohmann::json& j);

/// Binary 8-bit PGM of the probability map, image row 0 at the top of the window.
std::string probability_pgm(const CoreEstimate& est);
/// Row-major run lengths starting with a run of zeros.
nlohmann::json mask_rle_json(const CoreEstimate& est);
std::vector<std::uint8_t> mask_from_rle(const nlohmann::json& j);

/// Episode render: core gray, estimate brown, one path per forward segment (blue)
/// and per retraction segment (red).
std::string render_episode_svg(const CoreShape& core, const EpisodeResult& r, double domain_size,
                               const CoreEstimate* estimate = nullptr);
/// Initial (dashed) vs optimized trajectory over the core.
std::string render_optimization_svg(const CoreShape& core, const Trajectory& initial,
                                    const Trajectory& final_traj, double domain_size);

}  // namespace ninjacut
