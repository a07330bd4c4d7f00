#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ninjacut/config.hpp"
#include "ninjacut/experiments.hpp"
#include "ninjacut/io.hpp"

using namespace ninjacut;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  bool force = false;

  RunConfig load() const {
    RunConfig cfg = load_run_config(config_path, overrides);
    if (!out.empty()) cfg.output_dir = out;
    return cfg;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON run configuration");
  sub->add_option("--set", c.overrides, "Dotted override, e.g. --set policy.retract_steps=4")->take_all();
  sub->add_option("--out", c.out, "Output directory (overrides output_dir)");
  sub->add_flag("--force", c.force, "Allow writing into a non-empty output directory");
}

std::string index_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return buf;
}

void say(const std::string& line) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cout << line << std::endl;
}

std::vector<PolicyVariant> parse_variants(const std::string& list) {
  std::vector<PolicyVariant> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(policy_variant_from_string(item));
  if (out.empty()) throw std::invalid_argument("--variant list is empty");
  return out;
}

int cmd_gen_cores(const Common& c, bool full_scale) {
  RunConfig cfg = c.load();
  if (full_scale) {
    const auto fams = cfg.dataset.ood_families;
    const auto seed = cfg.dataset.seed;
    cfg.dataset = DatasetSpec::full_scale();
    cfg.dataset.ood_families = fams;
    cfg.dataset.seed = seed;
  }
  prepare_output_dir(cfg.output_dir, c.force);
  const Dataset d = generate_dataset(cfg.dataset);
  write_dataset(cfg.output_dir, d, to_json(cfg));
  say("wrote " + std::to_string(d.size()) + " cores (" + std::to_string(d.train.size()) + " train, " +
      std::to_string(d.eval_in.size()) + " eval_in, " + std::to_string(d.eval_ood.size()) + " eval_ood) to " +
      cfg.output_dir);
  return 0;
}

int cmd_optimize(const Common& c, const std::string& cores_path, int index) {
  const RunConfig cfg = c.load();
  std::vector<CoreShape> cores = read_cores(cores_path);
  if (index >= 0) {
    if (static_cast<std::size_t>(index) >= cores.size()) throw std::invalid_argument("--index out of range");
    cores = {cores[static_cast<std::size_t>(index)]};
  }
  prepare_output_dir(cfg.output_dir, c.force);
  const fs::path dir = cfg.output_dir;
  const json snap = to_json(cfg);

  DemonstrationOptions opts;
  opts.optimize_sim = cfg.optimize_sim;
  opts.evaluate_sim = cfg.sim;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  const auto demos = collect_demonstrations(cores, cfg.weights, cfg.collision, cfg.optimizer, opts);

  json manifest = {{"schema_version", kSchemaVersion}, {"source", cores_path}, {"demonstrations", json::array()},
                   {"config", snap}};
  std::size_t failed = 0;
  for (std::size_t k = 0; k < demos.size(); ++k) {
    const auto& d = demos[k];
    const std::string stem = "demo_" + index_name(index >= 0 ? static_cast<std::size_t>(index) : k);
    write_json(dir / (stem + ".json"), demonstration_json(d, snap));
    write_text(dir / (stem + "_loss.csv"), loss_history_csv(d.loss_history));
    Scene scene{d.core, cfg.optimize_sim, cfg.seed};
    write_text(dir / (stem + ".svg"),
               render_optimization_svg(d.core, init_trajectory(scene, cfg.collision), d.trajectory, cfg.sim.domain_size));
    manifest["demonstrations"].push_back(
        {{"file", stem + ".json"}, {"failed", d.failed}, {"collision_term", d.breakdown_final.collision_term}});
    write_json(dir / "manifest.json", manifest);
    failed += d.failed ? 1 : 0;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s: loss %.6g cut %.4f collision %.3g%s", stem.c_str(), d.breakdown_final.total,
                  d.breakdown_final.cut_mass_ratio, d.breakdown_final.collision_term,
                  d.failed ? (" FAILED: " + d.failure).c_str() : "");
    say(buf);
  }
  say(std::to_string(demos.size() - failed) + "/" + std::to_string(demos.size()) + " demonstrations succeeded");
  return 0;
}

int cmd_sweep_energy(const Common& c) {
  const RunConfig cfg = c.load();
  prepare_output_dir(cfg.output_dir, c.force);
  const fs::path dir = cfg.output_dir;
  const auto rows = energy_sweep(cfg, [&](const SweepRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "eta_e=%g: energy %.6g J, cut ratio %.4f, collision %.3g", r.eta_e, r.total_energy,
                  r.cut_mass_ratio, r.collision_term);
    say(buf);
  });
  json arr = json::array();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const std::string stem = "eta_" + index_name(k);
    write_text(dir / (stem + "_loss.csv"), loss_history_csv(r.history, r.failed));
    write_text(dir / (stem + ".svg"), render_optimization_svg(gen_core(CoreFamily::Spline3, cfg.sweep.core_seed),
                                                             r.initial, r.best, cfg.sim.domain_size));
    arr.push_back({{"eta_e", r.eta_e}, {"total_energy", r.total_energy}, {"max_step_energy", r.max_step_energy},
                   {"cut_mass_ratio", r.cut_mass_ratio}, {"collision_term", r.collision_term}, {"loss", r.loss},
                   {"free_params", r.best.free_params}});
  }
  write_text(dir / "sweep.csv", sweep_csv(rows));
  write_json(dir / "sweep.json", {{"schema_version", kSchemaVersion}, {"rows", arr}, {"config", to_json(cfg)}});
  return 0;
}

/// Writes the episode log, render, energy series and estimate snapshots under dir/stem*.
void write_episode(const fs::path& dir, const std::string& stem, const CoreShape& core, const EpisodeConfig& ecfg,
                   const EpisodeResult& r, const std::string& split, const std::string& variant, bool svg) {
  std::vector<std::string> refs;
  for (std::size_t k = 0; k < r.estimates.size(); ++k) {
    const std::string base = stem + "_est" + index_name(k);
    write_text(dir / (base + ".pgm"), probability_pgm(r.estimates[k]));
    write_json(dir / (base + "_mask.json"), mask_rle_json(r.estimates[k]));
    refs.push_back(base + "_mask.json");
  }
  write_json(dir / (stem + ".json"), episode_log_json(core, ecfg, r, split, variant, refs));
  write_text(dir / (stem + "_energy.csv"), energy_series_csv(r.forward_energies()));
  if (svg)
    write_text(dir / (stem + ".svg"), render_episode_svg(core, r, ecfg.sim.domain_size,
                                                         r.estimates.empty() ? nullptr : &r.estimates.back()));
}

std::string metrics_line(const std::string& label, const EpisodeResult& r) {
  const Metrics m = compute_metrics(r);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: %s, cut %.4f, collisions %zu (ratio %.4f), avg energy %.4g J, max %.4g J",
                label.c_str(), std::string(to_string(r.status)).c_str(), m.cut_mass_ratio, r.collision_events.size(),
                m.collision_ratio, m.avg_energy, m.max_energy);
  return buf;
}

int cmd_rollout(const Common& c, const std::string& cores_path, int index, const std::string& variant) {
  const RunConfig cfg = c.load();
  const auto cores = read_cores(cores_path);
  const std::size_t i = static_cast<std::size_t>(std::max(index, 0));
  if (i >= cores.size()) throw std::invalid_argument("--index out of range");
  const PolicyVariant v = policy_variant_from_string(variant);
  EpisodeConfig ecfg = cfg.episode_config();
  ecfg.policy = variant_config(v, cfg.policy);
  ecfg.keep_estimates = true;
  prepare_output_dir(cfg.output_dir, c.force);
  const EpisodeResult r = run_episode(cores[i], ecfg);
  const std::string stem = "episode_" + index_name(i) + "_" + std::string(to_string(v));
  write_episode(cfg.output_dir, stem, cores[i], ecfg, r, "", std::string(to_string(v)), true);
  say(metrics_line(stem, r));
  return r.status == EpisodeStatus::NumericalFailure ? 2 : 0;
}

int cmd_replay(const std::string& log_path) {
  const EpisodeLog log = episode_log_from_json(read_json(log_path));
  const ReplayReport rep = replay_episode(log.core, log.config, log.result);
  if (rep.identical) {
    say("replay identical over " + std::to_string(rep.steps_checked) + " steps");
    return 0;
  }
  say("replay mismatch: " + rep.mismatch);
  return 2;
}

int cmd_eval(const Common& c, const std::string& data_dir, const std::string& variants) {
  RunConfig cfg = c.load();
  if (!variants.empty()) cfg.eval.variants = parse_variants(variants);
  const fs::path data = data_dir.empty() ? fs::path(cfg.output_dir) : fs::path(data_dir);
  std::vector<EvalSplit> splits;
  for (const auto& [name, file] : {std::pair{"in_distribution", kEvalInFile}, std::pair{"ood", kEvalOodFile}}) {
    const auto cores = read_cores(data / file);
    if (!cores.empty()) splits.push_back({name, cores});
  }
  const fs::path dir = fs::path(cfg.output_dir) / "eval";
  prepare_output_dir(dir, c.force);
  EpisodeConfig base = cfg.episode_config();
  base.keep_estimates = cfg.eval.write_svg;
  const auto rows = evaluate(
      splits, cfg.eval.variants, base, nullptr,
      [&](const EvalEpisode& e) {
        const std::string stem = e.split + "_" + std::string(to_string(e.variant)) + "_" + index_name(e.core_index);
        write_episode(dir / "episodes", stem, e.core, e.config, e.result, e.split, std::string(to_string(e.variant)),
                      cfg.eval.write_svg);
        std::cout << metrics_line(stem, e.result) << std::endl;
      },
      cfg.threads);
  const json snap = to_json(cfg);
  write_text(dir / "metrics.csv", metrics_csv(rows));
  write_json(dir / "metrics.json", metrics_json(rows, snap));
  std::cout << metrics_csv(rows);
  return 0;
}

int cmd_gradcheck(const Common& c, const std::string& fault_name) {
  const RunConfig cfg = c.load();
  AdjointFault fault = AdjointFault::None;
  if (fault_name == "sign-flip")
    fault = AdjointFault::SignFlip;
  else if (!fault_name.empty() && fault_name != "none")
    throw std::invalid_argument("unknown fault: " + fault_name);
  const auto rep = run_gradcheck(cfg.gradcheck, cfg.weights, cfg.collision, cfg.optimizer, fault, cfg.threads);
  json rows = json::array();
  for (const auto& r : rep.rows) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "scene %d: particles %zu rel_l2 %.3e cosine %.8f %s (%.1fs)", r.scene, r.particles,
                  r.rel_l2, r.cosine, r.pass ? "PASS" : "FAIL", r.seconds);
    say(buf);
    rows.push_back({{"scene", r.scene}, {"particles", r.particles}, {"loss", r.loss}, {"rel_l2", r.rel_l2},
                    {"cosine", r.cosine}, {"pass", r.pass}});
  }
  if (!c.out.empty())
    write_json(fs::path(c.out) / "gradcheck.json",
               {{"schema_version", kSchemaVersion}, {"pass", rep.pass()}, {"rows", rows}, {"config", to_json(cfg)}});
  say(rep.pass() ? "gradcheck PASS" : "gradcheck FAIL");
  return rep.pass() ? 0 : 1;
}

int cmd_render(const std::string& input, const std::string& output) {
  const json j = read_json(input);
  std::string svg;
  if (j.contains("steps")) {
    const EpisodeLog log = episode_log_from_json(j);
    svg = render_episode_svg(log.core, log.result, log.config.sim.domain_size);
  } else if (j.contains("free_params")) {
    const RunConfig cfg = run_config_from_json(j.at("config"));
    const CoreShape core = core_from_json(j.at("core_ref"));
    Trajectory tr;
    tr.initial_pose = pose_from_json(j.at("initial_pose"));
    tr.free_params = j.at("free_params").get<std::vector<double>>();
    Scene scene{core, cfg.optimize_sim, cfg.seed};
    svg = render_optimization_svg(core, init_trajectory(scene, cfg.collision), tr, cfg.sim.domain_size);
  } else {
    throw std::invalid_argument(input + " is neither an episode log nor a demonstration");
  }
  write_text(output, svg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-material cutting lab: simulation, trajectory optimization and adaptive cutting policies"};
  app.require_subcommand(1);

  Common common;
  bool full_scale = false;
  auto* gen = app.add_subcommand("gen-cores", "Generate train / eval core datasets");
  add_common(gen, common);
  gen->add_flag("--full-scale", full_scale, "Use the 300/50/50 split");

  std::string cores_path;
  int index = -1;
  auto* opt = app.add_subcommand("optimize", "Optimize demonstration trajectories for a cores file");
  add_common(opt, common);
  opt->add_option("--cores", cores_path, "Cores file")->required();
  opt->add_option("--index", index, "Only this core of the file");

  auto* sweep = app.add_subcommand("sweep-energy", "Optimize one core over a list of energy weights");
  add_common(sweep, common);

  std::string variant = "adaptive", replay_path;
  auto* roll = app.add_subcommand("rollout", "Run one closed-loop episode, or replay a logged one");
  add_common(roll, common);
  roll->add_option("--cores", cores_path, "Cores file");
  roll->add_option("--index", index, "Core index in the file");
  roll->add_option("--variant", variant, "adaptive | non-adaptive | greedy");
  roll->add_option("--replay", replay_path, "Episode log to re-simulate and compare bit-exactly");

  std::string data_dir, variants;
  auto* ev = app.add_subcommand("eval", "Evaluate policy variants on the eval splits");
  add_common(ev, common);
  ev->add_option("--data", data_dir, "Dataset directory (default: output_dir)");
  ev->add_option("--variant", variants, "Comma-separated variants");

  std::string fault;
  auto* gc = app.add_subcommand("gradcheck", "Compare reverse-mode and finite-difference gradients");
  add_common(gc, common);
  gc->add_option("--inject-fault", fault, "none | sign-flip");

  std::string input, output;
  auto* render = app.add_subcommand("render", "Render an episode log or demonstration to SVG");
  render->add_option("input", input, "Episode log or demonstration JSON")->required();
  render->add_option("-o,--output", output, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_cores(common, full_scale);
    if (*opt) return cmd_optimize(common, cores_path, index);
    if (*sweep) return cmd_sweep_energy(common);
    if (*roll) {
      if (!replay_path.empty()) return cmd_replay(replay_path);
      if (cores_path.empty()) throw std::invalid_argument("rollout needs --cores or --replay");
      return cmd_rollout(common, cores_path, index, variant);
    }
    if (*ev) return cmd_eval(common, data_dir, variants);
    if (*gc) return cmd_gradcheck(common, fault);
    if (*render) return cmd_render(input, output);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << std::endl;
    return 2;
  }
  return 1;
}
