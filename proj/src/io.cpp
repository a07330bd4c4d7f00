#include "ninjacut/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ninjacut {

using nlohmann::json;

namespace {

enum SplitStream : std::uint64_t { kTrainStream = 1, kEvalInStream = 2, kEvalOodStream = 3 };

std::uint64_t core_seed(std::uint64_t base, SplitStream s, std::size_t i) {
  return CounterRng::stream_key(CounterRng::stream_key(base, s), i);
}

json vec2_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec2_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected [x, y]");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected [x, y, theta]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

/// Non-finite values become null in JSON; keep them distinguishable in CSV.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Phase phase_from_string(std::string_view s) {
  for (Phase p : {Phase::Forward, Phase::Retracting, Phase::Elevated, Phase::Decaying})
    if (to_string(p) == s) return p;
  throw std::invalid_argument("unknown phase: " + std::string(s));
}

void require_schema(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("schema_version"))
    throw std::invalid_argument(std::string(what) + ": missing schema_version");
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw std::invalid_argument(std::string(what) + ": unsupported schema_version");
}

/// Workspace-to-pixel transform; SVG y grows downward.
struct Canvas {
  double domain;
  double scale;

  double px(double x) const { return x * scale; }
  double py(double y) const { return (domain - y) * scale; }
  std::string pt(const Vec2& p) const {
    std::ostringstream o;
    o << std::fixed << std::setprecision(2) << px(p.x()) << ',' << py(p.y());
    return o.str();
  }
};

std::string svg_header(const Canvas& c) {
  const int size = static_cast<int>(std::lround(c.domain * c.scale));
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
    << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";
  return o.str();
}

std::string svg_polygon(const Canvas& c, const std::vector<Vec2>& pts, const char* style) {
  std::ostringstream o;
  o << "<polygon points=\"";
  for (std::size_t k = 0; k < pts.size(); ++k) o << (k ? " " : "") << c.pt(pts[k]);
  o << "\" " << style << "/>\n";
  return o.str();
}

std::string svg_board(const Canvas& c, double board_height) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << "<rect x=\"0\" y=\"" << c.py(board_height) << "\" width=\""
    << c.px(c.domain) << "\" height=\"" << board_height * c.scale << "\" fill=\"#d8c8a8\"/>\n";
  return o.str();
}

std::string svg_segment(const Canvas& c, const Vec2& a, const Vec2& b, const char* style) {
  return "<path d=\"M " + c.pt(a) + " L " + c.pt(b) + "\" " + style + "/>\n";
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset d;
  for (int i = 0; i < spec.train; ++i)
    d.train.push_back(gen_core(CoreFamily::Spline3, core_seed(spec.seed, kTrainStream, i)));
  for (int i = 0; i < spec.eval_in; ++i)
    d.eval_in.push_back(gen_core(CoreFamily::Spline3, core_seed(spec.seed, kEvalInStream, i)));
  for (int i = 0; i < spec.eval_ood; ++i) {
    const CoreFamily f = spec.ood_families[static_cast<std::size_t>(i) % spec.ood_families.size()];
    d.eval_ood.push_back(gen_core(f, core_seed(spec.seed, kEvalOodStream, i)));
  }
  return d;
}

json core_to_json(const CoreShape& c) {
  return {{"family", std::string(to_string(c.family))},
          {"seed", c.seed},
          {"params", c.params},
          {"anchor", vec2_json(c.anchor)}};
}

CoreShape core_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family") || !j.contains("params") || !j.contains("anchor"))
    throw std::invalid_argument("core record needs family, params and anchor");
  const auto params = j.at("params").get<std::vector<double>>();
  return make_core(core_family_from_string(j.at("family").get<std::string>()), params,
                   vec2_from(j.at("anchor")), j.value("seed", std::uint64_t{0}));
}

json cores_file_json(const std::string& split, const std::vector<CoreShape>& cores, const json& config_snapshot) {
  json arr = json::array();
  for (const auto& c : cores) arr.push_back(core_to_json(c));
  return {{"schema_version", kSchemaVersion}, {"split", split}, {"cores", arr}, {"config", config_snapshot}};
}

std::vector<CoreShape> read_cores(const fs::path& path) {
  const json j = read_json(path);
  std::vector<CoreShape> out;
  if (j.contains("cores")) {
    require_schema(j, path.string().c_str());
    for (const auto& c : j.at("cores")) out.push_back(core_from_json(c));
  } else if (j.contains("core_ref")) {
    out.push_back(core_from_json(j.at("core_ref")));
  } else {
    out.push_back(core_from_json(j));
  }
  return out;
}

void write_dataset(const fs::path& dir, const Dataset& d, const json& config_snapshot) {
  write_json(dir / kTrainFile, cores_file_json("train", d.train, config_snapshot));
  write_json(dir / kEvalInFile, cores_file_json("eval_in", d.eval_in, config_snapshot));
  write_json(dir / kEvalOodFile, cores_file_json("eval_ood", d.eval_ood, config_snapshot));
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw std::invalid_argument("output path is not a directory: " + dir.string());
    if (!fs::is_empty(dir) && !force)
      throw std::invalid_argument("output directory " + dir.string() + " is not empty (use --force)");
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + " is not valid JSON: " + e.what());
  }
}

json pose_json(const KnifePose& p) { return json::array({p.tip.x(), p.tip.y(), p.theta}); }

KnifePose pose_from_json(const json& j) {
  const Vec3 v = vec3_from(j);
  return KnifePose{Vec2(v[0], v[1]), v[2]};
}

json breakdown_json(const LossBreakdown& b) {
  return {{"total", b.total},
          {"mass_term", b.mass_term},
          {"collision_term", b.collision_term},
          {"energy_term", b.energy_term},
          {"cut_mass_ratio", b.cut_mass_ratio},
          {"max_step_energy", b.max_step_energy},
          {"min_clearance", b.min_clearance},
          {"steps", b.steps}};
}

json demonstration_json(const Demonstration& d, const json& config_snapshot) {
  json actions = json::array();
  for (const auto& a : d.trajectory.actions()) actions.push_back(json::array({a.dpos.x(), a.dpos.y(), a.dtheta}));
  json history = json::array();
  for (const auto& b : d.loss_history) history.push_back(b.total);
  json j = {{"schema_version", kSchemaVersion},
            {"core_index", d.core_index},
            {"core_ref", core_to_json(d.core)},
            {"initial_pose", pose_json(d.trajectory.initial_pose)},
            {"free_params", d.trajectory.free_params},
            {"actions", actions},
            {"loss_history", history},
            {"breakdown_final", breakdown_json(d.breakdown_final)},
            {"failed", d.failed},
            {"config", config_snapshot}};
  if (d.failed) j["failure"] = d.failure;
  return j;
}

std::string loss_history_csv(const std::vector<LossBreakdown>& history, const std::vector<bool>& failed) {
  std::ostringstream o;
  o << "iteration,total,mass_term,collision_term,energy_term,cut_mass_ratio,max_step_energy,min_clearance,failed\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& b = history[i];
    const bool f = i < failed.size() && failed[i];
    o << i << ',' << num(b.total) << ',' << num(b.mass_term) << ',' << num(b.collision_term) << ','
      << num(b.energy_term) << ',' << num(b.cut_mass_ratio) << ',' << num(b.max_step_energy) << ','
      << num(b.min_clearance) << ',' << (f ? 1 : 0) << '\n';
  }
  return o.str();
}

std::string energy_series_csv(const std::vector<double>& energies) {
  std::ostringstream o;
  o << "step,energy\n";
  for (std::size_t i = 0; i < energies.size(); ++i) o << i << ',' << num(energies[i]) << '\n';
  return o.str();
}

json metrics_to_json(const Metrics& m) {
  return {{"completion", m.completion},
          {"cut_mass_ratio", m.cut_mass_ratio},
          {"collision_ratio", m.collision_ratio},
          {"avg_energy", m.avg_energy},
          {"max_energy", m.max_energy}};
}

std::string metrics_csv(const std::vector<EvalRow>& rows) {
  std::ostringstream o;
  o << "split,variant,episodes,completion,cut_mass_ratio,collision_ratio,avg_energy,max_energy\n";
  for (const auto& r : rows)
    o << r.split << ',' << to_string(r.variant) << ',' << r.episodes << ',' << num(r.mean.completion) << ','
      << num(r.mean.cut_mass_ratio) << ',' << num(r.mean.collision_ratio) << ',' << num(r.mean.avg_energy) << ','
      << num(r.mean.max_energy) << '\n';
  return o.str();
}

json metrics_json(const std::vector<EvalRow>& rows, const json& config_snapshot) {
  json arr = json::array();
  for (const auto& r : rows) {
    json m = metrics_to_json(r.mean);
    m["split"] = r.split;
    m["variant"] = std::string(to_string(r.variant));
    m["episodes"] = r.episodes;
    arr.push_back(m);
  }
  return {{"schema_version", kSchemaVersion}, {"rows", arr}, {"config", config_snapshot}};
}

json episode_config_json(const EpisodeConfig& c) {
  return {{"sim", to_json(c.sim)},
          {"policy", to_json(c.policy)},
          {"estimator", to_json(c.estimator)},
          {"limits", to_json(c.limits)},
          {"seed", c.seed},
          {"oracle", c.oracle},
          {"max_bisections", c.max_bisections},
          {"contact_tolerance", c.contact_tolerance}};
}

EpisodeConfig episode_config_from_json(const json& j) {
  EpisodeConfig c;
  for (const auto& item : j.items()) {
    const auto& k = item.key();
    if (k != "sim" && k != "policy" && k != "estimator" && k != "limits" && k != "seed" && k != "oracle" &&
        k != "max_bisections" && k != "contact_tolerance")
      throw std::invalid_argument("unknown episode config field: " + k);
  }
  if (j.contains("sim")) c.sim = sim_config_from_json(j.at("sim"));
  if (j.contains("policy")) c.policy = policy_config_from_json(j.at("policy"));
  if (j.contains("estimator")) c.estimator = estimator_config_from_json(j.at("estimator"));
  if (j.contains("limits")) c.limits = limits_from_json(j.at("limits"));
  c.seed = j.value("seed", c.seed);
  c.oracle = j.value("oracle", c.oracle);
  c.max_bisections = j.value("max_bisections", c.max_bisections);
  c.contact_tolerance = j.value("contact_tolerance", c.contact_tolerance);
  c.sim.validate();
  c.policy.validate();
  c.estimator.validate();
  c.limits.validate();
  return c;
}

json episode_log_json(const CoreShape& core, const EpisodeConfig& cfg, const EpisodeResult& r,
                      const std::string& split, const std::string& variant,
                      const std::vector<std::string>& estimate_refs) {
  json steps = json::array();
  for (const auto& s : r.steps)
    steps.push_back({{"action", json::array({s.action.dpos.x(), s.action.dpos.y(), s.action.dtheta})},
                     {"pose", vec3_json(s.pose)},
                     {"energy", s.energy},
                     {"min_sdf", s.min_sdf},
                     {"retraction", s.retraction},
                     {"truncated", s.truncated},
                     {"tolerance", s.tolerance},
                     {"phase", std::string(to_string(s.phase))}});
  json events = json::array();
  for (const auto& e : r.collision_events) events.push_back({{"step", e.step}, {"point", vec2_json(e.point)}});
  json estimates = json::array();
  for (std::size_t k = 0; k < r.estimate_steps.size(); ++k) {
    json e = {{"after_step", r.estimate_steps[k]}};
    if (k < estimate_refs.size()) e["ref"] = estimate_refs[k];
    estimates.push_back(e);
  }
  return {{"schema_version", kSchemaVersion},
          {"split", split},
          {"variant", variant},
          {"core", core_to_json(core)},
          {"config", episode_config_json(cfg)},
          {"status", std::string(to_string(r.status))},
          {"message", r.message},
          {"start", vec3_json(r.start)},
          {"steps", steps},
          {"collision_events", events},
          {"forward_energies", r.forward_energies()},
          {"estimates", estimates},
          {"cut_mass_ratio", r.cut_mass_ratio},
          {"metrics", metrics_to_json(compute_metrics(r))}};
}

EpisodeLog episode_log_from_json(const json& j) {
  require_schema(j, "episode log");
  EpisodeLog log;
  log.core = core_from_json(j.at("core"));
  log.config = episode_config_from_json(j.at("config"));
  log.split = j.value("split", std::string());
  log.variant = j.value("variant", std::string());
  auto& r = log.result;
  r.status = episode_status_from_string(j.at("status").get<std::string>());
  r.message = j.value("message", std::string());
  r.start = vec3_from(j.at("start"));
  for (const auto& s : j.at("steps")) {
    StepLog st;
    const Vec3 a = vec3_from(s.at("action"));
    st.action.dpos = Vec2(a[0], a[1]);
    st.action.dtheta = a[2];
    st.pose = vec3_from(s.at("pose"));
    st.energy = s.at("energy").get<double>();
    st.min_sdf = s.at("min_sdf").get<double>();
    st.retraction = s.at("retraction").get<bool>();
    st.truncated = s.at("truncated").get<bool>();
    st.tolerance = s.at("tolerance").get<double>();
    st.phase = phase_from_string(s.at("phase").get<std::string>());
    r.steps.push_back(st);
  }
  for (const auto& e : j.at("collision_events"))
    r.collision_events.push_back(CollisionEvent{e.at("step").get<std::size_t>(), vec2_from(e.at("point"))});
  for (const auto& e : j.at("estimates")) r.estimate_steps.push_back(e.at("after_step").get<long>());
  r.cut_mass_ratio = j.at("cut_mass_ratio").get<double>();
  log.metrics = compute_metrics(r);
  return log;
}

std::string probability_pgm(const CoreEstimate& est) {
  const auto& w = est.window;
  std::string out = "P5\n" + std::to_string(w.nx) + " " + std::to_string(w.ny) + "\n255\n";
  for (int row = w.ny - 1; row >= 0; --row)
    for (int i = 0; i < w.nx; ++i) {
      const double p = std::clamp(est.probability[w.index(i, row)], 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(p * 255.0))));
    }
  return out;
}

json mask_rle_json(const CoreEstimate& est) {
  json runs = json::array();
  std::uint8_t cur = 0;
  std::size_t len = 0;
  for (auto v : est.mask) {
    const std::uint8_t b = v ? 1 : 0;
    if (b != cur) {
      runs.push_back(len);
      cur = b;
      len = 0;
    }
    ++len;
  }
  runs.push_back(len);
  const auto& w = est.window;
  return {{"schema_version", kSchemaVersion},
          {"nx", w.nx},
          {"ny", w.ny},
          {"origin", vec2_json(w.origin)},
          {"cell_size", w.cell_size},
          {"threshold", est.threshold_used},
          {"runs", runs}};
}

std::vector<std::uint8_t> mask_from_rle(const json& j) {
  require_schema(j, "mask");
  const std::size_t n = j.at("nx").get<std::size_t>() * j.at("ny").get<std::size_t>();
  std::vector<std::uint8_t> mask;
  mask.reserve(n);
  std::uint8_t cur = 0;
  for (const auto& r : j.at("runs")) {
    mask.insert(mask.end(), r.get<std::size_t>(), cur);
    cur ^= 1;
  }
  if (mask.size() != n) throw std::invalid_argument("mask run lengths do not cover the window");
  return mask;
}

std::string render_episode_svg(const CoreShape& core, const EpisodeResult& r, double domain_size,
                               const CoreEstimate* estimate) {
  const Canvas c{domain_size, 2000.0};
  std::string out = svg_header(c);
  if (estimate) {
    // One rect per horizontal run of mask cells.
    const auto& w = estimate->window;
    std::ostringstream o;
    o << std::fixed << std::setprecision(2);
    o << "<g fill=\"#8b5a2b\" fill-opacity=\"0.45\">\n";
    for (int j = 0; j < w.ny; ++j)
      for (int i = 0; i < w.nx;) {
        if (!estimate->mask[w.index(i, j)]) {
          ++i;
          continue;
        }
        int e = i;
        while (e < w.nx && estimate->mask[w.index(e, j)]) ++e;
        const double x0 = w.origin.x() + i * w.cell_size, y1 = w.origin.y() + (j + 1) * w.cell_size;
        o << "<rect x=\"" << c.px(x0) << "\" y=\"" << c.py(y1) << "\" width=\"" << (e - i) * w.cell_size * c.scale
          << "\" height=\"" << w.cell_size * c.scale << "\"/>\n";
        i = e;
      }
    o << "</g>\n";
    out += o.str();
  }
  out += svg_polygon(c, core.contour, "fill=\"#808080\" fill-opacity=\"0.6\" stroke=\"#404040\" stroke-width=\"1\"");
  Vec2 prev(r.start[0], r.start[1]);
  for (const auto& s : r.steps) {
    const Vec2 next(s.pose[0], s.pose[1]);
    out += svg_segment(c, prev, next,
                       s.retraction ? "stroke=\"#d62728\" stroke-width=\"2\" fill=\"none\""
                                    : "stroke=\"#1f77b4\" stroke-width=\"2\" fill=\"none\"");
    prev = next;
  }
  for (const auto& e : r.collision_events) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(2) << "<circle cx=\"" << c.px(e.point.x()) << "\" cy=\"" << c.py(e.point.y())
      << "\" r=\"3\" fill=\"#d62728\"/>\n";
    out += o.str();
  }
  return out + "</svg>\n";
}

std::string render_optimization_svg(const CoreShape& core, const Trajectory& initial, const Trajectory& final_traj,
                                    double domain_size) {
  const Canvas c{domain_size, 2000.0};
  std::string out = svg_header(c);
  out += svg_board(c, SimConfig{}.board_height);
  out += svg_polygon(c, core.contour, "fill=\"#808080\" fill-opacity=\"0.6\" stroke=\"#404040\" stroke-width=\"1\"");
  auto polyline = [&](const Trajectory& t, const char* style) {
    std::string pts;
    for (const auto& p : t.poses()) pts += (pts.empty() ? "" : " ") + c.pt(p.tip);
    return "<polyline points=\"" + pts + "\" " + style + "/>\n";
  };
  out += polyline(initial, "stroke=\"#999999\" stroke-dasharray=\"6,4\" stroke-width=\"2\" fill=\"none\"");
  out += polyline(final_traj, "stroke=\"#1f77b4\" stroke-width=\"2\" fill=\"none\"");
  return out + "</svg>\n";
}

}  // namespace ninjacut
