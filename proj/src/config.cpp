#include "ninjacut/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ninjacut {

using nlohmann::json;

DatasetSpec DatasetSpec::full_scale() {
  DatasetSpec d;
  d.train = 300;
  d.eval_in = 50;
  d.eval_ood = 50;
  return d;
}

void DatasetSpec::validate() const {
  if (train < 0 || eval_in < 0 || eval_ood < 0)
    throw std::invalid_argument("dataset: split sizes must be >= 0");
  if (eval_ood > 0 && ood_families.empty())
    throw std::invalid_argument("dataset: OOD split needs at least one family");
}

void GradcheckSpec::validate() const {
  if (scenes < 1 || actions < 1) throw std::invalid_argument("gradcheck: scenes and actions must be >= 1");
  if (!(rel_l2_tol > 0.0) || !(cosine_min > 0.0 && cosine_min <= 1.0))
    throw std::invalid_argument("gradcheck: invalid tolerances");
}

void SweepSpec::validate() const {
  if (eta_e.empty()) throw std::invalid_argument("sweep: eta_e list is empty");
  for (double e : eta_e)
    if (!(e >= 0.0)) throw std::invalid_argument("sweep: eta_e values must be >= 0");
  if (iterations < 0) throw std::invalid_argument("sweep: iterations must be >= 0");
}

void RunConfig::validate() const {
  sim.validate();
  optimize_sim.validate();
  collision.validate();
  weights.validate();
  optimizer.validate();
  policy.validate();
  estimator.validate();
  limits.validate();
  dataset.validate();
  gradcheck.validate();
  sweep.validate();
  if (eval.variants.empty()) throw std::invalid_argument("eval: no policy variants");
  if (output_dir.empty()) throw std::invalid_argument("output_dir must not be empty");
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
}

EpisodeConfig RunConfig::episode_config() const {
  EpisodeConfig e;
  e.sim = sim;
  e.policy = policy;
  e.estimator = estimator;
  e.limits = limits;
  e.seed = seed;
  e.oracle = eval.oracle;
  return e;
}

namespace {

/// Strict object reader: typed field access plus a final unknown-key check.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(where() + ": expected an object");
  }

  const json* find(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void get(const char* key, double& out) {
    if (auto* v = find(key)) {
      if (!v->is_number()) throw type_error(key, "a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, int& out) {
    if (auto* v = find(key)) {
      if (!v->is_number_integer()) throw type_error(key, "an integer");
      out = v->get<int>();
    }
  }
  void get(const char* key, std::uint64_t& out) {
    if (auto* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
        throw type_error(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* key, bool& out) {
    if (auto* v = find(key)) {
      if (!v->is_boolean()) throw type_error(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (auto* v = find(key)) {
      if (!v->is_string()) throw type_error(key, "a string");
      out = v->get<std::string>();
    }
  }
  void get(const char* key, std::vector<double>& out) {
    if (auto* v = find(key)) {
      if (!v->is_array()) throw type_error(key, "an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) throw type_error(key, "an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }
  std::vector<std::string> strings(const char* key, std::vector<std::string> fallback) {
    if (auto* v = find(key)) {
      if (!v->is_array()) throw type_error(key, "an array of strings");
      fallback.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) throw type_error(key, "an array of strings");
        fallback.push_back(e.get<std::string>());
      }
    }
    return fallback;
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw std::invalid_argument("unknown config field: " + child(item.key().c_str()));
  }

 private:
  std::invalid_argument type_error(const char* key, const char* what) const {
    return std::invalid_argument("config field " + child(key) + " must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json knife_json(const KnifeGeometry& k) {
  return {{"blade_length", k.blade_length}, {"half_thickness", k.half_thickness}, {"spine_offset", k.spine_offset}};
}

KnifeGeometry knife_from(const json& j, const std::string& path, KnifeGeometry k) {
  Reader r(j, path);
  r.get("blade_length", k.blade_length);
  r.get("half_thickness", k.half_thickness);
  r.get("spine_offset", k.spine_offset);
  r.finish();
  return k;
}

SimConfig sim_from(const json& j, const std::string& path, SimConfig c) {
  Reader r(j, path);
  r.get("grid_resolution", c.grid_resolution);
  r.get("domain_size", c.domain_size);
  r.get("dt", c.dt);
  r.get("substeps", c.substeps);
  r.get("particles_per_cell", c.particles_per_cell);
  r.get("lambda", c.lambda);
  r.get("mu", c.mu);
  r.get("yield_stress", c.yield_stress);
  r.get("density", c.density);
  r.get("gravity", c.gravity);
  r.get("friction_coeff", c.friction_coeff);
  r.get("board_height", c.board_height);
  r.get("soft_top", c.soft_top);
  r.get("soft_right", c.soft_right);
  r.get("contact_samples", c.contact_samples);
  r.get("deterministic", c.deterministic);
  r.get("plasticity", c.plasticity);
  if (auto* k = r.find("knife")) c.knife = knife_from(*k, r.child("knife"), c.knife);
  r.finish();
  return c;
}

PolicyConfig policy_from(const json& j, const std::string& path) {
  PolicyConfig c;
  Reader r(j, path);
  r.get("retract_steps", c.retract_steps);
  r.get("tolerance_increment", c.tolerance_increment);
  r.get("decay_steps", c.decay_steps);
  r.get("base_clearance", c.base_clearance);
  r.get("step_length", c.step_length);
  r.get("dtheta_max", c.dtheta_max);
  r.get("band", c.band);
  r.get("limit_rotation", c.limit_rotation);
  r.finish();
  return c;
}

EstimatorConfig estimator_from(const json& j, const std::string& path) {
  EstimatorConfig c;
  Reader r(j, path);
  std::string prior(to_string(c.prior));
  r.get("prior", prior);
  c.prior = core_family_from_string(prior);
  r.get("grid_per_axis", c.grid_per_axis);
  r.get("sigma_c", c.sigma_c);
  r.get("eps_c", c.eps_c);
  r.get("r_resid", c.r_resid);
  r.get("threshold", c.threshold);
  r.finish();
  return c;
}

EpisodeLimits limits_from(const json& j, const std::string& path) {
  EpisodeLimits c;
  Reader r(j, path);
  r.get("max_collisions", c.max_collisions);
  r.get("max_step_energy", c.max_step_energy);
  r.get("max_forward_steps", c.max_forward_steps);
  r.finish();
  return c;
}

}  // namespace

json to_json(const SimConfig& c) {
  return {{"grid_resolution", c.grid_resolution},
          {"domain_size", c.domain_size},
          {"dt", c.dt},
          {"substeps", c.substeps},
          {"particles_per_cell", c.particles_per_cell},
          {"lambda", c.lambda},
          {"mu", c.mu},
          {"yield_stress", c.yield_stress},
          {"density", c.density},
          {"gravity", c.gravity},
          {"friction_coeff", c.friction_coeff},
          {"board_height", c.board_height},
          {"soft_top", c.soft_top},
          {"soft_right", c.soft_right},
          {"contact_samples", c.contact_samples},
          {"deterministic", c.deterministic},
          {"plasticity", c.plasticity},
          {"knife", knife_json(c.knife)}};
}

json to_json(const PolicyConfig& c) {
  return {{"retract_steps", c.retract_steps},   {"tolerance_increment", c.tolerance_increment},
          {"decay_steps", c.decay_steps},       {"base_clearance", c.base_clearance},
          {"step_length", c.step_length},       {"dtheta_max", c.dtheta_max},
          {"band", c.band},                     {"limit_rotation", c.limit_rotation}};
}

json to_json(const EstimatorConfig& c) {
  return {{"prior", std::string(to_string(c.prior))}, {"grid_per_axis", c.grid_per_axis},
          {"sigma_c", c.sigma_c}, {"eps_c", c.eps_c}, {"r_resid", c.r_resid}, {"threshold", c.threshold}};
}

json to_json(const EpisodeLimits& c) {
  return {{"max_collisions", c.max_collisions}, {"max_step_energy", c.max_step_energy},
          {"max_forward_steps", c.max_forward_steps}};
}

json to_json(const RunConfig& c) {
  json fams = json::array();
  for (auto f : c.dataset.ood_families) fams.push_back(std::string(to_string(f)));
  json variants = json::array();
  for (auto v : c.eval.variants) variants.push_back(std::string(to_string(v)));
  return {
      {"sim", to_json(c.sim)},
      {"optimize_sim", to_json(c.optimize_sim)},
      {"collision", {{"n_samples", c.collision.n_samples}, {"exponent", c.collision.exponent},
                     {"safety_margin", c.collision.safety_margin}}},
      {"weights", {{"eta_col", c.weights.eta_col}, {"eta_e", c.weights.eta_e}}},
      {"optimizer", {{"iterations", c.optimizer.iterations}, {"learning_rate", c.optimizer.learning_rate},
                     {"adam_beta1", c.optimizer.adam_beta1}, {"adam_beta2", c.optimizer.adam_beta2},
                     {"adam_eps", c.optimizer.adam_eps}, {"checkpoint_interval", c.optimizer.checkpoint_interval},
                     {"gradient_mode", std::string(to_string(c.optimizer.gradient_mode))},
                     {"fd_step", c.optimizer.fd_step}}},
      {"policy", to_json(c.policy)},
      {"estimator", to_json(c.estimator)},
      {"limits", to_json(c.limits)},
      {"dataset", {{"train", c.dataset.train}, {"eval_in", c.dataset.eval_in}, {"eval_ood", c.dataset.eval_ood},
                   {"seed", c.dataset.seed}, {"ood_families", fams}}},
      {"gradcheck", {{"scenes", c.gradcheck.scenes}, {"actions", c.gradcheck.actions}, {"seed", c.gradcheck.seed},
                     {"soft_top", c.gradcheck.soft_top}, {"soft_right", c.gradcheck.soft_right},
                     {"rel_l2_tol", c.gradcheck.rel_l2_tol}, {"cosine_min", c.gradcheck.cosine_min}}},
      {"eval", {{"variants", variants}, {"oracle", c.eval.oracle}, {"write_svg", c.eval.write_svg}}},
      {"sweep", {{"eta_e", c.sweep.eta_e}, {"core_seed", c.sweep.core_seed}, {"iterations", c.sweep.iterations}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"threads", c.threads}};
}

SimConfig sim_config_from_json(const json& j, const SimConfig& defaults) { return sim_from(j, "sim", defaults); }
PolicyConfig policy_config_from_json(const json& j) { return policy_from(j, "policy"); }
EstimatorConfig estimator_config_from_json(const json& j) { return estimator_from(j, "estimator"); }
EpisodeLimits limits_from_json(const json& j) { return limits_from(j, "limits"); }

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Reader r(j, "");
  if (auto* v = r.find("sim")) c.sim = sim_from(*v, "sim", c.sim);
  if (auto* v = r.find("optimize_sim")) c.optimize_sim = sim_from(*v, "optimize_sim", c.optimize_sim);
  if (auto* v = r.find("collision")) {
    Reader s(*v, "collision");
    s.get("n_samples", c.collision.n_samples);
    s.get("exponent", c.collision.exponent);
    s.get("safety_margin", c.collision.safety_margin);
    s.finish();
  }
  if (auto* v = r.find("weights")) {
    Reader s(*v, "weights");
    s.get("eta_col", c.weights.eta_col);
    s.get("eta_e", c.weights.eta_e);
    s.finish();
  }
  if (auto* v = r.find("optimizer")) {
    Reader s(*v, "optimizer");
    s.get("iterations", c.optimizer.iterations);
    s.get("learning_rate", c.optimizer.learning_rate);
    s.get("adam_beta1", c.optimizer.adam_beta1);
    s.get("adam_beta2", c.optimizer.adam_beta2);
    s.get("adam_eps", c.optimizer.adam_eps);
    s.get("checkpoint_interval", c.optimizer.checkpoint_interval);
    std::string mode(to_string(c.optimizer.gradient_mode));
    s.get("gradient_mode", mode);
    c.optimizer.gradient_mode = gradient_mode_from_string(mode);
    s.get("fd_step", c.optimizer.fd_step);
    s.finish();
  }
  if (auto* v = r.find("policy")) c.policy = policy_from(*v, "policy");
  if (auto* v = r.find("estimator")) c.estimator = estimator_from(*v, "estimator");
  if (auto* v = r.find("limits")) c.limits = limits_from(*v, "limits");
  if (auto* v = r.find("dataset")) {
    Reader s(*v, "dataset");
    s.get("train", c.dataset.train);
    s.get("eval_in", c.dataset.eval_in);
    s.get("eval_ood", c.dataset.eval_ood);
    s.get("seed", c.dataset.seed);
    std::vector<std::string> names;
    for (auto f : c.dataset.ood_families) names.emplace_back(to_string(f));
    names = s.strings("ood_families", names);
    c.dataset.ood_families.clear();
    for (const auto& n : names) c.dataset.ood_families.push_back(core_family_from_string(n));
    s.finish();
  }
  if (auto* v = r.find("gradcheck")) {
    Reader s(*v, "gradcheck");
    s.get("scenes", c.gradcheck.scenes);
    s.get("actions", c.gradcheck.actions);
    s.get("seed", c.gradcheck.seed);
    s.get("soft_top", c.gradcheck.soft_top);
    s.get("soft_right", c.gradcheck.soft_right);
    s.get("rel_l2_tol", c.gradcheck.rel_l2_tol);
    s.get("cosine_min", c.gradcheck.cosine_min);
    s.finish();
  }
  if (auto* v = r.find("eval")) {
    Reader s(*v, "eval");
    std::vector<std::string> names;
    for (auto x : c.eval.variants) names.emplace_back(to_string(x));
    names = s.strings("variants", names);
    c.eval.variants.clear();
    for (const auto& n : names) c.eval.variants.push_back(policy_variant_from_string(n));
    s.get("oracle", c.eval.oracle);
    s.get("write_svg", c.eval.write_svg);
    s.finish();
  }
  if (auto* v = r.find("sweep")) {
    Reader s(*v, "sweep");
    s.get("eta_e", c.sweep.eta_e);
    s.get("core_seed", c.sweep.core_seed);
    s.get("iterations", c.sweep.iterations);
    s.finish();
  }
  r.get("output_dir", c.output_dir);
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  r.finish();
  c.validate();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like key.path=value: " + assignment);
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw std::invalid_argument("empty path segment in override: " + key);
    parts.push_back(part);
  }
  for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
    if (!node->is_object()) throw std::invalid_argument("override path is not an object: " + key);
    node = &(*node)[parts[k]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw std::invalid_argument("override path is not an object: " + key);
  (*node)[parts.back()] = value;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config " + path + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

}  // namespace ninjacut
