#include "ninjacut/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ninjacut {

GradcheckCase gradcheck_case(const GradcheckSpec& spec, int index) {
  const auto s = static_cast<std::uint64_t>(index);
  CounterRng rng(CounterRng::stream_key(spec.seed, s));
  GradcheckCase c;
  c.scene.sim = SimConfig::reduced();
  c.scene.sim.soft_top = spec.soft_top;
  c.scene.sim.soft_right = spec.soft_right;
  c.scene.core = gen_core(CoreFamily::Spline3, CounterRng::stream_key(spec.seed + 1, s));
  c.scene.seed = s;
  auto& tr = c.trajectory;
  // Start just above the soft top beside the core so the blade enters material.
  tr.initial_pose = KnifePose{Vec2(c.scene.core.max_x() + rng.uniform(0.005, 0.03), spec.soft_top + 0.004), kPi / 2};
  for (int t = 0; t < spec.actions; ++t) {
    tr.free_params.push_back(-kPi / 2 + rng.uniform(-0.3, 0.3));
    tr.free_params.push_back(rng.uniform(-1.0, 1.0));
  }
  return c;
}

bool GradcheckReport::pass() const {
  if (rows.empty()) return false;
  for (const auto& r : rows)
    if (!r.pass) return false;
  return true;
}

double relative_l2(const std::vector<double>& a, const std::vector<double>& ref) {
  if (a.size() != ref.size()) throw std::invalid_argument("relative_l2: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += (a[k] - ref[k]) * (a[k] - ref[k]);
    den += ref[k] * ref[k];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
  return std::sqrt(num / den);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: size mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

namespace {

template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < n; k = next++) body(k);
  };
  const int count = std::max(1, std::min<int>(thread_budget(threads), static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int k = 1; k < count; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckSpec& spec, const LossWeights& weights, const CollisionLossConfig& cfg,
                              const OptimizerConfig& opt, AdjointFault fault, int threads) {
  spec.validate();
  GradcheckReport rep;
  rep.rows.resize(static_cast<std::size_t>(spec.scenes));
  parallel_for(rep.rows.size(), threads, [&](std::size_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    const GradcheckCase c = gradcheck_case(spec, static_cast<int>(k));
    OptimizerConfig rev = opt;
    rev.gradient_mode = GradientMode::ReverseMode;
    OptimizerConfig fd = opt;
    fd.gradient_mode = GradientMode::FiniteDifference;
    const auto r = gradient(c.trajectory, c.scene, weights, cfg, rev, fault);
    const auto f = gradient(c.trajectory, c.scene, weights, cfg, fd);
    GradcheckRow& row = rep.rows[k];
    row.scene = static_cast<int>(k);
    row.particles = init_scene(c.scene.core, c.scene.sim, c.scene.seed).particles.size();
    row.loss = r.loss.total;
    row.rel_l2 = relative_l2(r.grad, f.grad);
    row.cosine = cosine_similarity(r.grad, f.grad);
    row.pass = row.rel_l2 < spec.rel_l2_tol && row.cosine > spec.cosine_min;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  return rep;
}

std::vector<SweepRow> energy_sweep(const RunConfig& cfg, const std::function<void(const SweepRow&)>& on_row) {
  cfg.sweep.validate();
  Scene scene;
  scene.core = gen_core(CoreFamily::Spline3, cfg.sweep.core_seed);
  scene.sim = cfg.optimize_sim;
  scene.seed = cfg.seed;
  OptimizerConfig opt = cfg.optimizer;
  opt.iterations = cfg.sweep.iterations;
  const Trajectory init = init_trajectory(scene, cfg.collision);
  std::vector<SweepRow> rows;
  for (double eta : cfg.sweep.eta_e) {
    LossWeights w = cfg.weights;
    w.eta_e = eta;
    const OptimizeResult res = optimize(init, scene, w, cfg.collision, opt);
    const LossBreakdown& b = res.history[res.best_index];
    SweepRow row;
    row.eta_e = eta;
    row.total_energy = b.energy_term;
    row.max_step_energy = b.max_step_energy;
    row.cut_mass_ratio = b.cut_mass_ratio;
    row.collision_term = b.collision_term;
    row.loss = b.total;
    row.initial = init;
    row.best = res.best;
    row.history = res.history;
    row.failed = res.failed;
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationRow> policy_ablation(const std::vector<CoreShape>& cores, const EpisodeConfig& base,
                                         const std::string& parameter, const std::vector<double>& values,
                                         int threads) {
  std::vector<AblationRow> rows;
  for (double v : values) {
    EpisodeConfig cfg = base;
    if (parameter == "tolerance_increment") {
      cfg.policy.tolerance_increment = v;
    } else if (parameter == "retract_steps") {
      cfg.policy.retract_steps = static_cast<int>(std::lround(v));
    } else if (parameter == "threshold") {
      cfg.estimator.threshold = v;
    } else {
      throw std::invalid_argument("unsupported ablation parameter: " + parameter);
    }
    cfg.policy.validate();
    cfg.estimator.validate();
    std::vector<EvalEpisode> eps;
    const auto table = evaluate({EvalSplit{"ablation", cores}}, {PolicyVariant::Adaptive}, cfg, &eps, {}, threads);
    AblationRow row;
    row.parameter = parameter;
    row.value = v;
    row.episodes = table.front().episodes;
    row.mean = table.front().mean;
    for (const auto& e : eps) row.forward_steps += static_cast<double>(e.result.forward_steps());
    if (!eps.empty()) row.forward_steps /= static_cast<double>(eps.size());
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream o;
  o << "parameter,value,episodes,completion,cut_mass_ratio,collision_ratio,avg_energy,max_energy,forward_steps\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.parameter.c_str(), r.value,
                  r.episodes, r.mean.completion, r.mean.cut_mass_ratio, r.mean.collision_ratio, r.mean.avg_energy,
                  r.mean.max_energy, r.forward_steps);
    o << buf;
  }
  return o.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream o;
  o << "eta_e,total_energy,max_step_energy,cut_mass_ratio,collision_term,loss\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.eta_e, r.total_energy,
                  r.max_step_energy, r.cut_mass_ratio, r.collision_term, r.loss);
    o << buf;
  }
  return o.str();
}

}  // namespace ninjacut
