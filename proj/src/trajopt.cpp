#include "ninjacut/trajopt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <ceres/jet.h>

#include "ninjacut/detail/mpm_kernels.hpp"

namespace ninjacut {

std::string_view to_string(GradientMode m) {
  return m == GradientMode::ReverseMode ? "reverse_mode" : "finite_difference";
}

GradientMode gradient_mode_from_string(std::string_view s) {
  if (s == "reverse_mode") return GradientMode::ReverseMode;
  if (s == "finite_difference") return GradientMode::FiniteDifference;
  throw std::invalid_argument("unknown gradient mode: " + std::string(s));
}

void OptimizerConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("optimizer: iterations must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw std::invalid_argument("optimizer: Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("optimizer: adam_eps must be positive");
  if (checkpoint_interval < 1) throw std::invalid_argument("optimizer: checkpoint_interval must be >= 1");
  if (!(fd_step > 0.0)) throw std::invalid_argument("optimizer: fd_step must be positive");
}

int thread_budget(int requested) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  int n = requested > 0 ? requested : hw;
  if (const char* env = std::getenv("NINJACUT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return std::max(1, std::min(n, hw));
}

Trajectory init_trajectory(const Scene& scene, const CollisionLossConfig& cfg) {
  Trajectory tr;
  const double x = scene.core.max_x() + cfg.safety_margin + 0.001;
  const double y0 = scene.sim.soft_top + 2.0 * kStepLength;
  tr.initial_pose = KnifePose{Vec2(x, y0), kPi / 2.0};
  const double drop = y0 - scene.sim.board_height;
  const auto T = static_cast<std::size_t>(std::ceil(drop / tr.step_length - 1e-9));
  tr.free_params.reserve(2 * T);
  for (std::size_t t = 0; t < T; ++t) {
    tr.free_params.push_back(-kPi / 2.0);
    tr.free_params.push_back(0.0);
  }
  return tr;
}

namespace {

using detail::M2;
using detail::Stencil;
using J3 = ceres::Jet<double, 3>;
using J4 = ceres::Jet<double, 4>;
using J9 = ceres::Jet<double, 9>;

M2<J4> seed4(const Mat2& F) {
  M2<J4> J;
  J(0, 0) = J4(F(0, 0), 0);
  J(0, 1) = J4(F(0, 1), 1);
  J(1, 0) = J4(F(1, 0), 2);
  J(1, 1) = J4(F(1, 1), 3);
  return J;
}

Mat2 pull4(const M2<J4>& out, const Mat2& gout) {
  Eigen::Vector4d g = Eigen::Vector4d::Zero();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) g += gout(r, c) * out(r, c).v;
  Mat2 gin;
  gin << g[0], g[1], g[2], g[3];
  return gin;
}

struct Adjoint {
  std::vector<Vec2> x, v;
  std::vector<Mat2> C, F;

  explicit Adjoint(std::size_t n)
      : x(n, Vec2::Zero()), v(n, Vec2::Zero()), C(n, Mat2::Zero()), F(n, Mat2::Zero()) {}
};

class Reverse {
 public:
  Reverse(const SimConfig& cfg, const StaticField& st, double eta_e, AdjointFault fault)
      : cfg_(cfg), st_(st), np_(detail::node_params(cfg)), nn_(detail::node_count(cfg)),
        dx_(cfg.cell_size()), inv_dx_(1.0 / cfg.cell_size()), eta_e_(eta_e), fault_(fault) {
    const std::size_t total = static_cast<std::size_t>(nn_) * nn_;
    vbar_.resize(total);
    dkbar_.resize(total);
    mvbar_.resize(total);
    mbar_.resize(total);
  }

  /// Pulls the adjoint of the post-substep state back to the pre-substep state `ps`.
  void substep(const std::vector<Particle>& ps, const Vec3& q, const Vec3& qd, Adjoint& adj,
               Vec3& qbar, Vec3& qdbar) {
    detail::p2g(ps, cfg_, work_);
    detail::grid_update(st_, cfg_, q, qd, work_);
    std::fill(vbar_.begin(), vbar_.end(), Vec2::Zero());
    std::fill(dkbar_.begin(), dkbar_.end(), Vec2::Zero());
    g2p_reverse(ps, adj);
    grid_reverse(q, qd, qbar, qdbar);
    p2g_reverse(ps, adj);
  }

 private:
  std::size_t node(const Stencil& st, int a, int b) const {
    return static_cast<std::size_t>(st.by + b) * nn_ + (st.bx + a);
  }

  void g2p_reverse(const std::vector<Particle>& ps, Adjoint& adj) {
    const double dt = cfg_.dt;
    const double c4 = 4.0 * inv_dx_ * inv_dx_;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Particle& p = ps[i];
      const Stencil st = detail::make_stencil(p.x, inv_dx_);
      Vec2 v = Vec2::Zero(), dvk = Vec2::Zero();
      Mat2 B = Mat2::Zero();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double w = st.w(a, b);
          const std::size_t k = node(st, a, b);
          v += w * work_.v[k];
          B += w * work_.v[k] * st.dpos(a, b, dx_).transpose();
          dvk += w * work_.dk[k];
        }
      const Mat2 Cn = c4 * B;
      const Mat2 G = Mat2::Identity() + dt * Cn;
      const Mat2 Ftr = G * p.F;
      Mat2 Ftrb = adj.F[i];
      if (cfg_.plasticity) {
        bool plastic = false;
        detail::return_map<double>(Ftr, cfg_.mu, cfg_.yield_stress, &plastic);
        if (plastic) Ftrb = pull4(detail::return_map<J4>(seed4(Ftr), cfg_.mu, cfg_.yield_stress), adj.F[i]);
      }
      const Mat2 Cb = adj.C[i] + dt * Ftrb * p.F.transpose();
      const Mat2 Fb = G.transpose() * Ftrb;
      const Vec2 vb = adj.v[i] + dt * adj.x[i] + eta_e_ * p.mass * dvk;
      const Vec2 dvkb = eta_e_ * p.mass * v;
      const Mat2 Bb = c4 * Cb;
      Vec2 xb = adj.x[i];
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double w = st.w(a, b);
          const std::size_t k = node(st, a, b);
          const Vec2 dpos = st.dpos(a, b, dx_);
          const Vec2& vk = work_.v[k];
          const Vec2 Bbd = Bb * dpos;
          vbar_[k] += w * (vb + Bbd);
          dkbar_[k] += w * dvkb;
          const double Wb = vk.dot(vb) + vk.dot(Bbd) + work_.dk[k].dot(dvkb);
          xb += Wb * st.grad_w(a, b, inv_dx_) - w * (Bb.transpose() * vk);
        }
      adj.x[i] = xb;
      adj.v[i].setZero();
      adj.C[i].setZero();
      adj.F[i] = Fb;
    }
  }

  void grid_reverse(const Vec3& q, const Vec3& qd, Vec3& qbar, Vec3& qdbar) {
    const J3 q3[3] = {J3(q[0]), J3(q[1]), J3(q[2])};
    const J3 qd3[3] = {J3(qd[0]), J3(qd[1]), J3(qd[2])};
    for (int j = 0; j < nn_; ++j) {
      for (int i = 0; i < nn_; ++i) {
        const std::size_t k = static_cast<std::size_t>(j) * nn_ + i;
        mvbar_[k].setZero();
        mbar_[k] = 0.0;
        if (!(work_.m[k] > 0.0)) continue;
        const Vec2 vb = vbar_[k], db = dkbar_[k];
        if (vb.isZero(0.0) && db.isZero(0.0)) continue;
        const detail::NodeStatic ns{st_.core_phi[k], st_.core_normal[k], st_.board[k] != 0};
        const Vec2 xi(i * dx_, j * dx_);
        if (work_.knife_candidate(i, j)) {
          const J9 qj[3] = {J9(q[0], 3), J9(q[1], 4), J9(q[2], 5)};
          const J9 qdj[3] = {J9(qd[0], 6), J9(qd[1], 7), J9(qd[2], 8)};
          J9 vx, vy, dkx, dky;
          detail::node_update<J9>(i, j, xi, ns, np_, true, J9(work_.mv[k].x(), 0),
                                  J9(work_.mv[k].y(), 1), J9(work_.m[k], 2), qj, qdj, vx, vy, dkx, dky);
          const Eigen::Matrix<double, 9, 1> g = vb.x() * vx.v + vb.y() * vy.v + db.x() * dkx.v + db.y() * dky.v;
          mvbar_[k] = Vec2(g[0], g[1]);
          mbar_[k] = g[2];
          qbar += Vec3(g[3], g[4], g[5]);
          qdbar += Vec3(g[6], g[7], g[8]);
        } else {
          J3 vx, vy, dkx, dky;
          detail::node_update<J3>(i, j, xi, ns, np_, false, J3(work_.mv[k].x(), 0),
                                  J3(work_.mv[k].y(), 1), J3(work_.m[k], 2), q3, qd3, vx, vy, dkx, dky);
          const Eigen::Vector3d g = vb.x() * vx.v + vb.y() * vy.v;
          mvbar_[k] = Vec2(g[0], g[1]);
          mbar_[k] = g[2];
        }
      }
    }
  }

  void p2g_reverse(const std::vector<Particle>& ps, Adjoint& adj) {
    const double c4 = 4.0 * inv_dx_ * inv_dx_;
    const double sign = fault_ == AdjointFault::SignFlip ? -1.0 : 1.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Particle& p = ps[i];
      const Stencil st = detail::make_stencil(p.x, inv_dx_);
      const double kappa = cfg_.dt * p.volume * c4;
      const Mat2 tau = detail::kirchhoff_stress<double>(p.F, cfg_.mu, cfg_.lambda);
      const Mat2 A = -kappa * tau + p.mass * p.C;
      const Vec2 mom = p.mass * p.v;
      Vec2 xb = Vec2::Zero(), vb = Vec2::Zero();
      Mat2 Ab = Mat2::Zero();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double w = st.w(a, b);
          const std::size_t k = node(st, a, b);
          const Vec2 dpos = st.dpos(a, b, dx_);
          const Vec2& mvb = mvbar_[k];
          const double Wb = mbar_[k] * p.mass + mvb.dot(mom + A * dpos);
          vb += w * p.mass * mvb;
          Ab += w * mvb * dpos.transpose();
          xb += Wb * st.grad_w(a, b, inv_dx_) - w * (A.transpose() * mvb);
        }
      adj.x[i] += xb;
      adj.v[i] += vb;
      adj.C[i] += p.mass * Ab;
      const Mat2 taub = sign * -kappa * Ab;
      adj.F[i] += pull4(detail::kirchhoff_stress<J4>(seed4(p.F), cfg_.mu, cfg_.lambda), taub);
    }
  }

  const SimConfig& cfg_;
  const StaticField& st_;
  detail::NodeParams np_;
  int nn_;
  double dx_, inv_dx_;
  double eta_e_;
  AdjointFault fault_;
  detail::SubstepWork work_;
  std::vector<Vec2> vbar_, dkbar_, mvbar_;
  std::vector<double> mbar_;
};

void run_substep(std::vector<Particle>& ps, const SimState& state, const Vec3& q0, const Vec3& q1,
                 int s, detail::SubstepWork& work, double& energy) {
  const SimConfig& cfg = state.config;
  Vec3 q, qd;
  detail::substep_pose(q0, q1, s, cfg.substeps, cfg.dt, q, qd);
  detail::p2g(ps, cfg, work);
  detail::grid_update(*state.statics, cfg, q, qd, work);
  energy += detail::g2p(ps, cfg, work).energy;
}

GradientResult reverse_gradient(const Trajectory& traj, const Scene& scene,
                                const LossWeights& weights, const CollisionLossConfig& ccfg,
                                const OptimizerConfig& opt, AdjointFault fault) {
  const auto q = traj.raw_poses();
  const std::size_t T = traj.steps();
  const int K = scene.sim.substeps;
  const auto I = static_cast<std::size_t>(opt.checkpoint_interval);
  std::vector<Vec2> tips;
  for (const auto& v : q) tips.emplace_back(v[0], v[1]);

  // Forward pass with action-boundary checkpoints.
  SimState state = init_scene(scene.core, scene.sim, scene.seed, traj.initial_pose);
  std::vector<std::vector<Particle>> checkpoints;
  checkpoints.push_back(state.particles);
  std::vector<Particle> ps = state.particles;
  detail::SubstepWork work;
  double energy = 0.0, emax = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double e = 0.0;
    try {
      for (int s = 0; s < K; ++s) run_substep(ps, state, q[t], q[t + 1], s, work, e);
      detail::check_finite(ps);
    } catch (const NumericalFailure& ex) {
      LossBreakdown partial;
      partial.steps = static_cast<int>(t);
      throw LossEvaluationError(std::string(ex.what()) + " (segment " + std::to_string(t / I) + ")",
                                partial, static_cast<int>(t));
    }
    energy += e;
    emax = t == 0 ? e : std::max(emax, e);
    if ((t + 1) % I == 0 && t + 1 < T) checkpoints.push_back(ps);
  }

  const double M0 = state.initial_soft_mass;
  std::vector<Vec2> gx, gtips;
  const double ratio = soft_cut_ratio(ps, tips, scene.sim.cell_size(), M0, &gx, &gtips);

  std::vector<Vec3> qbar(T + 1, Vec3::Zero());
  double collision = 0.0;
  double min_clear = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t <= T; ++t) {
    const KnifePose pose{tips[t], q[t][2]};
    min_clear = std::min(min_clear, knife_core_min_sdf(scene.core, pose, scene.sim.knife, ccfg.n_samples));
    if (t == 0) continue;
    Vec3 g;
    collision += collision_loss(pose, scene.core, scene.sim.knife, ccfg, g);
    qbar[t] += weights.eta_col * g;
  }
  for (std::size_t t = 0; t <= T; ++t) {
    qbar[t].x() -= gtips[t].x();
    qbar[t].y() -= gtips[t].y();
  }

  GradientResult out;
  out.loss = make_breakdown(ratio, collision, energy, weights);
  std::swap(state.particles, ps);
  out.loss.cut_mass_ratio = cut_mass_mpm(state, tips) / M0;
  std::swap(state.particles, ps);
  out.loss.max_step_energy = emax;
  out.loss.min_clearance = min_clear;
  out.loss.steps = static_cast<int>(T);

  Adjoint adj(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) adj.x[i] = -gx[i];

  Reverse rev(scene.sim, *state.statics, weights.eta_e, fault);
  const std::size_t nseg = T == 0 ? 0 : (T + I - 1) / I;
  std::vector<std::vector<Particle>> states;
  for (std::size_t seg = nseg; seg-- > 0;) {
    const std::size_t t0 = seg * I, t1 = std::min(T, t0 + I);
    states.clear();
    std::vector<Particle> cur = checkpoints[seg];
    try {
      for (std::size_t t = t0; t < t1; ++t) {
        for (int s = 0; s < K; ++s) {
          states.push_back(cur);
          double e = 0.0;
          run_substep(cur, state, q[t], q[t + 1], s, work, e);
        }
      }
      detail::check_finite(cur);
    } catch (const NumericalFailure& ex) {
      throw LossEvaluationError(std::string(ex.what()) + " (recomputing segment " +
                                    std::to_string(seg) + ")",
                                out.loss, static_cast<int>(t0));
    }
    for (std::size_t idx = states.size(); idx-- > 0;) {
      const std::size_t t = t0 + idx / static_cast<std::size_t>(K);
      const int s = static_cast<int>(idx % static_cast<std::size_t>(K));
      Vec3 qs, qds, qsb = Vec3::Zero(), qdsb = Vec3::Zero();
      detail::substep_pose(q[t], q[t + 1], s, K, scene.sim.dt, qs, qds);
      rev.substep(states[idx], qs, qds, adj, qsb, qdsb);
      const double f = static_cast<double>(s + 1) / K;
      const double inv = 1.0 / (K * scene.sim.dt);
      qbar[t] += (1.0 - f) * qsb - inv * qdsb;
      qbar[t + 1] += f * qsb + inv * qdsb;
    }
  }

  out.grad.assign(traj.free_params.size(), 0.0);
  Vec3 S = Vec3::Zero();
  for (std::size_t t = T; t-- > 0;) {
    S += qbar[t + 1];
    const double phi = traj.free_params[2 * t];
    const double th = std::tanh(traj.free_params[2 * t + 1]);
    out.grad[2 * t] = traj.step_length * (-S.x() * std::sin(phi) + S.y() * std::cos(phi));
    out.grad[2 * t + 1] = S.z() * traj.dtheta_max * (1.0 - th * th);
  }
  return out;
}

GradientResult fd_gradient(const Trajectory& traj, const Scene& scene, const LossWeights& weights,
                           const CollisionLossConfig& ccfg, const OptimizerConfig& opt) {
  GradientResult out;
  out.loss = total_loss(traj, scene, weights, ccfg);
  out.grad.assign(traj.free_params.size(), 0.0);
  Trajectory probe = traj;
  for (std::size_t j = 0; j < traj.free_params.size(); ++j) {
    probe.free_params[j] = traj.free_params[j] + opt.fd_step;
    const double lp = total_loss(probe, scene, weights, ccfg).total;
    probe.free_params[j] = traj.free_params[j] - opt.fd_step;
    const double lm = total_loss(probe, scene, weights, ccfg).total;
    probe.free_params[j] = traj.free_params[j];
    out.grad[j] = (lp - lm) / (2.0 * opt.fd_step);
  }
  return out;
}

}  // namespace

GradientResult gradient(const Trajectory& traj, const Scene& scene, const LossWeights& weights,
                        const CollisionLossConfig& cfg, const OptimizerConfig& opt,
                        AdjointFault fault) {
  traj.validate();
  weights.validate();
  cfg.validate();
  opt.validate();
  if (opt.gradient_mode == GradientMode::FiniteDifference)
    return fd_gradient(traj, scene, weights, cfg, opt);
  return reverse_gradient(traj, scene, weights, cfg, opt, fault);
}

OptimizeResult optimize(const Trajectory& traj0, const Scene& scene, const LossWeights& weights,
                        const CollisionLossConfig& cfg, const OptimizerConfig& opt,
                        const IterationCallback& on_iteration) {
  opt.validate();
  traj0.validate();
  OptimizeResult res;
  res.best = traj0;
  const std::size_t P = traj0.free_params.size();
  std::vector<double> params = traj0.free_params, best_params = params;
  std::vector<double> m1(P, 0.0), m2(P, 0.0);
  double best = std::numeric_limits<double>::infinity();
  int updates = 0;
  for (int it = 0; it <= opt.iterations; ++it) {
    Trajectory cur = traj0;
    cur.free_params = params;
    LossBreakdown lb;
    std::vector<double> grad;
    bool ok = true;
    try {
      if (it < opt.iterations) {
        auto gr = gradient(cur, scene, weights, cfg, opt);
        lb = gr.loss;
        grad = std::move(gr.grad);
      } else {
        lb = total_loss(cur, scene, weights, cfg);
      }
    } catch (const NumericalFailure&) {
      ok = false;
      lb = LossBreakdown{};
      lb.total = std::numeric_limits<double>::infinity();
    }
    res.history.push_back(lb);
    res.failed.push_back(!ok);
    if (ok && lb.total < best) {
      best = lb.total;
      best_params = params;
      res.best_index = res.history.size() - 1;
    }
    if (on_iteration) on_iteration(it, lb);
    if (it == opt.iterations) break;
    if (!ok) {
      params = best_params;
      continue;
    }
    ++updates;
    const double b1t = 1.0 - std::pow(opt.adam_beta1, updates);
    const double b2t = 1.0 - std::pow(opt.adam_beta2, updates);
    for (std::size_t j = 0; j < P; ++j) {
      m1[j] = opt.adam_beta1 * m1[j] + (1.0 - opt.adam_beta1) * grad[j];
      m2[j] = opt.adam_beta2 * m2[j] + (1.0 - opt.adam_beta2) * grad[j] * grad[j];
      params[j] -= opt.learning_rate * (m1[j] / b1t) / (std::sqrt(m2[j] / b2t) + opt.adam_eps);
    }
  }
  res.best.free_params = best_params;
  return res;
}

std::vector<Demonstration> collect_demonstrations(const std::vector<CoreShape>& cores,
                                                  const LossWeights& weights,
                                                  const CollisionLossConfig& cfg,
                                                  const OptimizerConfig& opt,
                                                  const DemonstrationOptions& options) {
  if (cores.empty()) throw std::invalid_argument("collect_demonstrations: empty dataset");
  std::vector<Demonstration> demos(cores.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cores.size(); i = next++) {
      Demonstration& d = demos[i];
      d.core_index = i;
      d.core = cores[i];
      try {
        const Scene opt_scene{cores[i], options.optimize_sim, options.seed};
        const Trajectory t0 = init_trajectory(opt_scene, cfg);
        auto res = optimize(t0, opt_scene, weights, cfg, opt);
        d.trajectory = res.best;
        d.loss_history = std::move(res.history);
        const Scene eval_scene{cores[i], options.evaluate_sim, options.seed};
        d.breakdown_final = total_loss(d.trajectory, eval_scene, weights, cfg);
      } catch (const std::exception& e) {
        d.failed = true;
        d.failure = e.what();
      }
    }
  };
  const int n = std::min<int>(thread_budget(options.threads), static_cast<int>(cores.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return demos;
}

}  // namespace ninjacut
