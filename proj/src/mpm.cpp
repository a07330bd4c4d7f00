#include "ninjacut/mpm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace ninjacut {

using detail::M2;
using detail::Stencil;

double SimConfig::cfl_limit() const {
  return cell_size() / (10.0 * std::sqrt((lambda + 2.0 * mu) / density));
}

void SimConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("sim config: " + m); };
  if (grid_resolution < 16) fail("grid_resolution must be >= 16");
  if (!(domain_size > 0.0)) fail("domain_size must be positive");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (substeps < 1) fail("substeps must be >= 1");
  if (particles_per_cell < 1) fail("particles_per_cell must be >= 1");
  if (!(lambda > 0.0 && mu > 0.0 && yield_stress > 0.0 && density > 0.0))
    fail("material constants must be positive");
  if (!(friction_coeff >= 0.0)) fail("friction_coeff must be non-negative");
  if (!std::isfinite(gravity)) fail("gravity must be finite");
  if (dt > cfl_limit() * (1.0 + 1e-12))
    fail("dt " + std::to_string(dt) + " exceeds CFL bound " + std::to_string(cfl_limit()));
  const double dx = cell_size();
  if (!(board_height >= 3.0 * dx && board_height < soft_top)) fail("board_height out of range");
  if (!(soft_top <= domain_size - 4.0 * dx)) fail("soft_top too close to the domain edge");
  if (!(soft_right <= domain_size - 4.0 * dx)) fail("soft_right too close to the domain edge");
  if (contact_samples < 1) fail("contact_samples must be >= 1");
  knife.validate();
}

SimConfig SimConfig::reduced() {
  SimConfig c;
  c.grid_resolution = 64;
  c.particles_per_cell = 2;
  c.dt = 1.25e-4;
  c.substeps = 16;
  return c;
}

KnifePose default_start_pose(const CoreShape& core, const SimConfig& config, double margin) {
  return KnifePose{Vec2(core.max_x() + margin, config.soft_top + 0.004), kPi / 2.0};
}

namespace {

std::shared_ptr<const StaticField> build_statics(const CoreShape& core, const SimConfig& cfg) {
  auto st = std::make_shared<StaticField>();
  const int nn = detail::node_count(cfg);
  st->n = nn;
  st->dx = cfg.cell_size();
  st->core_phi.resize(static_cast<std::size_t>(nn) * nn);
  st->core_normal.resize(st->core_phi.size());
  st->board.resize(st->core_phi.size());
  const double reach = 3.0 * st->dx;
  const double x0 = core.min_x() - reach, x1 = core.max_x() + reach;
  const double y0 = core.min_y() - reach, y1 = core.max_y() + reach;
  for (int j = 0; j < nn; ++j) {
    for (int i = 0; i < nn; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * nn + i;
      const Vec2 xi(i * st->dx, j * st->dx);
      st->board[k] = xi.y() <= cfg.board_height ? 1 : 0;
      if (xi.x() < x0 || xi.x() > x1 || xi.y() < y0 || xi.y() > y1) {
        st->core_phi[k] = reach;
        continue;
      }
      const auto sd = core_sdf_full(core, xi);
      st->core_phi[k] = sd.value;
      st->core_normal[k] = sd.gradient;
    }
  }
  return st;
}

}  // namespace

SimState init_scene(const CoreShape& core, const SimConfig& config, std::uint64_t seed,
                    std::optional<KnifePose> knife) {
  config.validate();
  const double dx = config.cell_size();
  const double lo = 2.0 * dx, hi = config.domain_size - 2.0 * dx;
  if (core.contour.size() < 3) throw std::invalid_argument("core contour has fewer than 3 vertices");
  if (core.min_x() < lo || core.max_x() > hi || core.min_y() < lo || core.max_y() > hi) {
    std::ostringstream os;
    os << "core bounding box [" << core.min_x() << ", " << core.max_x() << "] x [" << core.min_y()
       << ", " << core.max_y() << "] violates the 2-cell domain margin [" << lo << ", " << hi << "]";
    throw std::invalid_argument(os.str());
  }
  if (!(core.anchor.x() < config.soft_right)) throw std::invalid_argument("core anchor right of soft region");

  SimState s;
  s.config = config;
  s.core = core;
  s.statics = build_statics(core, config);
  s.knife = knife.value_or(default_start_pose(core, config, 0.04)).normalized();
  s.tip_path.push_back(s.knife.tip);

  const int ppc = config.particles_per_cell;
  const int sx = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(ppc))));
  const int sy = (ppc + sx - 1) / sx;
  const double mass = config.density * dx * dx / ppc;
  const double vol = dx * dx / ppc;
  const double left = core.anchor.x(), right = config.soft_right;
  const double bottom = config.board_height, top = config.soft_top;
  CounterRng rng(CounterRng::stream_key(0x5eed5eedULL, seed));
  const int i0 = static_cast<int>(std::floor(left / dx));
  const int i1 = static_cast<int>(std::ceil(right / dx));
  const int j0 = static_cast<int>(std::floor(bottom / dx));
  const int j1 = static_cast<int>(std::ceil(top / dx));
  for (int j = j0; j < j1; ++j) {
    for (int i = i0; i < i1; ++i) {
      for (int k = 0; k < ppc; ++k) {
        const int a = k % sx, b = k / sx;
        const double jx = rng.uniform(-0.25, 0.25);
        const double jy = rng.uniform(-0.25, 0.25);
        const Vec2 x((i + (a + 0.5 + jx) / sx) * dx, (j + (b + 0.5 + jy) / sy) * dx);
        if (!(x.x() > left && x.x() < right && x.y() > bottom && x.y() < top)) continue;
        if (core_sdf(core, x) <= 0.0) continue;
        Particle p;
        p.x = x;
        p.mass = mass;
        p.volume = vol;
        s.particles.push_back(p);
      }
    }
  }
  if (s.particles.empty()) throw std::invalid_argument("soft region contains no particles");
  s.initial_soft_mass = soft_mass(s);
  s.grid.n = detail::node_count(config);
  return s;
}

double soft_mass(const SimState& state) {
  double m = 0.0;
  for (const auto& p : state.particles) m += p.mass;
  return m;
}

double knife_core_min_sdf(const CoreShape& core, const KnifePose& pose, const KnifeGeometry& geom,
                          int samples) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : edge_samples(pose, geom, samples)) best = std::min(best, core_sdf(core, q));
  return best;
}

Mat2 von_mises_return_map(const Mat2& F_trial, double mu, double lambda, double yield_stress) {
  (void)lambda;  // the volumetric log-strain is preserved, so lambda never enters
  if (!F_trial.allFinite()) throw std::invalid_argument("return map: non-finite F_trial");
  if (!(F_trial.determinant() > 0.0)) throw std::invalid_argument("return map: det(F_trial) <= 0");
  return detail::return_map<double>(F_trial, mu, yield_stress);
}

double deviatoric_stress(const Mat2& F, double mu) {
  return 2.0 * mu * detail::deviatoric_log_strain(F);
}

namespace detail {

NodeParams node_params(const SimConfig& cfg) {
  NodeParams np;
  np.dt = cfg.dt;
  np.gravity = cfg.gravity;
  np.friction = cfg.friction_coeff;
  np.knife_band = 0.5 * cfg.cell_size();
  np.knife_velocity_eps = 0.01;
  np.blade_length = cfg.knife.blade_length;
  np.half_thickness = cfg.knife.half_thickness;
  np.n = cfg.grid_resolution;
  return np;
}

void substep_pose(const Vec3& q0, const Vec3& q1, int s, int K, double dt, Vec3& q, Vec3& qd) {
  const double f = static_cast<double>(s + 1) / static_cast<double>(K);
  q = q0 + f * (q1 - q0);
  qd = (q1 - q0) / (K * dt);
}

void p2g(const std::vector<Particle>& ps, const SimConfig& cfg, SubstepWork& work) {
  const int nn = node_count(cfg);
  const std::size_t total = static_cast<std::size_t>(nn) * nn;
  work.m.assign(total, 0.0);
  work.mv.assign(total, Vec2::Zero());
  const double dx = cfg.cell_size();
  const double inv_dx = 1.0 / dx;
  for (const auto& p : ps) {
    const Stencil st = make_stencil(p.x, inv_dx);
    if (st.bx < 0 || st.by < 0 || st.bx + 2 >= nn || st.by + 2 >= nn)
      throw NumericalFailure("particle left the simulation domain");
    const double kappa = cfg.dt * p.volume * 4.0 * inv_dx * inv_dx;
    const Mat2 tau = kirchhoff_stress<double>(p.F, cfg.mu, cfg.lambda);
    const Mat2 A = -kappa * tau + p.mass * p.C;
    const Vec2 mom = p.mass * p.v;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double w = st.w(a, b);
        const std::size_t k = static_cast<std::size_t>(st.by + b) * nn + (st.bx + a);
        work.m[k] += w * p.mass;
        work.mv[k] += w * (mom + A * st.dpos(a, b, dx));
      }
    }
  }
}

void grid_update(const StaticField& stat, const SimConfig& cfg, const Vec3& q, const Vec3& qd,
                 SubstepWork& work) {
  const int nn = node_count(cfg);
  const double dx = cfg.cell_size();
  const NodeParams np = node_params(cfg);
  work.v.assign(work.m.size(), Vec2::Zero());
  work.dk.assign(work.m.size(), Vec2::Zero());

  const Vec2 tip(q[0], q[1]);
  const Vec2 end = tip + cfg.knife.blade_length * Vec2(std::cos(q[2]), std::sin(q[2]));
  const double pad = cfg.knife.half_thickness + np.knife_band + dx;
  work.kx0 = std::max(0, static_cast<int>(std::floor((std::min(tip.x(), end.x()) - pad) / dx)));
  work.kx1 = std::min(nn - 1, static_cast<int>(std::ceil((std::max(tip.x(), end.x()) + pad) / dx)));
  work.ky0 = std::max(0, static_cast<int>(std::floor((std::min(tip.y(), end.y()) - pad) / dx)));
  work.ky1 = std::min(nn - 1, static_cast<int>(std::ceil((std::max(tip.y(), end.y()) + pad) / dx)));

  const double qa[3] = {q[0], q[1], q[2]};
  const double qda[3] = {qd[0], qd[1], qd[2]};
  for (int j = 0; j < nn; ++j) {
    for (int i = 0; i < nn; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * nn + i;
      if (!(work.m[k] > 0.0)) continue;
      NodeStatic ns{stat.core_phi[k], stat.core_normal[k], stat.board[k] != 0};
      double vx, vy, dkx, dky;
      node_update<double>(i, j, Vec2(i * dx, j * dx), ns, np, work.knife_candidate(i, j),
                          work.mv[k].x(), work.mv[k].y(), work.m[k], qa, qda, vx, vy, dkx, dky);
      work.v[k] = Vec2(vx, vy);
      work.dk[k] = Vec2(dkx, dky);
    }
  }
}

SubstepOut g2p(std::vector<Particle>& ps, const SimConfig& cfg, const SubstepWork& work,
               std::vector<char>* touched) {
  const int nn = node_count(cfg);
  const double dx = cfg.cell_size();
  const double inv_dx = 1.0 / dx;
  SubstepOut out;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    Particle& p = ps[pi];
    const Stencil st = make_stencil(p.x, inv_dx);
    Vec2 v = Vec2::Zero();
    Mat2 B = Mat2::Zero();
    Vec2 dvk = Vec2::Zero();
    bool contact = false;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double w = st.w(a, b);
        const std::size_t k = static_cast<std::size_t>(st.by + b) * nn + (st.bx + a);
        const Vec2& vi = work.v[k];
        v += w * vi;
        B += w * vi * st.dpos(a, b, dx).transpose();
        dvk += w * work.dk[k];
        contact = contact || work.dk[k].x() != 0.0 || work.dk[k].y() != 0.0;
      }
    }
    if (contact) {
      // Knife work: knife-induced momentum change times displacement.
      out.energy += p.mass * dvk.dot(v);
      ++out.contacted;
      if (touched) (*touched)[pi] = 1;
    }
    p.C = 4.0 * inv_dx * inv_dx * B;
    p.v = v;
    p.x += cfg.dt * v;
    const Mat2 Ftr = (Mat2::Identity() + cfg.dt * p.C) * p.F;
    p.F = cfg.plasticity ? return_map<double>(Ftr, cfg.mu, cfg.yield_stress) : Ftr;
  }
  return out;
}

void check_finite(const std::vector<Particle>& ps) {
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps[i];
    if (!p.x.allFinite() || !p.v.allFinite() || !p.C.allFinite() || !p.F.allFinite())
      throw NumericalFailure("non-finite state at particle " + std::to_string(i));
    if (!(p.F.determinant() > 0.0))
      throw NumericalFailure("inverted deformation gradient at particle " + std::to_string(i));
  }
}

}  // namespace detail

StepRecord advance(SimState& state, const Vec3& q0, const Vec3& q1) {
  const SimConfig& cfg = state.config;
  detail::SubstepWork work;
  std::vector<char> touched(state.particles.size(), 0);
  StepRecord rec;
  const int K = cfg.substeps;
  for (int s = 0; s < K; ++s) {
    Vec3 q, qd;
    detail::substep_pose(q0, q1, s, K, cfg.dt, q, qd);
    detail::p2g(state.particles, cfg, work);
    detail::grid_update(*state.statics, cfg, q, qd, work);
    rec.energy += detail::g2p(state.particles, cfg, work, &touched).energy;
  }
  detail::check_finite(state.particles);
  if (!std::isfinite(rec.energy)) throw NumericalFailure("non-finite step energy");
  for (char t : touched) rec.contacted_particle_count += t;
  state.time += K * cfg.dt;
  state.knife = KnifePose{Vec2(q1[0], q1[1]), q1[2]}.normalized();
  state.tip_path.push_back(state.knife.tip);
  state.step_energies.push_back(rec.energy);
  state.cumulative_energy += rec.energy;
  state.grid.n = detail::node_count(cfg);
  state.grid.mass = std::move(work.m);
  state.grid.momentum = std::move(work.mv);
  rec.knife_core_min_sdf = knife_core_min_sdf(state.core, state.knife, cfg.knife, cfg.contact_samples);
  rec.removed_mass_running = cut_mass_mpm(state, state.tip_path);
  return rec;
}

StepRecord step(SimState& state, const KnifePose& knife_next) {
  const Vec3 q0(state.knife.tip.x(), state.knife.tip.y(), state.knife.theta);
  const Vec3 q1(knife_next.tip.x(), knife_next.tip.y(),
                state.knife.theta + wrap_angle(knife_next.theta - state.knife.theta));
  return advance(state, q0, q1);
}

CutPath::CutPath(std::vector<Vec2> tips, double far, bool terminated) {
  if (tips.empty()) throw std::invalid_argument("cut path needs at least one point");
  verts_.reserve(tips.size() + 3);
  verts_.emplace_back(tips.front().x(), far);
  for (auto& t : tips) verts_.push_back(t);
  if (terminated) verts_.emplace_back(far, tips.back().y());
  verts_.emplace_back(terminated ? far : tips.back().x(), -far);
}

int CutPath::winding(const Vec2& p) const {
  int w = 0;
  for (std::size_t k = 0; k + 1 < verts_.size(); ++k) {
    const Vec2& a = verts_[k];
    const Vec2& b = verts_[k + 1];
    const bool down = a.y() > p.y() && b.y() <= p.y();
    const bool up = a.y() <= p.y() && b.y() > p.y();
    if (!down && !up) continue;
    const double xi = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
    if (xi < p.x()) w += down ? 1 : -1;
  }
  return w;
}

double CutPath::signed_distance(const Vec2& p) const {
  Vec2 g;
  return signed_distance(p, g, nullptr, 0.0);
}

double CutPath::signed_distance(const Vec2& p, Vec2& grad_p, std::vector<Vec2>* tip_grad,
                                double scale) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t seg = 0;
  double best_t = 0.0;
  for (std::size_t k = 0; k + 1 < verts_.size(); ++k) {
    const Vec2 ab = verts_[k + 1] - verts_[k];
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - verts_[k]).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double d = (p - (verts_[k] + t * ab)).norm();
    if (d < best) {
      best = d;
      seg = k;
      best_t = t;
    }
  }
  const double sign = removed(p) ? 1.0 : -1.0;
  const Vec2 c = verts_[seg] + best_t * (verts_[seg + 1] - verts_[seg]);
  Vec2 n = best > 0.0 ? Vec2((p - c) / best) : Vec2(1.0, 0.0);
  grad_p = sign * n;
  if (tip_grad) {
    const std::size_t T = verts_.size() - 2;  // number of tips
    auto add = [&](std::size_t vert, const Vec2& g) {
      if (vert == 0) {
        (*tip_grad)[0].x() += g.x();
      } else if (vert == T + 1) {
        (*tip_grad)[T - 1].x() += g.x();
      } else {
        (*tip_grad)[vert - 1] += g;
      }
    };
    add(seg, -scale * sign * (1.0 - best_t) * n);
    add(seg + 1, -scale * sign * best_t * n);
  }
  return sign * best;
}

double cut_mass_mpm(const SimState& state, const std::vector<Vec2>& cut_path, bool terminated) {
  const CutPath path(cut_path, 10.0, terminated);
  double m = 0.0;
  for (const auto& p : state.particles)
    if (path.removed(p.x)) m += p.mass;
  return m;
}

std::string particle_snapshot_csv(const SimState& state, const std::vector<Vec2>& cut_path) {
  const CutPath path(cut_path);
  std::string out = "x,y,vx,vy,mass,removed_flag\n";
  char buf[192];
  for (const auto& p : state.particles) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%d\n", p.x.x(), p.x.y(), p.v.x(),
                  p.v.y(), p.mass, path.removed(p.x) ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace ninjacut
