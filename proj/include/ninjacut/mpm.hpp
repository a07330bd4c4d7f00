#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ninjacut/detail/mpm_kernels.hpp"
#include "ninjacut/geometry.hpp"

namespace ninjacut {

using Vec3 = Eigen::Vector3d;

/// Thrown when any particle quantity becomes non-finite.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  int grid_resolution = 128;
  double domain_size = 0.25;
  double dt = 8e-5;
  /// Substeps per policy action; one action lasts substeps * dt.
  int substeps = 25;
  int particles_per_cell = 4;
  double lambda = 1388.89;
  double mu = 2083.33;
  double yield_stress = 200.0;
  double density = 1000.0;
  double gravity = 9.8;
  double friction_coeff = 0.4;
  /// Board top surface height.
  double board_height = 0.02;
  /// Soft-region box; the left edge sits at the core anchor.
  double soft_top = 0.09;
  double soft_right = 0.23;
  /// Knife sample points used for knife_core_min_sdf.
  int contact_samples = 5;
  bool deterministic = true;
  bool plasticity = true;
  KnifeGeometry knife;

  double cell_size() const { return domain_size / grid_resolution; }
  double cfl_limit() const;
  void validate() const;

  /// 64x64, 2 particles/cell configuration used inside optimization loops.
  static SimConfig reduced();
};

struct Particle {
  Vec2 x = Vec2::Zero();
  Vec2 v = Vec2::Zero();
  Mat2 C = Mat2::Zero();
  Mat2 F = Mat2::Identity();
  double mass = 0.0;
  double volume = 0.0;
};

struct Grid {
  int n = 0;
  std::vector<double> mass;
  std::vector<Vec2> momentum;
};

/// Rigid data that never changes during an episode (core and board SDF at grid nodes).
struct StaticField {
  int n = 0;
  double dx = 0.0;
  std::vector<double> core_phi;
  std::vector<Vec2> core_normal;
  std::vector<char> board;
};

struct SimState {
  SimConfig config;
  CoreShape core;
  std::vector<Particle> particles;
  Grid grid;
  KnifePose knife;
  double time = 0.0;
  double cumulative_energy = 0.0;
  std::vector<double> step_energies;
  /// Executed knife-tip positions, starting with the initial pose.
  std::vector<Vec2> tip_path;
  double initial_soft_mass = 0.0;
  std::shared_ptr<const StaticField> statics;
};

struct StepRecord {
  double energy = 0.0;
  int contacted_particle_count = 0;
  double knife_core_min_sdf = 0.0;
  double removed_mass_running = 0.0;
};

/// Default knife start: blade vertical, clear of the core by the given lateral margin,
/// two steps above the soft material.
KnifePose default_start_pose(const CoreShape& core, const SimConfig& config, double margin);

SimState init_scene(const CoreShape& core, const SimConfig& config, std::uint64_t seed,
                    std::optional<KnifePose> knife = std::nullopt);

/// Advances one policy action, moving the knife linearly from state.knife to knife_next.
StepRecord step(SimState& state, const KnifePose& knife_next);

/// Same as step with raw (unwrapped) start and end poses (x, y, theta).
StepRecord advance(SimState& state, const Vec3& q0, const Vec3& q1);

/// Min core SDF over the contact samples of a pose.
double knife_core_min_sdf(const CoreShape& core, const KnifePose& pose, const KnifeGeometry& geom,
                          int samples);

Mat2 von_mises_return_map(const Mat2& F_trial, double mu, double lambda, double yield_stress);
/// Deviatoric Kirchhoff stress magnitude 2 mu |dev(log s)| from singular values of F.
double deviatoric_stress(const Mat2& F, double mu);

/// Knife-tip path extended vertically upward at entry and downward at exit.
class CutPath {
 public:
  /// A terminated path is closed off horizontally to the right at its last tip,
  /// so only material above the termination height counts as cut.
  explicit CutPath(std::vector<Vec2> tips, double far = 10.0, bool terminated = false);

  /// Signed horizontal-ray crossings of the extended path strictly left of p;
  /// positive means p lies on the cut-off side.
  int winding(const Vec2& p) const;
  bool removed(const Vec2& p) const { return winding(p) > 0; }
  /// Distance to the extended path, positive on the cut-off side.
  double signed_distance(const Vec2& p) const;
  /// Signed distance with gradients: d/dp, and d/d(tip k) accumulated into tip_grad.
  double signed_distance(const Vec2& p, Vec2& grad_p, std::vector<Vec2>* tip_grad, double scale) const;

  const std::vector<Vec2>& vertices() const { return verts_; }

 private:
  std::vector<Vec2> verts_;
};

/// Mass of particles strictly on the cut-off side of the path.
double cut_mass_mpm(const SimState& state, const std::vector<Vec2>& cut_path, bool terminated = false);
double soft_mass(const SimState& state);

/// CSV: x,y,vx,vy,mass,removed_flag.
std::string particle_snapshot_csv(const SimState& state, const std::vector<Vec2>& cut_path);

namespace detail {

/// Scratch grid buffers for one substep; reused across substeps.
struct SubstepWork {
  std::vector<double> m;
  std::vector<Vec2> mv;
  std::vector<Vec2> v;
  /// Velocity change applied by the knife projection at each node.
  std::vector<Vec2> dk;
  /// Inclusive node box that may intersect the knife band this substep.
  int kx0 = 0, kx1 = -1, ky0 = 0, ky1 = -1;

  bool knife_candidate(int i, int j) const { return i >= kx0 && i <= kx1 && j >= ky0 && j <= ky1; }
};

struct SubstepOut {
  double energy = 0.0;
  int contacted = 0;
};

/// Nodes per side of the background grid.
inline int node_count(const SimConfig& cfg) { return cfg.grid_resolution + 1; }
NodeParams node_params(const SimConfig& cfg);

void p2g(const std::vector<Particle>& ps, const SimConfig& cfg, SubstepWork& work);
void grid_update(const StaticField& st, const SimConfig& cfg, const Vec3& q, const Vec3& qd,
                 SubstepWork& work);
/// Marks particles whose stencil contains a knife-modified node in touched (if given).
SubstepOut g2p(std::vector<Particle>& ps, const SimConfig& cfg, const SubstepWork& work,
               std::vector<char>* touched = nullptr);

/// Pose and rigid velocity of substep s out of K between raw poses q0 and q1.
void substep_pose(const Vec3& q0, const Vec3& q1, int s, int K, double dt, Vec3& q, Vec3& qd);
void check_finite(const std::vector<Particle>& ps);

}  // namespace detail

}  // namespace ninjacut
