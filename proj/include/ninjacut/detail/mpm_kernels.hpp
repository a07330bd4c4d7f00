#pragma once

// Scalar-generic building blocks of one MLS-MPM substep. Instantiated with
// double in the forward solver and with ceres::Jet in the adjoint so both
// paths share one arithmetic definition.

#include <cmath>

#include <Eigen/Dense>
#include <ceres/jet.h>

#include "ninjacut/geometry.hpp"

namespace ninjacut::detail {

template <class T>
using M2 = Eigen::Matrix<T, 2, 2>;

inline double scalar_of(double x) { return x; }
template <int N>
double scalar_of(const ceres::Jet<double, N>& x) {
  return x.a;
}

/// Quadratic B-spline stencil of a particle: base node and per-axis weights.
struct Stencil {
  int bx = 0;
  int by = 0;
  double fx = 0.0;
  double fy = 0.0;
  double wx[3]{}, wy[3]{};
  double dwx[3]{}, dwy[3]{};

  double w(int a, int b) const { return wx[a] * wy[b]; }
  /// Gradient of w(a, b) with respect to the particle position.
  Vec2 grad_w(int a, int b, double inv_dx) const {
    return Vec2(dwx[a] * wy[b], wx[a] * dwy[b]) * inv_dx;
  }
  /// Node position minus particle position.
  Vec2 dpos(int a, int b, double dx) const { return Vec2((a - fx) * dx, (b - fy) * dx); }
};

inline Stencil make_stencil(const Vec2& x, double inv_dx) {
  Stencil s;
  const double gx = x.x() * inv_dx;
  const double gy = x.y() * inv_dx;
  s.bx = static_cast<int>(std::floor(gx - 0.5));
  s.by = static_cast<int>(std::floor(gy - 0.5));
  s.fx = gx - s.bx;
  s.fy = gy - s.by;
  auto fill = [](double f, double* w, double* dw) {
    w[0] = 0.5 * (1.5 - f) * (1.5 - f);
    w[1] = 0.75 - (f - 1.0) * (f - 1.0);
    w[2] = 0.5 * (f - 0.5) * (f - 0.5);
    dw[0] = f - 1.5;
    dw[1] = -2.0 * (f - 1.0);
    dw[2] = f - 0.5;
  };
  fill(s.fx, s.wx, s.dwx);
  fill(s.fy, s.wy, s.dwy);
  return s;
}

/// Rotation factor of the 2D polar decomposition F = R S.
template <class T>
M2<T> polar_rotation(const M2<T>& F) {
  using std::atan2;
  using std::cos;
  using std::sin;
  const T ang = atan2(F(1, 0) - F(0, 1), F(0, 0) + F(1, 1));
  const T c = cos(ang), s = sin(ang);
  M2<T> R;
  R << c, -s, s, c;
  return R;
}

/// Fixed-corotated Kirchhoff stress.
template <class T>
M2<T> kirchhoff_stress(const M2<T>& F, double mu, double lambda) {
  const M2<T> R = polar_rotation(F);
  const T J = F.determinant();
  M2<T> tau = T(2.0 * mu) * (F - R) * F.transpose();
  const T vol = T(lambda) * (J - T(1.0)) * J;
  tau(0, 0) += vol;
  tau(1, 1) += vol;
  return tau;
}

/// Principal stretches of F (descending) with F = U diag(s) V^T.
template <class T>
void svd2(const M2<T>& F, M2<T>& U, T& s1, T& s2, M2<T>& V) {
  using std::atan2;
  using std::cos;
  using std::sin;
  using std::sqrt;
  const M2<T> R = polar_rotation(F);
  const M2<T> S = R.transpose() * F;
  const T a = S(0, 0);
  const T b = T(0.5) * (S(0, 1) + S(1, 0));
  const T c = S(1, 1);
  const T half = T(0.5) * (a - c);
  const T mean = T(0.5) * (a + c);
  const T r2 = half * half + b * b;
  T ang = T(0.0);
  T r = T(0.0);
  if (scalar_of(r2) > 0.0) {
    r = sqrt(r2);
    ang = T(0.5) * atan2(b, half);
  }
  s1 = mean + r;
  s2 = mean - r;
  const T cs = cos(ang), sn = sin(ang);
  V << cs, -sn, sn, cs;
  U = R * V;
}

/// Deviatoric Hencky-strain magnitude |dev(log s)| of F.
inline double deviatoric_log_strain(const Mat2& F) {
  M2<double> U, V;
  double s1, s2;
  svd2<double>(F, U, s1, s2, V);
  const double e1 = std::log(s1), e2 = std::log(s2);
  return std::abs(e1 - e2) / std::sqrt(2.0);
}

/// Von Mises radial return in principal log-stretch space; preserves tr(log s).
template <class T>
M2<T> return_map(const M2<T>& F, double mu, double yield_stress, bool* plastic = nullptr) {
  using std::exp;
  using std::log;
  M2<T> U, V;
  T s1, s2;
  svd2<T>(F, U, s1, s2, V);
  const T e1 = log(s1), e2 = log(s2);
  const T d1 = T(0.5) * (e1 - e2);
  // dev = (d1, -d1); |dev| = sqrt(2) |d1|, d1 >= 0 since s1 >= s2.
  const double dev = std::sqrt(2.0) * scalar_of(d1);
  const double limit = yield_stress / (2.0 * mu);
  if (plastic) *plastic = dev > limit;
  if (!(dev > limit)) return F;
  const T shrink = T(limit / std::sqrt(2.0)) / d1;  // new d1 / old d1
  const T mean = T(0.5) * (e1 + e2);
  const T n1 = mean + shrink * d1;
  const T n2 = mean - shrink * d1;
  M2<T> Sig = M2<T>::Zero();
  Sig(0, 0) = exp(n1);
  Sig(1, 1) = exp(n2);
  return U * Sig * V.transpose();
}

/// Static per-node rigid data (core and board never move).
struct NodeStatic {
  double core_phi = 1.0;
  Vec2 core_normal = Vec2::Zero();
  bool board = false;
};

/// Coulomb projection of velocity u against a rigid surface with outward normal n
/// moving at vr. Only approaching relative velocities are modified.
template <class T>
void coulomb_project(T& ux, T& uy, const T& vrx, const T& vry, const T& nx, const T& ny,
                     double friction) {
  using std::sqrt;
  const T rx = ux - vrx;
  const T ry = uy - vry;
  const T vn = rx * nx + ry * ny;
  if (!(scalar_of(vn) < 0.0)) return;
  const T tx = rx - vn * nx;
  const T ty = ry - vn * ny;
  const T tn2 = tx * tx + ty * ty;
  T ox = T(0.0), oy = T(0.0);
  if (scalar_of(tn2) > 0.0) {
    const T tn = sqrt(tn2);
    const T keep = tn + T(friction) * vn;
    if (scalar_of(keep) > 0.0) {
      const T s = keep / tn;
      ox = tx * s;
      oy = ty * s;
    }
  }
  ux = vrx + ox;
  uy = vry + oy;
}

/// C1 ramp below max(x, 0): 0 for x <= 0, x for x >= eps, eps (2s^2 - s^3) with
/// s = x / eps in between. Staying below the hard ramp keeps projections dissipative.
template <class T>
T soft_ramp(const T& x, double eps) {
  if (scalar_of(x) <= 0.0) return T(0.0);
  if (scalar_of(x) >= eps) return x;
  const T u = x / T(eps);
  return T(eps) * u * u * (T(2.0) - u);
}

/// Coulomb projection against the moving blade with the approach and
/// stick/slip switches blended over a velocity scale eps, so the response is
/// C1 in the knife pose. Agrees with coulomb_project once |vn| and the slip
/// margin exceed eps, and never adds kinetic energy relative to the blade.
template <class T>
void coulomb_project_smooth(T& ux, T& uy, const T& vrx, const T& vry, const T& nx, const T& ny,
                            double friction, double eps) {
  using std::sqrt;
  const T rx = ux - vrx;
  const T ry = uy - vry;
  const T vn = rx * nx + ry * ny;
  const T c = -soft_ramp(T(-vn), eps);
  if (!(scalar_of(c) < 0.0)) return;
  const T tx = rx - vn * nx;
  const T ty = ry - vn * ny;
  const T tn2 = tx * tx + ty * ty;
  T ox = T(0.0), oy = T(0.0);
  if (scalar_of(tn2) > 0.0) {
    const T tn = sqrt(tn2);
    const T keep = soft_ramp(T(tn + T(friction) * c), eps);
    const T s = keep / tn;
    ox = tx * s;
    oy = ty * s;
  }
  const T vk = vn - c;
  ux = vrx + vk * nx + ox;
  uy = vry + vk * ny + oy;
}

/// Knife blend factor over the signed blade distance phi: smoothstep from 0 at
/// the centreline (phi = -half_thickness) to 1 at the blade surface, then back
/// to 0 at phi = band. Vanishing at the centreline keeps the projection
/// continuous where the capsule normal flips sides.
template <class T>
T knife_alpha(const T& phi, double half_thickness, double band) {
  if (scalar_of(phi) <= -half_thickness) return T(0.0);
  if (scalar_of(phi) >= band) return T(0.0);
  if (scalar_of(phi) <= 0.0) {
    const T t = (phi + T(half_thickness)) / T(half_thickness);
    return t * t * (T(3.0) - T(2.0) * t);
  }
  const T t = phi / T(band);
  return T(1.0) - t * t * (T(3.0) - T(2.0) * t);
}

struct NodeParams {
  double dt = 0.0;
  double gravity = 0.0;
  double friction = 0.0;
  double knife_band = 0.0;
  /// Velocity scale of the smoothed knife contact switches.
  double knife_velocity_eps = 0.0;
  double blade_length = 0.0;
  double half_thickness = 0.0;
  int n = 0;
  int wall = 3;
};

/// Capsule distance of node position xi to the blade at pose q, and its unit gradient.
template <class T>
T knife_phi(const Vec2& xi, const T* q, const NodeParams& np, T& nx, T& ny) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T dxv = cos(q[2]), dyv = sin(q[2]);
  const T rx = T(xi.x()) - q[0];
  const T ry = T(xi.y()) - q[1];
  T t = rx * dxv + ry * dyv;
  if (scalar_of(t) < 0.0) t = T(0.0);
  if (scalar_of(t) > np.blade_length) t = T(np.blade_length);
  const T ex = rx - t * dxv;
  const T ey = ry - t * dyv;
  const T d2 = ex * ex + ey * ey;
  if (!(scalar_of(d2) > 0.0)) {
    nx = -dyv;
    ny = dxv;
    return T(-np.half_thickness);
  }
  const T d = sqrt(d2);
  nx = ex / d;
  ny = ey / d;
  return d - T(np.half_thickness);
}

/// Grid node update: momentum to velocity, gravity, board/core projection, soft
/// knife projection, domain walls. (dkx, dky) is the velocity change applied by
/// the knife projection alone.
template <class T>
void node_update(int i, int j, const Vec2& xi, const NodeStatic& st, const NodeParams& np,
                 bool knife_candidate, const T& mvx, const T& mvy, const T& m, const T* q,
                 const T* qd, T& vx, T& vy, T& dkx, T& dky) {
  T ux = mvx / m;
  T uy = mvy / m - T(np.dt * np.gravity);
  const T zero(0.0);
  if (st.board) coulomb_project(ux, uy, zero, zero, zero, T(1.0), np.friction);
  if (st.core_phi <= 0.0)
    coulomb_project(ux, uy, zero, zero, T(st.core_normal.x()), T(st.core_normal.y()), np.friction);
  dkx = T(0.0);
  dky = T(0.0);
  if (knife_candidate) {
    T nx, ny;
    const T phi = knife_phi(xi, q, np, nx, ny);
    if (scalar_of(phi) < np.knife_band) {
      const T alpha = knife_alpha(phi, np.half_thickness, np.knife_band);
      const T vrx = qd[0] - qd[2] * (T(xi.y()) - q[1]);
      const T vry = qd[1] + qd[2] * (T(xi.x()) - q[0]);
      T px = ux, py = uy;
      coulomb_project_smooth(px, py, vrx, vry, nx, ny, np.friction, np.knife_velocity_eps);
      dkx = alpha * (px - ux);
      dky = alpha * (py - uy);
      ux = ux + dkx;
      uy = uy + dky;
    }
  }
  if (i < np.wall && scalar_of(ux) < 0.0) ux = T(0.0);
  if (i > np.n - np.wall && scalar_of(ux) > 0.0) ux = T(0.0);
  if (j < np.wall && scalar_of(uy) < 0.0) uy = T(0.0);
  if (j > np.n - np.wall && scalar_of(uy) > 0.0) uy = T(0.0);
  vx = ux;
  vy = uy;
}

}  // namespace ninjacut::detail
