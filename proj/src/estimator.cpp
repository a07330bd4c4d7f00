#include "ninjacut/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace ninjacut {

GridSpec workspace_window(double domain_size, int cells) {
  if (cells < 16 || !(domain_size > 0.0))
    throw std::invalid_argument("workspace_window: need at least 16 cells and a positive size");
  return GridSpec{cells, cells, Vec2::Zero(), domain_size / cells};
}

namespace {

bool cell_of(const GridSpec& g, const Vec2& p, int& i, int& j) {
  const Vec2 q = (p - g.origin) / g.cell_size;
  i = static_cast<int>(std::floor(q.x()));
  j = static_cast<int>(std::floor(q.y()));
  return i >= 0 && j >= 0 && i < g.nx && j < g.ny;
}

}  // namespace

bool CollisionEvidence::is_free(const Vec2& p) const {
  int i, j;
  return cell_of(window, p, i, j) && free_space[window.index(i, j)] != 0;
}

std::size_t CollisionEvidence::free_count() const {
  return static_cast<std::size_t>(std::count(free_space.begin(), free_space.end(), 1));
}

void CollisionEvidence::validate() const {
  if (free_space.size() != window.size())
    throw std::invalid_argument("evidence: free_space does not match the window");
  if (collision_poses.size() != collision_points.size())
    throw std::invalid_argument("evidence: collision points and poses are not index-aligned");
  for (const auto& p : collision_points)
    if (is_free(p)) throw std::invalid_argument("evidence: collision point inside free space");
}

void carve_free_space(CollisionEvidence& ev, const KnifePose& pose, double clearance,
                      const KnifeGeometry& geom, int n_samples) {
  const GridSpec& g = ev.window;
  const double spacing = n_samples > 1 ? geom.spine_offset / (n_samples - 1) : 0.0;
  const double half_diag = 0.5 * std::sqrt(2.0) * g.cell_size;
  // Whole cell within r + half_diag of the edge segment, hence within the
  // clearance of its nearest sample; 1e-9 keeps the certificate strict.
  const double r = std::min(geom.half_thickness + 0.5 * g.cell_size, clearance - 0.5 * spacing) -
                   half_diag - 1e-9;
  if (!(r > 0.0)) return;
  const Vec2 a = pose.tip;
  const Vec2 b = pose.tip + geom.spine_offset * pose.direction();
  const Vec2 lo = a.cwiseMin(b) - Vec2::Constant(r), hi = a.cwiseMax(b) + Vec2::Constant(r);
  const int i0 = std::max(0, static_cast<int>(std::floor((lo.x() - g.origin.x()) / g.cell_size)));
  const int j0 = std::max(0, static_cast<int>(std::floor((lo.y() - g.origin.y()) / g.cell_size)));
  const int i1 = std::min(g.nx - 1, static_cast<int>(std::floor((hi.x() - g.origin.x()) / g.cell_size)));
  const int j1 = std::min(g.ny - 1, static_cast<int>(std::floor((hi.y() - g.origin.y()) / g.cell_size)));
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i)
      if (segment_distance(a, b, g.cell_center(i, j)).value <= r) ev.free_space[g.index(i, j)] = 1;
}

CollisionEvidence build_evidence(std::span<const EvidenceRecord> records, const KnifeGeometry& geom,
                                 int n_samples, const GridSpec& window) {
  CollisionEvidence ev(window);
  bool prev_clear = true;
  for (const auto& r : records) {
    if (r.min_sdf < 0.0) {
      if (prev_clear) {
        ev.collision_points.push_back(r.deepest);
        ev.collision_poses.push_back(r.pose);
      }
      prev_clear = false;
    } else {
      carve_free_space(ev, r.pose, r.min_sdf, geom, n_samples);
      prev_clear = true;
    }
  }
  return ev;
}

CollisionEvidence synthetic_evidence(const CoreShape& core, int k, CounterRng& rng,
                                     const GridSpec& window) {
  CollisionEvidence ev(window);
  const auto& c = core.contour;
  std::vector<double> cum(c.size() + 1, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) cum[i + 1] = cum[i] + (c[(i + 1) % c.size()] - c[i]).norm();
  for (int n = 0; n < k; ++n) {
    const double s = rng.uniform() * cum.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    const std::size_t e = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()) - 1, c.size() - 1);
    const double len = cum[e + 1] - cum[e];
    const double t = len > 0.0 ? (s - cum[e]) / len : 0.0;
    const Vec2 p = c[e] + t * (c[(e + 1) % c.size()] - c[e]);
    ev.collision_points.push_back(p);
    ev.collision_poses.push_back(KnifePose{p, kPi / 2.0});
  }
  return ev;
}

void EstimatorConfig::validate() const {
  if (!is_spline(prior) || spline_nodes(prior) > 3)
    throw std::invalid_argument("estimator: prior must be Spline2 or Spline3");
  if (grid_per_axis < 2) throw std::invalid_argument("estimator: grid_per_axis must be >= 2");
  if (!(sigma_c > 0.0 && eps_c > 0.0 && r_resid > 0.0))
    throw std::invalid_argument("estimator: sigma_c, eps_c and r_resid must be positive");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw std::invalid_argument("estimator: threshold must lie in (0, 1]");
}

std::size_t CoreEstimate::mask_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

/// Candidate cores as per-row occupancy intervals plus polygons for point distances.
struct Estimator::Bank {
  GridSpec window;
  int row0 = 0, rows = 0;
  /// First occupied column per row (shared back arc).
  std::vector<int> left;
  /// Last occupied column per candidate and row (candidate-major); < left means empty.
  std::vector<int> right;
  std::vector<std::vector<Vec2>> polygons;
  std::size_t count = 0;
};

namespace {

std::shared_ptr<const Estimator::Bank> build_bank(const EstimatorConfig& cfg, const Vec2& anchor,
                                                  const GridSpec& g) {
  auto bank = std::make_shared<Estimator::Bank>();
  bank->window = g;
  const double h = kCoreHeight, r = 0.5 * h;
  const int row0 = std::max(0, static_cast<int>(std::floor((anchor.y() - g.origin.y()) / g.cell_size - 0.5)));
  const int row1 = std::min(g.ny - 1, static_cast<int>(std::ceil((anchor.y() + h - g.origin.y()) / g.cell_size - 0.5)));
  bank->row0 = row0;
  bank->rows = row1 - row0 + 1;
  bank->left.assign(bank->rows, g.nx);
  std::vector<double> yl(bank->rows);
  std::vector<char> in_band(bank->rows, 0);
  for (int k = 0; k < bank->rows; ++k) {
    const double y = g.cell_center(0, row0 + k).y() - anchor.y();
    yl[k] = y;
    if (y < 0.0 || y > h) continue;
    in_band[k] = 1;
    const double lx = anchor.x() - std::sqrt(std::max(0.0, r * r - (y - r) * (y - r)));
    bank->left[k] = std::max(0, static_cast<int>(std::ceil((lx - g.origin.x()) / g.cell_size - 0.5)));
  }
  const int n = spline_nodes(cfg.prior);
  const int m = cfg.grid_per_axis;
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= static_cast<std::size_t>(m);
  bank->count = total;
  bank->right.assign(total * bank->rows, -1);
  bank->polygons.resize(total);
  std::vector<double> off(n);
  for (std::size_t c = 0; c < total; ++c) {
    std::size_t rem = c;
    for (int d = 0; d < n; ++d) {
      off[d] = -kOffsetRange + 2.0 * kOffsetRange * static_cast<double>(rem % m) / (m - 1);
      rem /= m;
    }
    bank->polygons[c] = make_core(cfg.prior, off, anchor).contour;
    for (int k = 0; k < bank->rows; ++k) {
      if (!in_band[k]) continue;
      const double fx = anchor.x() + front_profile(off, yl[k]);
      bank->right[c * bank->rows + k] =
          std::min(g.nx - 1, static_cast<int>(std::floor((fx - g.origin.x()) / g.cell_size - 0.5)));
    }
  }
  return bank;
}

std::shared_ptr<const Estimator::Bank> cached_bank(const EstimatorConfig& cfg, const Vec2& anchor,
                                                   const GridSpec& g) {
  using Key = std::tuple<int, int, double, double, int, int, double, double, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const Estimator::Bank>> cache;
  const Key key{static_cast<int>(cfg.prior), cfg.grid_per_axis, anchor.x(), anchor.y(),
                g.nx, g.ny, g.origin.x(), g.origin.y(), g.cell_size};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto bank = build_bank(cfg, anchor, g);
  cache.emplace(key, bank);
  return bank;
}

/// Shortest 4-connected path through non-free cells from `start` to any target cell.
std::vector<std::size_t> bridge_path(const GridSpec& g, std::size_t start,
                                     const std::vector<std::uint8_t>& free,
                                     const std::vector<std::uint8_t>& target) {
  std::vector<std::int64_t> parent(g.size(), -2);
  std::deque<std::size_t> queue{start};
  parent[start] = -1;
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    if (target[cur]) {
      std::vector<std::size_t> path;
      for (std::int64_t p = static_cast<std::int64_t>(cur); p >= 0; p = parent[static_cast<std::size_t>(p)])
        path.push_back(static_cast<std::size_t>(p));
      return path;
    }
    const int i = static_cast<int>(cur % g.nx), j = static_cast<int>(cur / g.nx);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const int a = i + di[d], b = j + dj[d];
      if (a < 0 || b < 0 || a >= g.nx || b >= g.ny) continue;
      const std::size_t nb = g.index(a, b);
      if (parent[nb] != -2 || free[nb]) continue;
      parent[nb] = static_cast<std::int64_t>(cur);
      queue.push_back(nb);
    }
  }
  return {};
}

}  // namespace

Estimator::Estimator(const EstimatorConfig& cfg, const Vec2& anchor, const GridSpec& window)
    : cfg_(cfg) {
  cfg_.validate();
  bank_ = cached_bank(cfg_, anchor, window);
}

std::size_t Estimator::candidate_count() const { return bank_->count; }

CoreEstimate Estimator::estimate(const CollisionEvidence& ev) const {
  return estimate(ev, cfg_.threshold);
}

CoreEstimate Estimator::estimate(const CollisionEvidence& ev, double threshold) const {
  ev.validate();
  const Bank& bk = *bank_;
  const GridSpec& g = bk.window;
  if (ev.window.nx != g.nx || ev.window.ny != g.ny || ev.window.cell_size != g.cell_size ||
      ev.window.origin != g.origin)
    throw std::invalid_argument("estimate: evidence window differs from the estimator window");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw std::invalid_argument("estimate: threshold must lie in (0, 1]");

  // Free-space rejection: first free column at or right of the back arc, per row.
  std::vector<int> first_free(bk.rows, g.nx);
  for (int k = 0; k < bk.rows; ++k)
    for (int i = bk.left[k]; i < g.nx; ++i)
      if (ev.free_space[g.index(i, bk.row0 + k)]) {
        first_free[k] = i;
        break;
      }
  std::vector<std::size_t> survivors;
  for (std::size_t c = 0; c < bk.count; ++c) {
    bool ok = true;
    for (int k = 0; k < bk.rows && ok; ++k) ok = first_free[k] > bk.right[c * bk.rows + k];
    if (ok) survivors.push_back(c);
  }
  CoreEstimate est;
  est.window = g;
  est.threshold_used = threshold;
  est.free_space_survivors = survivors.size();
  const bool carved_prior = survivors.empty();
  if (carved_prior) {
    survivors.resize(bk.count);
    for (std::size_t c = 0; c < bk.count; ++c) survivors[c] = c;
  }

  const std::size_t np = ev.collision_points.size();
  const double band = cfg_.band();
  std::vector<double> dist(np * survivors.size());
  std::vector<char> explainable(np, 0);
  for (std::size_t s = 0; s < survivors.size(); ++s)
    for (std::size_t i = 0; i < np; ++i) {
      const double d = std::abs(polygon_sdf(bk.polygons[survivors[s]], ev.collision_points[i]).value);
      dist[s * np + i] = d;
      if (d <= band) explainable[i] = 1;
    }
  for (std::size_t i = 0; i < np; ++i)
    if (!explainable[i]) est.residual_points.push_back(ev.collision_points[i]);

  // Admissible set: explains every explainable point. If empty, fall back to soft weights.
  std::vector<std::size_t> pool;
  for (std::size_t s = 0; s < survivors.size(); ++s) {
    bool ok = true;
    for (std::size_t i = 0; i < np && ok; ++i) ok = !explainable[i] || dist[s * np + i] <= band;
    if (ok) pool.push_back(s);
  }
  if (!carved_prior) est.admissible = pool.size();
  if (pool.empty()) {
    pool.resize(survivors.size());
    for (std::size_t s = 0; s < survivors.size(); ++s) pool[s] = s;
  }
  std::vector<double> logw(pool.size(), 0.0);
  for (std::size_t q = 0; q < pool.size(); ++q)
    for (std::size_t i = 0; i < np; ++i) {
      if (!explainable[i]) continue;
      const double e = dist[pool[q] * np + i] / cfg_.sigma_c;
      logw[q] -= 0.5 * e * e;
    }
  const double lmax = pool.empty() ? 0.0 : *std::max_element(logw.begin(), logw.end());
  double wsum = 0.0;
  std::vector<double> rowacc(static_cast<std::size_t>(g.nx) + 1);
  est.probability.assign(g.size(), 0.0);
  std::vector<double> w(pool.size());
  for (std::size_t q = 0; q < pool.size(); ++q) wsum += (w[q] = std::exp(logw[q] - lmax));
  for (int k = 0; k < bk.rows; ++k) {
    std::fill(rowacc.begin(), rowacc.end(), 0.0);
    const int l = bk.left[k];
    if (l >= g.nx) continue;
    for (std::size_t q = 0; q < pool.size(); ++q) {
      const int r = bk.right[survivors[pool[q]] * bk.rows + k];
      if (r < l) continue;
      rowacc[l] += w[q];
      rowacc[r + 1] -= w[q];
    }
    double run = 0.0;
    for (int i = 0; i < g.nx; ++i) {
      run += rowacc[i];
      est.probability[g.index(i, bk.row0 + k)] = std::clamp(run / wsum, 0.0, 1.0);
    }
  }
  for (std::size_t c = 0; c < g.size(); ++c)
    if (ev.free_space[c]) est.probability[c] = 0.0;

  // Residual inflation for points no candidate explains, bridged to the consensus plateau.
  if (!est.residual_points.empty()) {
    const double pmax = *std::max_element(est.probability.begin(), est.probability.end());
    std::vector<std::uint8_t> plateau(g.size(), 0);
    if (pmax > 0.0)
      for (std::size_t c = 0; c < g.size(); ++c) plateau[c] = est.probability[c] >= pmax - 1e-9;
    const double rr = cfg_.r_resid;
    for (const auto& p : est.residual_points) {
      const int ci = static_cast<int>(std::floor((p.x() - g.origin.x()) / g.cell_size));
      const int cj = static_cast<int>(std::floor((p.y() - g.origin.y()) / g.cell_size));
      const int rad = static_cast<int>(std::ceil(rr / g.cell_size)) + 1;
      for (int j = std::max(0, cj - rad); j <= std::min(g.ny - 1, cj + rad); ++j)
        for (int i = std::max(0, ci - rad); i <= std::min(g.nx - 1, ci + rad); ++i) {
          const std::size_t c = g.index(i, j);
          if (!ev.free_space[c] && (g.cell_center(i, j) - p).norm() <= rr) est.probability[c] = 1.0;
        }
      if (pmax > 0.0 && ci >= 0 && cj >= 0 && ci < g.nx && cj < g.ny)
        for (std::size_t c : bridge_path(g, g.index(ci, cj), ev.free_space, plateau))
          est.probability[c] = 1.0;
    }
  }

  est.mask = threshold_mask(g, est.probability, ev.free_space, threshold);
  if (est.mask_count() > 0) est.sdf = mask_sdf(g, est.mask);
  return est;
}

CoreEstimate estimate_core(const CollisionEvidence& ev, const EstimatorConfig& cfg) {
  return Estimator(cfg, default_anchor(), ev.window).estimate(ev);
}

std::vector<std::uint8_t> threshold_mask(const GridSpec& g, const std::vector<double>& prob,
                                         const std::vector<std::uint8_t>& free_space,
                                         double threshold) {
  std::vector<std::uint8_t> raw(g.size(), 0), mask(g.size(), 0);
  std::size_t best = g.size();
  for (std::size_t c = 0; c < g.size(); ++c) {
    raw[c] = prob[c] >= threshold && !free_space[c];
    if (raw[c] && (best == g.size() || prob[c] > prob[best])) best = c;
  }
  if (best == g.size()) return mask;
  std::deque<std::size_t> queue{best};
  mask[best] = 1;
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    const int i = static_cast<int>(cur % g.nx), j = static_cast<int>(cur / g.nx);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const int a = i + di[d], b = j + dj[d];
      if (a < 0 || b < 0 || a >= g.nx || b >= g.ny) continue;
      const std::size_t nb = g.index(a, b);
      if (raw[nb] && !mask[nb]) {
        mask[nb] = 1;
        queue.push_back(nb);
      }
    }
  }
  return mask;
}

namespace {

/// One-dimensional squared distance transform (lower envelope of parabolas).
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s;
    for (;;) {
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = inf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    d[q] = (q - v[j]) * (q - v[j]) + f[v[j]];
  }
}

/// Squared distance (in cells) from every cell centre to the nearest set cell centre.
std::vector<double> edt(const GridSpec& g, const std::vector<std::uint8_t>& set) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> f(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) f[c] = set[c] ? 0.0 : inf;
  const int nmax = std::max(g.nx, g.ny);
  std::vector<double> in(nmax), out(nmax);
  std::vector<int> v;
  std::vector<double> z;
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.ny; ++j) in[j] = f[g.index(i, j)];
    edt_1d(in.data(), out.data(), g.ny, v, z);
    for (int j = 0; j < g.ny; ++j) f[g.index(i, j)] = out[j];
  }
  for (int j = 0; j < g.ny; ++j) {
    edt_1d(&f[g.index(0, j)], out.data(), g.nx, v, z);
    std::copy(out.begin(), out.begin() + g.nx, f.begin() + static_cast<std::ptrdiff_t>(g.index(0, j)));
  }
  return f;
}

}  // namespace

SdfGrid mask_sdf(const GridSpec& g, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != g.size()) throw std::invalid_argument("mask_sdf: mask does not match the window");
  if (std::find(mask.begin(), mask.end(), 1) == mask.end())
    throw std::invalid_argument("mask_sdf: empty mask");
  std::vector<std::uint8_t> outside(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) outside[c] = !mask[c];
  const auto din = edt(g, mask), dout = edt(g, outside);
  const double far = (g.nx + g.ny) * g.cell_size;
  SdfGrid s{g, std::vector<double>(g.size())};
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (mask[c])
      s.values[c] = std::isfinite(dout[c]) ? -(std::sqrt(dout[c]) - 0.5) * g.cell_size : -far;
    else
      s.values[c] = (std::sqrt(din[c]) - 0.5) * g.cell_size;
  }
  return s;
}

SdfGrid estimate_to_sdf(const CoreEstimate& est) { return mask_sdf(est.window, est.mask); }

std::vector<std::uint8_t> core_mask(const CoreShape& core, const GridSpec& g) {
  std::vector<std::uint8_t> m(g.size(), 0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Vec2 c = g.cell_center(i, j);
      if (c.x() < core.min_x() || c.x() > core.max_x() || c.y() < core.min_y() || c.y() > core.max_y())
        continue;
      m[g.index(i, j)] = point_in_polygon(core.contour, c);
    }
  return m;
}

double mask_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("mask_iou: size mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    inter += a[c] && b[c];
    uni += a[c] || b[c];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

CoreEstimate oracle_estimate(const CoreShape& core, const GridSpec& window) {
  CoreEstimate est;
  est.window = window;
  est.mask = core_mask(core, window);
  est.probability.assign(est.mask.begin(), est.mask.end());
  est.threshold_used = 0.5;
  est.sdf = mask_sdf(window, est.mask);
  return est;
}

}  // namespace ninjacut
