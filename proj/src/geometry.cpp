#include "ninjacut/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ninjacut {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
// Chord tolerance used when polygonizing; half the 0.5 mm contract.
constexpr double kChordTol = 0.25e-3;
constexpr double kFrontMin = 0.002;
constexpr double kFrontMax = kFrontBase + kOffsetRange + 0.01;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

std::vector<double> natural_spline_moments(std::span<const double> ys, std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  // Tridiagonal system for interior second derivatives (Thomas algorithm).
  const std::size_t k = n - 2;
  std::vector<double> a(k), b(k), c(k), d(k);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = ys[i] - ys[i - 1];
    const double h1 = ys[i + 1] - ys[i];
    a[i - 1] = h0;
    b[i - 1] = 2.0 * (h0 + h1);
    c[i - 1] = h1;
    d[i - 1] = 6.0 * ((xs[i + 1] - xs[i]) / h1 - (xs[i] - xs[i - 1]) / h0);
  }
  for (std::size_t i = 1; i < k; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  std::vector<double> sol(k);
  sol[k - 1] = d[k - 1] / b[k - 1];
  for (std::size_t i = k - 1; i-- > 0;) sol[i] = (d[i] - c[i] * sol[i + 1]) / b[i];
  for (std::size_t i = 0; i < k; ++i) m[i + 1] = sol[i];
  return m;
}

void append_front(std::span<const double> offsets, double y0, double y1, int depth,
                  std::vector<Vec2>& out) {
  const Vec2 a(front_profile(offsets, y0), y0);
  const Vec2 b(front_profile(offsets, y1), y1);
  double dev = 0.0;
  for (double t : {0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875}) {
    const double y = y0 + t * (y1 - y0);
    const Vec2 p(front_profile(offsets, y), y);
    dev = std::max(dev, segment_distance(a, b, p).value);
  }
  if (dev > kChordTol && depth < 24) {
    const double ym = 0.5 * (y0 + y1);
    append_front(offsets, y0, ym, depth + 1, out);
    append_front(offsets, ym, y1, depth + 1, out);
    return;
  }
  out.push_back(b);
}

int arc_segments(double radius, double sweep) {
  const double step = 2.0 * std::acos(1.0 - kChordTol / radius);
  return std::max(2, static_cast<int>(std::ceil(sweep / step)));
}

std::vector<double> clamp_params(CoreFamily family, std::span<const double> params) {
  const double h = kCoreHeight;
  auto need = [&](std::size_t n) {
    if (params.size() != n)
      throw std::invalid_argument(std::string("core family ") + std::string(to_string(family)) +
                                  " expects " + std::to_string(n) + " parameters");
  };
  std::vector<double> p(params.begin(), params.end());
  switch (family) {
    case CoreFamily::Spline2:
    case CoreFamily::Spline3:
    case CoreFamily::Spline4:
      need(static_cast<std::size_t>(spline_nodes(family)));
      for (double& v : p) v = std::clamp(v, -kOffsetRange, kOffsetRange);
      break;
    case CoreFamily::Triangle:
      need(2);
      p[0] = std::clamp(p[0], 0.01, 0.08);
      p[1] = std::clamp(p[1], 0.2 * h, 0.8 * h);
      break;
    case CoreFamily::Rectangle:
      need(2);
      p[0] = std::clamp(p[0], 0.01, 0.08);
      p[1] = std::clamp(p[1], 0.6 * h, h);
      break;
    case CoreFamily::Ellipse:
      need(2);
      p[0] = std::clamp(p[0], 0.035, 0.06);
      p[1] = std::clamp(p[1], 0.025, 0.5 * h);
      break;
  }
  return p;
}

}  // namespace

std::uint64_t CounterRng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::stream_key(std::uint64_t a, std::uint64_t b) {
  return mix(a ^ mix(b + kGolden));
}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return mix(key_ + counter_ * kGolden);
}

double CounterRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::string_view to_string(CoreFamily f) {
  switch (f) {
    case CoreFamily::Spline3: return "spline3";
    case CoreFamily::Spline2: return "spline2";
    case CoreFamily::Spline4: return "spline4";
    case CoreFamily::Triangle: return "triangle";
    case CoreFamily::Rectangle: return "rectangle";
    case CoreFamily::Ellipse: return "ellipse";
  }
  return "unknown";
}

CoreFamily core_family_from_string(std::string_view s) {
  for (CoreFamily f : {CoreFamily::Spline3, CoreFamily::Spline2, CoreFamily::Spline4,
                       CoreFamily::Triangle, CoreFamily::Rectangle, CoreFamily::Ellipse}) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown core family: " + std::string(s));
}

bool is_spline(CoreFamily f) {
  return f == CoreFamily::Spline2 || f == CoreFamily::Spline3 || f == CoreFamily::Spline4;
}

int spline_nodes(CoreFamily f) {
  switch (f) {
    case CoreFamily::Spline2: return 2;
    case CoreFamily::Spline3: return 3;
    case CoreFamily::Spline4: return 4;
    default: return 0;
  }
}

double CoreShape::min_x() const {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& p : contour) v = std::min(v, p.x());
  return v;
}
double CoreShape::max_x() const {
  double v = -std::numeric_limits<double>::infinity();
  for (const auto& p : contour) v = std::max(v, p.x());
  return v;
}
double CoreShape::min_y() const {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& p : contour) v = std::min(v, p.y());
  return v;
}
double CoreShape::max_y() const {
  double v = -std::numeric_limits<double>::infinity();
  for (const auto& p : contour) v = std::max(v, p.y());
  return v;
}

Vec2 KnifePose::direction() const { return Vec2(std::cos(theta), std::sin(theta)); }

KnifePose KnifePose::normalized() const { return KnifePose{tip, wrap_angle(theta)}; }

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

void KnifeGeometry::validate() const {
  if (!(blade_length > 0.0 && half_thickness > 0.0 && spine_offset > 0.0))
    throw std::invalid_argument("knife dimensions must be positive");
  if (!(half_thickness < blade_length))
    throw std::invalid_argument("knife half_thickness must be below blade_length");
  if (spine_offset > blade_length)
    throw std::invalid_argument("knife spine_offset exceeds blade_length");
}

bool GridSpec::contains(const Vec2& p) const {
  return p.x() >= origin.x() && p.y() >= origin.y() && p.x() <= origin.x() + nx * cell_size &&
         p.y() <= origin.y() + ny * cell_size;
}

double SdfGrid::sample(const Vec2& p) const {
  const double h = spec.cell_size;
  const double u = (p.x() - spec.origin.x()) / h - 0.5;
  const double v = (p.y() - spec.origin.y()) / h - 0.5;
  const int i0 = std::clamp(static_cast<int>(std::floor(u)), 0, spec.nx - 2);
  const int j0 = std::clamp(static_cast<int>(std::floor(v)), 0, spec.ny - 2);
  const double s = std::clamp(u - i0, 0.0, 1.0);
  const double t = std::clamp(v - j0, 0.0, 1.0);
  const double a = at(i0, j0), b = at(i0 + 1, j0), c = at(i0, j0 + 1), d = at(i0 + 1, j0 + 1);
  return (1 - t) * ((1 - s) * a + s * b) + t * ((1 - s) * c + s * d);
}

Vec2 SdfGrid::gradient(const Vec2& p) const {
  const double h = spec.cell_size;
  const double u = (p.x() - spec.origin.x()) / h - 0.5;
  const double v = (p.y() - spec.origin.y()) / h - 0.5;
  const int i0 = std::clamp(static_cast<int>(std::floor(u)), 0, spec.nx - 2);
  const int j0 = std::clamp(static_cast<int>(std::floor(v)), 0, spec.ny - 2);
  const double s = std::clamp(u - i0, 0.0, 1.0);
  const double t = std::clamp(v - j0, 0.0, 1.0);
  const double a = at(i0, j0), b = at(i0 + 1, j0), c = at(i0, j0 + 1), d = at(i0 + 1, j0 + 1);
  const double gx = ((1 - t) * (b - a) + t * (d - c)) / h;
  const double gy = ((1 - s) * (c - a) + s * (d - b)) / h;
  return Vec2(gx, gy);
}

Vec2 default_anchor() { return Vec2(0.055, 0.02); }

double front_profile(std::span<const double> offsets, double y_local) {
  const std::size_t n = offsets.size();
  std::array<double, 8> ys{}, xs{};
  for (std::size_t k = 0; k < n; ++k) {
    ys[k] = kCoreHeight * static_cast<double>(k) / static_cast<double>(n - 1);
    xs[k] = kFrontBase + offsets[k];
  }
  const auto m = natural_spline_moments(std::span(ys.data(), n), std::span(xs.data(), n));
  const double y = std::clamp(y_local, 0.0, kCoreHeight);
  std::size_t seg = 0;
  while (seg + 2 < n && y > ys[seg + 1]) ++seg;
  const double h = ys[seg + 1] - ys[seg];
  const double a = (ys[seg + 1] - y) / h;
  const double b = (y - ys[seg]) / h;
  const double x = a * xs[seg] + b * xs[seg + 1] +
                   ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0;
  return std::clamp(x, kFrontMin, kFrontMax);
}

CoreShape make_core(CoreFamily family, std::span<const double> params, const Vec2& anchor,
                    std::uint64_t seed) {
  CoreShape shape;
  shape.family = family;
  shape.seed = seed;
  shape.anchor = anchor;
  shape.params = clamp_params(family, params);
  const double h = kCoreHeight;
  const double r = 0.5 * h;
  std::vector<Vec2> local;

  switch (family) {
    case CoreFamily::Spline2:
    case CoreFamily::Spline3:
    case CoreFamily::Spline4: {
      const std::span<const double> off(shape.params);
      local.emplace_back(0.0, 0.0);
      local.emplace_back(front_profile(off, 0.0), 0.0);
      append_front(off, 0.0, h, 0, local);
      local.emplace_back(0.0, h);
      const int segs = arc_segments(r, kPi);
      for (int k = 1; k < segs; ++k) {
        const double a = 0.5 * kPi + kPi * k / segs;
        local.emplace_back(r * std::cos(a), r + r * std::sin(a));
      }
      break;
    }
    case CoreFamily::Triangle:
      local = {Vec2(-r, 0.0), Vec2(shape.params[0], shape.params[1]), Vec2(-r, h)};
      break;
    case CoreFamily::Rectangle: {
      const double w = shape.params[0], hh = shape.params[1];
      local = {Vec2(-r, 0.0), Vec2(w, 0.0), Vec2(w, hh), Vec2(-r, hh)};
      break;
    }
    case CoreFamily::Ellipse: {
      const double a = shape.params[0], b = shape.params[1];
      const Vec2 c(-r + a, r);
      const int segs = arc_segments(std::max(a, b), 2.0 * kPi);
      for (int k = 0; k < segs; ++k) {
        const double t = -0.5 * kPi + 2.0 * kPi * k / segs;
        local.push_back(c + Vec2(a * std::cos(t), b * std::sin(t)));
      }
      break;
    }
  }
  shape.contour.reserve(local.size());
  for (const auto& p : local) shape.contour.push_back(p + anchor);
  return shape;
}

CoreShape gen_core(CoreFamily family, std::uint64_t seed) {
  CounterRng rng(CounterRng::stream_key(static_cast<std::uint64_t>(family) + 1, seed));
  const double h = kCoreHeight;
  std::vector<double> params;
  switch (family) {
    case CoreFamily::Spline2:
    case CoreFamily::Spline3:
    case CoreFamily::Spline4:
      for (int k = 0; k < spline_nodes(family); ++k)
        params.push_back(rng.uniform(-kOffsetRange, kOffsetRange));
      break;
    case CoreFamily::Triangle:
      params = {rng.uniform(0.01, 0.08), rng.uniform(0.2 * h, 0.8 * h)};
      break;
    case CoreFamily::Rectangle:
      params = {rng.uniform(0.01, 0.08), rng.uniform(0.6 * h, h)};
      break;
    case CoreFamily::Ellipse:
      params = {rng.uniform(0.035, 0.06), rng.uniform(0.025, 0.5 * h)};
      break;
  }
  return make_core(family, params, default_anchor(), seed);
}

SignedDistance segment_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  SignedDistance out;
  out.closest = a + t * ab;
  const Vec2 d = p - out.closest;
  out.value = d.norm();
  if (out.value > 0.0) {
    out.gradient = d / out.value;
  } else if (len2 > 0.0) {
    out.gradient = Vec2(ab.y(), -ab.x()) / std::sqrt(len2);
  } else {
    out.gradient = Vec2(1.0, 0.0);
  }
  return out;
}

bool point_in_polygon(std::span<const Vec2> poly, const Vec2& p) {
  int winding = 0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && cross2(b - a, p - a) > 0.0) ++winding;
    } else if (b.y() <= p.y() && cross2(b - a, p - a) < 0.0) {
      --winding;
    }
  }
  return winding != 0;
}

SignedDistance polygon_sdf(std::span<const Vec2> poly, const Vec2& p) {
  SignedDistance best;
  best.value = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto d = segment_distance(poly[i], poly[(i + 1) % n], p);
    if (d.value < best.value) best = d;
  }
  if (best.value > 0.0 && point_in_polygon(poly, p)) {
    best.value = -best.value;
    best.gradient = -best.gradient;
  }
  return best;
}

double polygon_area(std::span<const Vec2> poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) a += cross2(poly[i], poly[(i + 1) % n]);
  return 0.5 * a;
}

bool polygon_is_simple(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) { return cross2(b - a, c - a); };
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    if ((b - a).squaredNorm() == 0.0) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      const Vec2& c = poly[j];
      const Vec2& d = poly[(j + 1) % n];
      const double o1 = orient(a, b, c), o2 = orient(a, b, d);
      const double o3 = orient(c, d, a), o4 = orient(c, d, b);
      if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 &&
          o4 != 0)
        return false;
      if (segment_distance(a, b, c).value == 0.0 || segment_distance(a, b, d).value == 0.0)
        return false;
    }
  }
  return true;
}

SignedDistance core_sdf_full(const CoreShape& shape, const Vec2& p) {
  return polygon_sdf(shape.contour, p);
}

double core_sdf(const CoreShape& shape, const Vec2& p) { return polygon_sdf(shape.contour, p).value; }

double knife_sdf(const KnifePose& pose, const KnifeGeometry& geom, const Vec2& p) {
  const Vec2 end = pose.tip + geom.blade_length * pose.direction();
  return segment_distance(pose.tip, end, p).value - geom.half_thickness;
}

std::vector<Vec2> edge_samples(const KnifePose& pose, const KnifeGeometry& geom, int n) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 1)));
  const Vec2 d = pose.direction();
  if (n <= 1) {
    out.push_back(pose.tip);
    return out;
  }
  for (int i = 0; i < n; ++i) {
    const double s = geom.spine_offset * static_cast<double>(i) / static_cast<double>(n - 1);
    out.push_back(pose.tip + s * d);
  }
  return out;
}

namespace {
void check_spec(const GridSpec& spec) {
  if (spec.nx <= 0 || spec.ny <= 0 || !(spec.cell_size > 0.0))
    throw std::invalid_argument("degenerate grid spec");
  if (spec.nx < 16 || spec.ny < 16)
    throw std::invalid_argument("grid resolution must be at least 16x16");
}
}  // namespace

SdfGrid rasterize(const CoreShape& shape, const GridSpec& spec) {
  check_spec(spec);
  SdfGrid g{spec, std::vector<double>(spec.size())};
  for (int j = 0; j < spec.ny; ++j)
    for (int i = 0; i < spec.nx; ++i) g.values[spec.index(i, j)] = core_sdf(shape, spec.cell_center(i, j));
  return g;
}

SdfGrid rasterize(const KnifePose& pose, const KnifeGeometry& geom, const GridSpec& spec) {
  check_spec(spec);
  SdfGrid g{spec, std::vector<double>(spec.size())};
  for (int j = 0; j < spec.ny; ++j)
    for (int i = 0; i < spec.nx; ++i)
      g.values[spec.index(i, j)] = knife_sdf(pose, geom, spec.cell_center(i, j));
  return g;
}

}  // namespace ninjacut
