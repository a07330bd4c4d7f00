#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ninjacut {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = 3.14159265358979323846;

/// Core height shared by every family (meters).
inline constexpr double kCoreHeight = 0.07;
/// Horizontal position of the unperturbed front line, relative to the anchor.
inline constexpr double kFrontBase = 0.045;
/// Support of the node-offset draws.
inline constexpr double kOffsetRange = 0.035;

/// Counter-based generator: every draw is a pure function of (key, counter),
/// so streams can be split by key and replayed from any position.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  static std::uint64_t mix(std::uint64_t z);
  static std::uint64_t stream_key(std::uint64_t a, std::uint64_t b);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  CounterRng split(std::uint64_t stream) const { return CounterRng(stream_key(key_, stream)); }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

enum class CoreFamily { Spline3, Spline2, Spline4, Triangle, Rectangle, Ellipse };

std::string_view to_string(CoreFamily f);
CoreFamily core_family_from_string(std::string_view s);
bool is_spline(CoreFamily f);
int spline_nodes(CoreFamily f);

struct CoreShape {
  CoreFamily family = CoreFamily::Spline3;
  std::uint64_t seed = 0;
  /// Family-specific parameters (meters): spline node offsets bottom-to-top,
  /// triangle apex (x, y), rectangle (width, height), ellipse (a, b).
  std::vector<double> params;
  /// Counter-clockwise polygon in workspace coordinates.
  std::vector<Vec2> contour;
  /// Attachment point: bottom of the back arc's vertical diameter.
  Vec2 anchor = Vec2::Zero();

  double min_x() const;
  double max_x() const;
  double min_y() const;
  double max_y() const;
};

struct KnifePose {
  Vec2 tip = Vec2::Zero();
  double theta = kPi / 2.0;

  Vec2 direction() const;
  KnifePose normalized() const;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

struct KnifeGeometry {
  double blade_length = 0.12;
  double half_thickness = 0.001;
  double spine_offset = 0.02;

  void validate() const;
};

/// Cell-centred grid layout. Cell (i, j) has centre origin + (i + 0.5, j + 0.5) * cell_size.
struct GridSpec {
  int nx = 0;
  int ny = 0;
  Vec2 origin = Vec2::Zero();
  double cell_size = 0.0;

  Vec2 cell_center(int i, int j) const {
    return origin + Vec2((i + 0.5) * cell_size, (j + 0.5) * cell_size);
  }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  bool contains(const Vec2& p) const;
};

struct SdfGrid {
  GridSpec spec;
  std::vector<double> values;

  double at(int i, int j) const { return values[spec.index(i, j)]; }
  /// Bilinear interpolation between cell centres; clamps outside the centre lattice.
  double sample(const Vec2& p) const;
  /// Gradient of the bilinear interpolant.
  Vec2 gradient(const Vec2& p) const;
};

CoreShape gen_core(CoreFamily family, std::uint64_t seed);
/// Builds a core from explicit parameters (clamped to the family's valid range).
CoreShape make_core(CoreFamily family, std::span<const double> params, const Vec2& anchor,
                    std::uint64_t seed = 0);
Vec2 default_anchor();

/// Natural cubic spline x(y) through the front nodes, in local core coordinates.
double front_profile(std::span<const double> offsets, double y_local);

struct SignedDistance {
  double value = 0.0;
  /// Unit gradient of the signed distance (outward normal at the boundary).
  Vec2 gradient = Vec2::Zero();
  Vec2 closest = Vec2::Zero();
};

SignedDistance polygon_sdf(std::span<const Vec2> polygon, const Vec2& p);
bool point_in_polygon(std::span<const Vec2> polygon, const Vec2& p);
double polygon_area(std::span<const Vec2> polygon);
bool polygon_is_simple(std::span<const Vec2> polygon);

double core_sdf(const CoreShape& shape, const Vec2& p);
SignedDistance core_sdf_full(const CoreShape& shape, const Vec2& p);

SignedDistance segment_distance(const Vec2& a, const Vec2& b, const Vec2& p);
double knife_sdf(const KnifePose& pose, const KnifeGeometry& geom, const Vec2& p);

/// N points along the cutting edge from the tip up to spine_offset, endpoints included.
std::vector<Vec2> edge_samples(const KnifePose& pose, const KnifeGeometry& geom, int n);

SdfGrid rasterize(const CoreShape& shape, const GridSpec& spec);
SdfGrid rasterize(const KnifePose& pose, const KnifeGeometry& geom, const GridSpec& spec);

}  // namespace ninjacut
