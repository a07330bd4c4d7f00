#pragma once

#include <vector>

#include "ninjacut/geometry.hpp"

namespace ninjacut::testing {

/// Sutherland-Hodgman clip of an arbitrary polygon by an axis-aligned box.
inline std::vector<Vec2> clip_to_box(std::vector<Vec2> poly, double x0, double y0, double x1, double y1) {
  auto clip = [&](auto inside, auto cross) {
    std::vector<Vec2> out;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Vec2& a = poly[k];
      const Vec2& b = poly[(k + 1) % poly.size()];
      const bool ia = inside(a), ib = inside(b);
      if (ia && ib) {
        out.push_back(b);
      } else if (ia && !ib) {
        out.push_back(cross(a, b));
      } else if (!ia && ib) {
        out.push_back(cross(a, b));
        out.push_back(b);
      }
    }
    poly = out;
  };
  auto at_x = [](double x) {
    return [x](const Vec2& a, const Vec2& b) { return Vec2(x, a.y() + (x - a.x()) * (b.y() - a.y()) / (b.x() - a.x())); };
  };
  auto at_y = [](double y) {
    return [y](const Vec2& a, const Vec2& b) { return Vec2(a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y()), y); };
  };
  clip([&](const Vec2& p) { return p.x() >= x0; }, at_x(x0));
  clip([&](const Vec2& p) { return p.x() <= x1; }, at_x(x1));
  clip([&](const Vec2& p) { return p.y() >= y0; }, at_y(y0));
  clip([&](const Vec2& p) { return p.y() <= y1; }, at_y(y1));
  return poly;
}

/// Shoelace area; sign follows orientation.
inline double shoelace(const std::vector<Vec2>& p) {
  double a = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Vec2& u = p[k];
    const Vec2& v = p[(k + 1) % p.size()];
    a += u.x() * v.y() - v.x() * u.y();
  }
  return 0.5 * a;
}

}  // namespace ninjacut::testing
