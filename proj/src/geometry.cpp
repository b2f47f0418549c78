#include "maxhdg/geometry.hpp"

#include <algorithm>
#include <limits>

#include "maxhdg/errors.hpp"

namespace maxhdg {

double polygon_signed_area(const std::vector<Vec2>& pts) {
  double twice = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = pts[i];
    const Vec2& q = pts[(i + 1) % n];
    twice += cross(p, q);
  }
  return 0.5 * twice;
}

namespace {

struct Circle {
  Vec2 c;
  double r = -1.0;  // negative marks "invalid"
};

Circle circle_from_diameter(Vec2 a, Vec2 b) {
  Circle circ;
  circ.c = 0.5 * (a + b);
  circ.r = 0.5 * norm(a - b);
  return circ;
}

Circle circumcircle(Vec2 a, Vec2 b, Vec2 c) {
  const double d = 2.0 * cross(b - a, c - a);
  if (std::abs(d) < 1e-300) return {};
  const double a2 = dot(a, a), b2 = dot(b, b), c2 = dot(c, c);
  Circle circ;
  circ.c.x = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
  circ.c.y = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
  circ.r = norm(a - circ.c);
  return circ;
}

bool contains_all(const Circle& circ, const std::vector<Vec2>& pts) {
  if (circ.r < 0.0) return false;
  const double tol = 1e-12 * (1.0 + circ.r);
  for (const Vec2& p : pts) {
    if (norm(p - circ.c) > circ.r + tol) return false;
  }
  return true;
}

}  // namespace

double enclosing_circle_diameter(const std::vector<Vec2>& pts) {
  // Brute force over pair and triple candidates; the elements here have at
  // most 4 vertices, so this is exact and cheap.
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Circle c = circle_from_diameter(pts[i], pts[j]);
      if (contains_all(c, pts)) best = std::min(best, c.r);
      for (std::size_t k = j + 1; k < n; ++k) {
        const Circle cc = circumcircle(pts[i], pts[j], pts[k]);
        if (contains_all(cc, pts)) best = std::min(best, cc.r);
      }
    }
  }
  return 2.0 * best;
}

ElementGeometry make_element(CellShape shape, const std::vector<Vec2>& ccw_vertices) {
  const std::size_t expect = shape == CellShape::triangle ? 3 : 4;
  if (ccw_vertices.size() != expect) {
    throw ConfigError("element vertex count does not match shape");
  }
  const double area = polygon_signed_area(ccw_vertices);
  if (area <= 0.0) {
    throw ConfigError("element vertex cycle must be counterclockwise");
  }

  ElementGeometry elem;
  elem.shape = shape;
  elem.vertex = ccw_vertices;
  elem.area = area;
  elem.diameter = enclosing_circle_diameter(ccw_vertices);
  Vec2 c{0.0, 0.0};
  for (const Vec2& v : ccw_vertices) c = c + v;
  elem.centroid = (1.0 / static_cast<double>(ccw_vertices.size())) * c;

  const std::size_t n = ccw_vertices.size();
  elem.edge.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    EdgeGeometry& e = elem.edge[i];
    e.a = ccw_vertices[i];
    e.b = ccw_vertices[(i + 1) % n];
    e.length = norm(e.b - e.a);
    e.tangent = (1.0 / e.length) * (e.b - e.a);
    // Rotating the ccw direction by -90 degrees points out of the element.
    e.normal = {e.tangent.y, -e.tangent.x};
    e.orientation = 1;
  }
  return elem;
}

}  // namespace maxhdg
