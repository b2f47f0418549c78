// Plane geometry primitives: 2-vectors, element shapes, and the standalone
// element geometry (vertices, oriented edges, outward normals, diameter) that
// the polynomial spaces and local solvers operate on.
#pragma once

#include <cmath>
#include <complex>
#include <vector>

namespace maxhdg {

using Complex = std::complex<double>;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

enum class CellShape { triangle, parallelogram, square };

// One edge of an element. `tangent` is the unit vector of the edge in its
// global orientation (from the lower-indexed mesh vertex for mesh edges, or
// along the ccw cycle for standalone elements); `orientation` is +1 when the
// element's ccw traversal follows that direction and -1 otherwise, so the ccw
// tangent used in the 2D cross-product conventions is orientation * tangent.
struct EdgeGeometry {
  Vec2 a;             // first endpoint in global orientation
  Vec2 b;             // second endpoint in global orientation
  Vec2 tangent;       // (b - a) / |b - a|
  Vec2 normal;        // unit outward normal of the element
  double length = 0.0;
  int orientation = 1;
};

struct ElementGeometry {
  CellShape shape = CellShape::triangle;
  std::vector<Vec2> vertex;        // ccw cycle, 3 or 4 entries
  std::vector<EdgeGeometry> edge;  // edge i runs vertex[i] -> vertex[i+1]
  Vec2 centroid;
  double diameter = 0.0;           // min enclosing-circle diameter h_K
  double area = 0.0;
};

// Signed area of a simple polygon (positive for ccw cycles).
double polygon_signed_area(const std::vector<Vec2>& pts);

// Diameter of the smallest circle containing all points (so for a convex
// element, the smallest circle containing the element).
double enclosing_circle_diameter(const std::vector<Vec2>& pts);

// Builds a standalone element from a ccw vertex cycle. All edges carry
// orientation +1 (global orientation = ccw traversal). Throws ConfigError on
// vertex-count/shape mismatch or non-ccw input.
ElementGeometry make_element(CellShape shape, const std::vector<Vec2>& ccw_vertices);

}  // namespace maxhdg
