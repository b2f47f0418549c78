// Structured meshes of the unit square (triangles, axis-aligned squares) and
// of the sheared strip 0 <= x - sqrt(3) y <= 1, 0 <= y <= 1/2 (congruent
// parallelograms), with the oriented edge topology the trace space lives on.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "maxhdg/geometry.hpp"

namespace maxhdg {

struct Mesh {
  struct Element {
    std::array<int, 4> vertex{{-1, -1, -1, -1}};  // ccw cycle
    int num_vertices = 0;
    CellShape shape = CellShape::triangle;
    std::array<int, 4> edge{{-1, -1, -1, -1}};       // global edge ids
    std::array<int, 4> orientation{{0, 0, 0, 0}};    // +1: ccw follows global tangent
    Vec2 centroid;
    double diameter = 0.0;  // h_K, min enclosing-circle diameter
    double area = 0.0;
  };

  struct Edge {
    int a = -1;  // vertex ids with a < b; global tangent points a -> b
    int b = -1;
    std::array<int, 2> element{{-1, -1}};  // incident elements (-1 if none)
    double length = 0.0;
    Vec2 tangent;  // unit, from vertex a to vertex b
    bool boundary = false;
  };

  std::vector<Vec2> vertices;
  std::vector<Element> elements;
  std::vector<Edge> edges;
  double h = 0.0;  // max over h_K; report headers print sqrt(2)/h

  int num_interior_edges() const;
  int num_boundary_edges() const;

  // Standalone geometry of one element, with per-edge global orientations.
  ElementGeometry geometry(int element) const;
};

// General constructor: vertex coordinates plus one counterclockwise vertex
// cycle per element (3 vertices for triangles, 4 for parallelograms/squares;
// all cells share one shape tag).  Edge ids are assigned in sorted
// (min-vertex, max-vertex) order, so the numbering is independent of the cell
// order.  Throws ConfigError for malformed input (out-of-range vertex ids,
// wrong cycle length, clockwise cycles, an edge shared by more than two
// cells).
Mesh build_mesh_from_cells(std::vector<Vec2> vertices,
                           std::vector<std::vector<int>> cells, CellShape shape);

// Unit square split into n x n cells, each cut by the lower-left to
// upper-right diagonal: 2 n^2 triangles, h = sqrt(2)/n.
Mesh build_triangle_mesh(int n);

// n x n congruent parallelograms tiling {0 <= x - sqrt(3) y <= 1, 0 <= y <= 1/2}.
Mesh build_parallelogram_mesh(int n);

// n x n axis-aligned squares tiling the unit square.
Mesh build_square_mesh(int n);

// Unit outward normal of an element at one of its local edges.
Vec2 outward_normal(const Mesh& mesh, int element, int local_edge);

// Plain-text node/element/edge listing for debugging; not a stability contract.
std::string dump_mesh(const Mesh& mesh);

}  // namespace maxhdg
