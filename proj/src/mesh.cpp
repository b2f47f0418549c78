#include "maxhdg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "maxhdg/errors.hpp"

namespace maxhdg {

int Mesh::num_interior_edges() const {
  int count = 0;
  for (const Edge& e : edges) {
    if (!e.boundary) ++count;
  }
  return count;
}

int Mesh::num_boundary_edges() const {
  return static_cast<int>(edges.size()) - num_interior_edges();
}

ElementGeometry Mesh::geometry(int element) const {
  const Element& el = elements[element];
  std::vector<Vec2> verts(el.num_vertices);
  for (int i = 0; i < el.num_vertices; ++i) verts[i] = vertices[el.vertex[i]];
  ElementGeometry geom = make_element(el.shape, verts);
  for (int i = 0; i < el.num_vertices; ++i) {
    const Edge& ge = edges[el.edge[i]];
    EdgeGeometry& eg = geom.edge[i];
    eg.a = vertices[ge.a];
    eg.b = vertices[ge.b];
    eg.tangent = ge.tangent;
    eg.length = ge.length;
    eg.orientation = el.orientation[i];
    // The outward normal from make_element is already correct (it only
    // depends on the ccw traversal); re-derive it from the global tangent so
    // normal = orientation * rotate(tangent, -90deg) stays exactly consistent.
    const Vec2 ccw_t = static_cast<double>(eg.orientation) * eg.tangent;
    eg.normal = {ccw_t.y, -ccw_t.x};
  }
  return geom;
}

Mesh build_mesh_from_cells(std::vector<Vec2> vertices,
                           std::vector<std::vector<int>> cells, CellShape shape) {
  if (cells.empty()) throw ConfigError("mesh needs at least one element");
  const std::size_t cycle_len = (shape == CellShape::triangle) ? 3 : 4;
  for (const std::vector<int>& cyc : cells) {
    if (cyc.size() != cycle_len) {
      throw ConfigError("element cycle length does not match the cell shape");
    }
    for (int v : cyc) {
      if (v < 0 || v >= static_cast<int>(vertices.size())) {
        throw ConfigError("element cycle references a vertex that does not exist");
      }
    }
  }

  Mesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.elements.resize(cells.size());

  std::map<std::pair<int, int>, int> edge_id;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::vector<int>& cyc = cells[c];
    for (std::size_t i = 0; i < cyc.size(); ++i) {
      int p = cyc[i];
      int q = cyc[(i + 1) % cyc.size()];
      if (p > q) std::swap(p, q);
      edge_id.emplace(std::make_pair(p, q), 0);
    }
  }
  mesh.edges.resize(edge_id.size());
  int next = 0;
  for (auto& [key, id] : edge_id) {
    id = next++;
    Mesh::Edge& e = mesh.edges[id];
    e.a = key.first;
    e.b = key.second;
    const Vec2 d = mesh.vertices[e.b] - mesh.vertices[e.a];
    e.length = norm(d);
    e.tangent = (1.0 / e.length) * d;
  }

  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::vector<int>& cyc = cells[c];
    Mesh::Element& el = mesh.elements[c];
    el.num_vertices = static_cast<int>(cyc.size());
    el.shape = shape;
    std::vector<Vec2> verts(cyc.size());
    for (std::size_t i = 0; i < cyc.size(); ++i) {
      el.vertex[i] = cyc[i];
      verts[i] = mesh.vertices[cyc[i]];
    }
    const double area = polygon_signed_area(verts);
    if (area <= 0.0) throw ConfigError("mesh element cycle not counterclockwise");
    el.area = area;
    el.diameter = enclosing_circle_diameter(verts);
    Vec2 centroid{0.0, 0.0};
    for (const Vec2& v : verts) centroid = centroid + v;
    el.centroid = (1.0 / static_cast<double>(verts.size())) * centroid;
    mesh.h = std::max(mesh.h, el.diameter);

    for (std::size_t i = 0; i < cyc.size(); ++i) {
      const int p = cyc[i];
      const int q = cyc[(i + 1) % cyc.size()];
      const int id = edge_id.at({std::min(p, q), std::max(p, q)});
      el.edge[i] = id;
      el.orientation[i] = (p < q) ? 1 : -1;
      Mesh::Edge& e = mesh.edges[id];
      if (e.element[0] < 0) {
        e.element[0] = static_cast<int>(c);
      } else if (e.element[1] < 0) {
        e.element[1] = static_cast<int>(c);
      } else {
        throw ConfigError("edge shared by more than two elements");
      }
    }
  }
  for (Mesh::Edge& e : mesh.edges) e.boundary = (e.element[1] < 0);
  return mesh;
}

namespace {

void require_positive_n(int n) {
  if (n < 1) throw ConfigError("mesh subdivision count must be at least 1");
}

}  // namespace

Mesh build_triangle_mesh(int n) {
  require_positive_n(n);
  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::vector<int>> cells;
  cells.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      // Diagonal from the lower-left to the upper-right corner of the cell.
      cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      cells.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return build_mesh_from_cells(std::move(vertices), std::move(cells), CellShape::triangle);
}

Mesh build_parallelogram_mesh(int n) {
  require_positive_n(n);
  // Vertices x = s + sqrt(3) t, y = t with s in [0,1], t in [0,1/2] on an
  // n x n lattice; every cell is a translate of the n=1 parallelogram scaled
  // by 1/n, with corners (0,0), (1/n,0), ((1+sqrt(3)/2)/n, 1/(2n)), ...
  const double root3 = std::sqrt(3.0);
  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const double s = static_cast<double>(i) / n;
      const double t = static_cast<double>(j) / (2.0 * n);
      vertices.push_back({s + root3 * t, t});
    }
  }
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::vector<int>> cells;
  cells.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return build_mesh_from_cells(std::move(vertices), std::move(cells), CellShape::parallelogram);
}

Mesh build_square_mesh(int n) {
  require_positive_n(n);
  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::vector<int>> cells;
  cells.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return build_mesh_from_cells(std::move(vertices), std::move(cells), CellShape::square);
}

Vec2 outward_normal(const Mesh& mesh, int element, int local_edge) {
  const Mesh::Element& el = mesh.elements[element];
  const Mesh::Edge& e = mesh.edges[el.edge[local_edge]];
  const Vec2 ccw_t = static_cast<double>(el.orientation[local_edge]) * e.tangent;
  return {ccw_t.y, -ccw_t.x};
}

std::string dump_mesh(const Mesh& mesh) {
  std::ostringstream out;
  out << "vertices " << mesh.vertices.size() << "\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    out << "v " << i << " " << mesh.vertices[i].x << " " << mesh.vertices[i].y << "\n";
  }
  out << "elements " << mesh.elements.size() << "\n";
  for (std::size_t c = 0; c < mesh.elements.size(); ++c) {
    const Mesh::Element& el = mesh.elements[c];
    out << "e " << c;
    for (int i = 0; i < el.num_vertices; ++i) out << " " << el.vertex[i];
    out << "\n";
  }
  out << "edges " << mesh.edges.size() << "\n";
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    const Mesh::Edge& e = mesh.edges[i];
    out << "g " << i << " " << e.a << " " << e.b << " " << (e.boundary ? 1 : 0) << "\n";
  }
  return out.str();
}

}  // namespace maxhdg
