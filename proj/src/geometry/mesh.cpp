#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Geometry>

#include "specshape/error.hpp"
#include "specshape/geometry.hpp"

namespace specshape {

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

double triangle_area(const Mesh& mesh, int face) {
  const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(face, 0));
  const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(face, 1));
  const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(face, 2));
  return 0.5 * (b - a).cross(c - a).norm();
}

double surface_area(const Mesh& mesh) {
  double area = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) area += triangle_area(mesh, f);
  return area;
}

std::vector<double> edge_lengths(const Contour& contour) {
  const int n = contour.size();
  std::vector<double> lengths(n);
  for (int i = 0; i < n; ++i) {
    lengths[i] = (contour.points.row((i + 1) % n) - contour.points.row(i)).norm();
  }
  return lengths;
}

double perimeter(const Contour& contour) {
  const auto lengths = edge_lengths(contour);
  return std::accumulate(lengths.begin(), lengths.end(), 0.0);
}

std::vector<std::array<int, 2>> unique_edges(const Mesh& mesh) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(3 * mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    for (int j = 0; j < 3; ++j) {
      int a = mesh.faces(f, j);
      int b = mesh.faces(f, (j + 1) % 3);
      if (a > b) std::swap(a, b);
      edges.push_back({a, b});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<double> edge_lengths(const Mesh& mesh) {
  const auto edges = unique_edges(mesh);
  std::vector<double> lengths(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    lengths[e] = (mesh.vertices.row(edges[e][0]) - mesh.vertices.row(edges[e][1])).norm();
  }
  return lengths;
}

int connected_components(const Mesh& mesh) {
  const int n = mesh.num_vertices();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const int r0 = find_root(parent, mesh.faces(f, 0));
    for (int j = 1; j < 3; ++j) {
      const int r = find_root(parent, mesh.faces(f, j));
      if (r != r0) parent[r] = r0;
    }
  }
  int components = 0;
  for (int v = 0; v < n; ++v) components += (find_root(parent, v) == v);
  return components;
}

double diameter(const Points3& points) {
  if (points.rows() == 0) return 0.0;
  return (points.colwise().maxCoeff() - points.colwise().minCoeff()).norm();
}

Points3 lift(const Points2& points) {
  Points3 out = Points3::Zero(points.rows(), 3);
  out.leftCols<2>() = points;
  return out;
}

void validate(const Mesh& mesh, bool require_connected) {
  const int n = mesh.num_vertices();
  if (n < 3 || mesh.num_faces() < 1) {
    throw DataError("mesh needs at least 3 vertices and 1 face, got " + std::to_string(n) +
                    " vertices and " + std::to_string(mesh.num_faces()) + " faces");
  }
  if (!mesh.vertices.allFinite()) throw DataError("mesh has non-finite vertex coordinates");

  // Directed half-edge counts: each undirected edge may appear at most once
  // per direction (consistent orientation) and at most twice overall.
  std::map<std::pair<int, int>, int> directed;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    for (int j = 0; j < 3; ++j) {
      const int idx = mesh.faces(f, j);
      if (idx < 0 || idx >= n) {
        throw DataError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                        " but the mesh has " + std::to_string(n) + " vertices");
      }
    }
    const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    if (a == b || b == c || a == c) {
      throw DataError("face " + std::to_string(f) + " repeats a vertex index");
    }
    if (triangle_area(mesh, f) < kMinFaceArea) {
      throw DataError("face " + std::to_string(f) + " is degenerate (area below 1e-12)");
    }
    for (int j = 0; j < 3; ++j) {
      const int u = mesh.faces(f, j), v = mesh.faces(f, (j + 1) % 3);
      if (++directed[{u, v}] > 1) {
        throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") is used twice with the same orientation (face " + std::to_string(f) +
                        "): non-manifold or inconsistently oriented");
      }
    }
  }
  // Directed uniqueness already limits each undirected edge to two faces.

  if (require_connected) {
    const int components = connected_components(mesh);
    if (components != 1) {
      throw DataError("mesh is not connected (" + std::to_string(components) +
                      " components, counting unreferenced vertices)");
    }
  }
}

void validate(const Contour& contour) {
  const int n = contour.size();
  if (n < 3) throw DataError("contour needs at least 3 points, got " + std::to_string(n));
  if (!contour.points.allFinite()) throw DataError("contour has non-finite coordinates");
  for (int i = 0; i < n; ++i) {
    if ((contour.points.row((i + 1) % n) - contour.points.row(i)).norm() == 0.0) {
      throw DataError("contour points " + std::to_string(i) + " and " +
                      std::to_string((i + 1) % n) + " coincide");
    }
  }
}

void validate(const PointCloud& cloud) {
  if (cloud.size() < 4) {
    throw DataError("point cloud needs at least 4 points, got " + std::to_string(cloud.size()));
  }
  if (!cloud.points.allFinite()) throw DataError("point cloud has non-finite coordinates");
}

}  // namespace specshape
