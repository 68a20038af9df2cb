#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "specshape/error.hpp"
#include "specshape/geometry.hpp"

namespace specshape {

namespace {

// Mutable triangle soup with vertex-to-face incidence, enough for collapses.
class CollapseMesh {
 public:
  explicit CollapseMesh(const Mesh& mesh)
      : positions_(mesh.vertices),
        quadrics_(mesh.num_vertices(), Eigen::Matrix4d::Zero()),
        incident_(mesh.num_vertices()),
        vertex_alive_(mesh.num_vertices(), true) {
    faces_.reserve(mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) {
      faces_.push_back({mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)});
      face_alive_.push_back(true);
      for (int j = 0; j < 3; ++j) incident_[mesh.faces(f, j)].push_back(f);
      // Area-weighted plane quadric of the original face.
      const Eigen::Vector3d n = normal(f, -1, Eigen::RowVector3d::Zero());
      const double twice_area = n.norm();
      if (twice_area == 0.0) continue;
      Eigen::Vector4d plane;
      plane << n / twice_area, -n.dot(mesh.vertices.row(mesh.faces(f, 0)).transpose()) / twice_area;
      const Eigen::Matrix4d q = 0.5 * twice_area * plane * plane.transpose();
      for (int j = 0; j < 3; ++j) quadrics_[mesh.faces(f, j)] += q;
    }
    alive_vertices_ = mesh.num_vertices();
  }

  int alive_vertices() const { return alive_vertices_; }

  // Unique edges of live faces as (length, a, b), shortest first.
  std::vector<std::tuple<double, int, int>> sorted_edges() const {
    std::vector<std::tuple<double, int, int>> edges;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      for (int j = 0; j < 3; ++j) {
        const int a = faces_[f][j], b = faces_[f][(j + 1) % 3];
        if (a < b) edges.emplace_back((positions_.row(a) - positions_.row(b)).norm(), a, b);
      }
    }
    // Boundary edges only appear once above when a > b in their sole face;
    // those are never collapsed, so losing them here is fine.
    std::sort(edges.begin(), edges.end());
    return edges;
  }

  std::set<int> neighbors(int v) const {
    std::set<int> out;
    for (int f : incident_[v]) {
      if (!face_alive_[f]) continue;
      for (int u : faces_[f]) {
        if (u != v) out.insert(u);
      }
    }
    return out;
  }

  bool try_collapse(int a, int b) {
    if (alive_vertices_ <= 4) return false;
    std::vector<int> shared;  // faces containing edge (a, b)
    for (int f : incident_[a]) {
      if (face_alive_[f] && contains(f, b)) shared.push_back(f);
    }
    if (shared.size() != 2) return false;  // boundary or non-manifold edge

    // Link condition: common neighbours are exactly the two opposite vertices.
    const auto na = neighbors(a);
    const auto nb = neighbors(b);
    std::vector<int> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (common.size() != 2) return false;
    if (is_boundary_vertex(a) || is_boundary_vertex(b)) return false;

    const Eigen::RowVector3d target = placement(a, b);

    // Reject collapses that flip or degenerate any surviving face.
    for (int v : {a, b}) {
      for (int f : incident_[v]) {
        if (!face_alive_[f] || (contains(f, a) && contains(f, b))) continue;
        const Eigen::Vector3d before = normal(f, -1, target);
        const Eigen::Vector3d after = normal(f, v, target);
        const double area_after = 0.5 * after.norm();
        if (area_after < 1e3 * kMinFaceArea) return false;
        if (before.normalized().dot(after.normalized()) < 0.2) return false;
      }
    }

    for (int f : shared) face_alive_[f] = false;
    positions_.row(a) = target;
    quadrics_[a] += quadrics_[b];
    for (int f : incident_[b]) {
      if (!face_alive_[f]) continue;
      for (int& u : faces_[f]) {
        if (u == b) u = a;
      }
      incident_[a].push_back(f);
    }
    incident_[b].clear();
    vertex_alive_[b] = false;
    --alive_vertices_;
    return true;
  }

  Mesh compact() const {
    std::vector<int> remap(vertex_alive_.size(), -1);
    int next = 0;
    for (std::size_t v = 0; v < vertex_alive_.size(); ++v) {
      if (vertex_alive_[v]) remap[v] = next++;
    }
    Mesh out;
    out.vertices.resize(next, 3);
    for (std::size_t v = 0; v < vertex_alive_.size(); ++v) {
      if (remap[v] >= 0) out.vertices.row(remap[v]) = positions_.row(v);
    }
    int live_faces = 0;
    for (bool alive : face_alive_) live_faces += alive;
    out.faces.resize(live_faces, 3);
    int f_out = 0;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      out.faces.row(f_out++) << remap[faces_[f][0]], remap[faces_[f][1]], remap[faces_[f][2]];
    }
    return out;
  }

 private:
  bool contains(int f, int v) const {
    return faces_[f][0] == v || faces_[f][1] == v || faces_[f][2] == v;
  }

  bool is_boundary_vertex(int v) const {
    // A closed fan has every neighbour edge shared by two live faces.
    for (int u : neighbors(v)) {
      int count = 0;
      for (int f : incident_[v]) count += face_alive_[f] && contains(f, u);
      if (count != 2) return true;
    }
    return false;
  }

  // Point minimizing the summed quadric error of a and b. Falls back to the
  // minimizer on segment ab when the optimum is ill-posed or strays more than
  // one edge length from the midpoint.
  Eigen::RowVector3d placement(int a, int b) const {
    const Eigen::Matrix4d q = quadrics_[a] + quadrics_[b];
    const Eigen::Vector3d pa = positions_.row(a).transpose(), pb = positions_.row(b).transpose();
    const Eigen::Vector3d mid = 0.5 * (pa + pb);
    const double length = (pb - pa).norm();
    const Eigen::Matrix3d A = q.topLeftCorner<3, 3>();
    const Eigen::Vector3d rhs = -q.topRightCorner<3, 1>();
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
    if (lu.isInvertible() && lu.rcond() > 1e-8) {
      const Eigen::Vector3d x = lu.solve(rhs);
      if ((x - mid).norm() <= length) return x.transpose();
    }
    // Error along p(t) = pa + t d is e(t) = t^2 d'Ad + 2t d'(A pa - rhs) + const.
    const Eigen::Vector3d d = pb - pa;
    const double curvature = d.dot(A * d);
    double t = 0.5;
    if (curvature > 0.0) t = std::clamp(-d.dot(A * pa - rhs) / curvature, 0.0, 1.0);
    return (pa + t * d).transpose();
  }

  // Unnormalized face normal; if moved >= 0, that vertex is placed at target.
  Eigen::Vector3d normal(int f, int moved, const Eigen::RowVector3d& target) const {
    Eigen::Vector3d p[3];
    for (int j = 0; j < 3; ++j) {
      const int v = faces_[f][j];
      p[j] = (v == moved ? target : positions_.row(v)).transpose();
    }
    return (p[1] - p[0]).cross(p[2] - p[0]);
  }

  Points3 positions_;
  std::vector<Eigen::Matrix4d> quadrics_;
  std::vector<std::array<int, 3>> faces_;
  std::vector<bool> face_alive_;
  std::vector<std::vector<int>> incident_;
  std::vector<bool> vertex_alive_;
  int alive_vertices_ = 0;
};

}  // namespace

Mesh decimate(const Mesh& mesh, int target_n) {
  const int n = mesh.num_vertices();
  if (target_n < 4 || target_n >= n) {
    throw ConfigError("decimation target must satisfy 4 <= target < " + std::to_string(n) + ", got " +
                      std::to_string(target_n));
  }
  validate(mesh);
  CollapseMesh work(mesh);

  // Rounds of independent collapses: within a round no two collapses touch
  // the same one-ring, so edge lengths sorted at the start stay meaningful.
  while (work.alive_vertices() > target_n) {
    const auto edges = work.sorted_edges();
    std::vector<bool> touched(n, false);
    bool progress = false;
    for (const auto& [length, a, b] : edges) {
      if (work.alive_vertices() <= target_n) break;
      if (touched[a] || touched[b]) continue;
      const auto ring_a = work.neighbors(a);
      const auto ring_b = work.neighbors(b);
      if (!work.try_collapse(a, b)) continue;
      progress = true;
      touched[a] = touched[b] = true;
      for (int u : ring_a) touched[u] = true;
      for (int u : ring_b) touched[u] = true;
    }
    if (!progress) break;
  }

  Mesh out = work.compact();
  const int reached = out.num_vertices();
  if (std::abs(reached - target_n) > 0.05 * target_n) {
    throw DataError("decimation stalled at " + std::to_string(reached) + " vertices (target " +
                    std::to_string(target_n) + ") without breaking manifoldness");
  }
  validate(out);
  return out;
}

}  // namespace specshape
