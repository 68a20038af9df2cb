#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "specshape/error.hpp"
#include "specshape/laplacian.hpp"

namespace specshape::fem {

const std::array<QuadraturePoint, 12>& triangle_rule_deg6() {
  // Dunavant's degree-6 rule: two 3-point orbits and one 6-point orbit.
  static const std::array<QuadraturePoint, 12> rule = [] {
    constexpr double wa = 0.116786275726379, a1 = 0.501426509658179, a2 = 0.249286745170910;
    constexpr double wb = 0.050844906370207, b1 = 0.873821971016996, b2 = 0.063089014491502;
    constexpr double wc = 0.082851075618374, c1 = 0.053145049844817, c2 = 0.310352451033784,
                     c3 = 0.636502499121399;
    return std::array<QuadraturePoint, 12>{{
        {{a1, a2, a2}, wa}, {{a2, a1, a2}, wa}, {{a2, a2, a1}, wa},
        {{b1, b2, b2}, wb}, {{b2, b1, b2}, wb}, {{b2, b2, b1}, wb},
        {{c1, c2, c3}, wc}, {{c1, c3, c2}, wc}, {{c2, c1, c3}, wc},
        {{c2, c3, c1}, wc}, {{c3, c1, c2}, wc}, {{c3, c2, c1}, wc},
    }};
  }();
  return rule;
}

void cubic_basis(const std::array<double, 3>& L, double value[10], double dL[10][3]) {
  for (int k = 0; k < 10; ++k) dL[k][0] = dL[k][1] = dL[k][2] = 0.0;

  for (int i = 0; i < 3; ++i) {
    const double l = L[i];
    value[i] = 0.5 * l * (3.0 * l - 1.0) * (3.0 * l - 2.0);
    dL[i][i] = 0.5 * (27.0 * l * l - 18.0 * l + 2.0);
  }

  // Edge node near vertex i on edge (i, j): 4.5 L_i L_j (3 L_i - 1).
  auto edge_node = [&](int k, int i, int j) {
    const double li = L[i], lj = L[j];
    value[k] = 4.5 * li * lj * (3.0 * li - 1.0);
    dL[k][i] = 4.5 * (6.0 * li * lj - lj);
    dL[k][j] = 4.5 * (3.0 * li * li - li);
  };
  edge_node(3, 0, 1);
  edge_node(4, 1, 0);
  edge_node(5, 1, 2);
  edge_node(6, 2, 1);
  edge_node(7, 2, 0);
  edge_node(8, 0, 2);

  value[9] = 27.0 * L[0] * L[1] * L[2];
  dL[9][0] = 27.0 * L[1] * L[2];
  dL[9][1] = 27.0 * L[0] * L[2];
  dL[9][2] = 27.0 * L[0] * L[1];
}

Eigen::Matrix3d barycentric_gram(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                                 const Eigen::Vector3d& p2, double& area) {
  // grad L_m is the in-plane normal of the opposite edge e_m scaled by
  // 1 / (2A); all gradients share the same rotation, so their dot products
  // reduce to edge dot products.
  const Eigen::Vector3d e[3] = {p2 - p1, p0 - p2, p1 - p0};
  area = 0.5 * e[2].cross(-e[1]).norm();
  Eigen::Matrix3d gram;
  const double inv = 1.0 / (4.0 * area * area);
  for (int m = 0; m < 3; ++m) {
    for (int n = 0; n < 3; ++n) gram(m, n) = e[m].dot(e[n]) * inv;
  }
  return gram;
}

CubicNodeMap build_cubic_node_map(const Mesh& mesh) {
  CubicNodeMap map;
  map.vertex_count = mesh.num_vertices();
  map.edges = unique_edges(mesh);
  map.face_edges.resize(mesh.num_faces());
  auto edge_index = [&](int a, int b) {
    const std::array<int, 2> key = {std::min(a, b), std::max(a, b)};
    const auto it = std::lower_bound(map.edges.begin(), map.edges.end(), key);
    return static_cast<int>(it - map.edges.begin());
  };
  for (int f = 0; f < mesh.num_faces(); ++f) {
    for (int j = 0; j < 3; ++j) {
      map.face_edges[f][j] = edge_index(mesh.faces(f, j), mesh.faces(f, (j + 1) % 3));
    }
  }
  return map;
}

namespace {

void require_area(double area, int face) {
  if (!(area >= kMinFaceArea)) {
    throw DataError("degenerate triangle: face " + std::to_string(face) + " has area " +
                    std::to_string(area) + " (< 1e-12)");
  }
}

}  // namespace

LinearBlock linear_element(const Mesh& mesh, int face) {
  LinearBlock block;
  Eigen::Vector3d p[3];
  for (int j = 0; j < 3; ++j) {
    block.nodes[j] = mesh.faces(face, j);
    p[j] = mesh.vertices.row(block.nodes[j]).transpose();
  }
  const double twice_area = (p[1] - p[0]).cross(p[2] - p[0]).norm();
  const double area = 0.5 * twice_area;
  require_area(area, face);

  block.stiffness.setZero();
  for (int k = 0; k < 3; ++k) {
    // The angle at vertex k weights the opposite edge (i, j).
    const int i = (k + 1) % 3, j = (k + 2) % 3;
    const Eigen::Vector3d u = p[i] - p[k], v = p[j] - p[k];
    const double cot = u.dot(v) / twice_area;
    block.stiffness(i, j) -= 0.5 * cot;
    block.stiffness(j, i) -= 0.5 * cot;
    block.stiffness(i, i) += 0.5 * cot;
    block.stiffness(j, j) += 0.5 * cot;
  }
  block.mass.setConstant(area / 12.0);
  block.mass.diagonal().setConstant(area / 6.0);
  return block;
}

CubicBlock cubic_element(const Mesh& mesh, const CubicNodeMap& map, int face) {
  CubicBlock block;
  const int v[3] = {mesh.faces(face, 0), mesh.faces(face, 1), mesh.faces(face, 2)};
  double area = 0.0;
  const Eigen::Matrix3d gram = barycentric_gram(mesh.vertices.row(v[0]).transpose(),
                                                mesh.vertices.row(v[1]).transpose(),
                                                mesh.vertices.row(v[2]).transpose(), area);
  require_area(area, face);

  const int base_edge = map.vertex_count;
  const int base_face = map.vertex_count + 2 * static_cast<int>(map.edges.size());
  for (int j = 0; j < 3; ++j) block.nodes[j] = v[j];
  // Local edge slot j covers (v[j], v[j+1]); its first node sits near v[j].
  for (int j = 0; j < 3; ++j) {
    const int a = v[j], b = v[(j + 1) % 3];
    const int edge = map.face_edges[face][j];
    const int near_min = base_edge + 2 * edge, near_max = near_min + 1;
    block.nodes[3 + 2 * j] = a < b ? near_min : near_max;
    block.nodes[4 + 2 * j] = a < b ? near_max : near_min;
  }
  block.nodes[9] = base_face + face;

  block.stiffness.setZero();
  block.mass.setZero();
  double phi[10];
  double dphi[10][3];
  for (const auto& q : triangle_rule_deg6()) {
    cubic_basis(q.bary, phi, dphi);
    Eigen::Matrix<double, 10, 3> D;
    for (int k = 0; k < 10; ++k) D.row(k) << dphi[k][0], dphi[k][1], dphi[k][2];
    const Eigen::Map<const Eigen::Matrix<double, 10, 1>> values(phi);
    block.stiffness.noalias() += (q.weight * area) * D * gram * D.transpose();
    block.mass.noalias() += (q.weight * area) * values * values.transpose();
  }
  return block;
}

}  // namespace specshape::fem
