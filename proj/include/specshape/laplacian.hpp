#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "specshape/geometry.hpp"

namespace specshape {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

enum class Discretization { linear_fem, cubic_fem, contour_fem };

std::string to_string(Discretization disc);
Discretization discretization_from_string(const std::string& s);

enum class NodeRole : unsigned char { vertex, edge, face };

// Stiffness/mass pencil of a Laplace-Beltrami discretization. Generalized
// eigenpairs S phi = lambda M phi approximate the continuous spectrum.
struct LaplacianPair {
  SparseMatrix stiffness;
  SparseMatrix mass;
  Discretization disc = Discretization::linear_fem;
  std::vector<NodeRole> roles;

  int nodes() const { return static_cast<int>(stiffness.rows()); }
};

LaplacianPair assemble_linear_fem(const Mesh& mesh);
LaplacianPair assemble_cubic_fem(const Mesh& mesh);
LaplacianPair assemble_contour_fem(const Contour& contour);

// "i j v" lines, 0-based, one per stored nonzero, column-major order.
void write_triplets(const SparseMatrix& m, std::ostream& out);
SparseMatrix read_triplets(std::istream& in, int rows, int cols);

// ---------------------------------------------------------------------------
// Element-level pieces, exposed for testing and for the parallel kernels.

namespace fem {

// Symmetric 12-point rule, exact for polynomials of degree 6 on triangles.
// Barycentric points with weights summing to 1 (multiply by the area).
struct QuadraturePoint {
  std::array<double, 3> bary;
  double weight;
};
const std::array<QuadraturePoint, 12>& triangle_rule_deg6();

// Cubic Lagrange basis on barycentric coordinates. Local node order:
// 0..2 vertices, 3,4 on edge (0,1) near vertex 0 then 1, 5,6 on edge (1,2)
// near 1 then 2, 7,8 on edge (2,0) near 2 then 0, 9 centroid.
void cubic_basis(const std::array<double, 3>& L, double value[10], double dL[10][3]);

// Inner products of barycentric gradients, grad L_i . grad L_j, for the
// triangle (p0, p1, p2); the triangle may live in R^3.
Eigen::Matrix3d barycentric_gram(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                                 const Eigen::Vector3d& p2, double& area);

template <int K>
struct ElementBlock {
  std::array<int, K> nodes;
  Eigen::Matrix<double, K, K> stiffness;
  Eigen::Matrix<double, K, K> mass;
};

using LinearBlock = ElementBlock<3>;
using CubicBlock = ElementBlock<10>;

// Global node numbering for cubic elements: vertices first, then two nodes
// per edge keyed by (min, max) vertex (first node nearer the min vertex),
// then one node per face.
struct CubicNodeMap {
  int vertex_count = 0;
  std::vector<std::array<int, 2>> edges;        // sorted unique edges
  std::vector<std::array<int, 3>> face_edges;   // edge index of (0,1), (1,2), (2,0)
  int node_count() const {
    return vertex_count + 2 * static_cast<int>(edges.size()) + static_cast<int>(face_edges.size());
  }
};

CubicNodeMap build_cubic_node_map(const Mesh& mesh);

// Throws DataError naming the face if its area is below kMinFaceArea.
LinearBlock linear_element(const Mesh& mesh, int face);
CubicBlock cubic_element(const Mesh& mesh, const CubicNodeMap& map, int face);

}  // namespace fem

}  // namespace specshape
