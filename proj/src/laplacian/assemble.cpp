#include <iomanip>
#include <istream>
#include <ostream>

#include "specshape/error.hpp"
#include "specshape/kernels.hpp"
#include "specshape/laplacian.hpp"

namespace specshape {

namespace {

using Triplet = Eigen::Triplet<double, int>;

// Element blocks are scattered in element order, so summation order (and the
// resulting bits) does not depend on how the blocks were computed.
template <int K>
LaplacianPair scatter(const std::vector<fem::ElementBlock<K>>& blocks, int nodes, Discretization disc) {
  std::vector<Triplet> s_trip, m_trip;
  s_trip.reserve(blocks.size() * K * K);
  m_trip.reserve(blocks.size() * K * K);
  for (const auto& b : blocks) {
    for (int i = 0; i < K; ++i) {
      for (int j = 0; j < K; ++j) {
        s_trip.emplace_back(b.nodes[i], b.nodes[j], b.stiffness(i, j));
        m_trip.emplace_back(b.nodes[i], b.nodes[j], b.mass(i, j));
      }
    }
  }
  LaplacianPair pair;
  pair.disc = disc;
  pair.stiffness.resize(nodes, nodes);
  pair.mass.resize(nodes, nodes);
  pair.stiffness.setFromTriplets(s_trip.begin(), s_trip.end());
  pair.mass.setFromTriplets(m_trip.begin(), m_trip.end());
  return pair;
}

}  // namespace

std::string to_string(Discretization disc) {
  switch (disc) {
    case Discretization::linear_fem: return "linear_fem";
    case Discretization::cubic_fem: return "cubic_fem";
    case Discretization::contour_fem: return "contour_fem";
  }
  return "unknown";
}

Discretization discretization_from_string(const std::string& s) {
  if (s == "linear_fem" || s == "linear") return Discretization::linear_fem;
  if (s == "cubic_fem" || s == "cubic") return Discretization::cubic_fem;
  if (s == "contour_fem" || s == "contour") return Discretization::contour_fem;
  throw ConfigError("unknown discretization '" + s + "' (expected linear, cubic or contour)");
}

LaplacianPair assemble_linear_fem(const Mesh& mesh) {
  validate(mesh, false);
  auto pair = scatter(kernels::omp::linear_element_blocks(mesh), mesh.num_vertices(),
                      Discretization::linear_fem);
  pair.roles.assign(mesh.num_vertices(), NodeRole::vertex);
  return pair;
}

LaplacianPair assemble_cubic_fem(const Mesh& mesh) {
  validate(mesh, false);
  const auto map = fem::build_cubic_node_map(mesh);
  auto pair = scatter(kernels::omp::cubic_element_blocks(mesh, map), map.node_count(),
                      Discretization::cubic_fem);
  pair.roles.assign(map.vertex_count, NodeRole::vertex);
  pair.roles.insert(pair.roles.end(), 2 * map.edges.size(), NodeRole::edge);
  pair.roles.insert(pair.roles.end(), map.face_edges.size(), NodeRole::face);
  return pair;
}

LaplacianPair assemble_contour_fem(const Contour& contour) {
  validate(contour);
  const int n = contour.size();
  std::vector<fem::ElementBlock<2>> blocks(n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const double len = (contour.points.row(j) - contour.points.row(i)).norm();
    auto& b = blocks[i];
    b.nodes = {i, j};
    b.stiffness << 1.0, -1.0, -1.0, 1.0;
    b.stiffness /= len;
    b.mass << 2.0, 1.0, 1.0, 2.0;
    b.mass *= len / 6.0;
  }
  auto pair = scatter(blocks, n, Discretization::contour_fem);
  pair.roles.assign(n, NodeRole::vertex);
  return pair;
}

void write_triplets(const SparseMatrix& m, std::ostream& out) {
  out << std::setprecision(17);
  for (int col = 0; col < m.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  if (!out) throw DataError("failed writing sparse triplets");
}

SparseMatrix read_triplets(std::istream& in, int rows, int cols) {
  std::vector<Triplet> trips;
  long i = 0, j = 0;
  double v = 0.0;
  while (in >> i >> j >> v) {
    if (i < 0 || i >= rows || j < 0 || j >= cols) {
      throw DataError("triplet (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
    }
    trips.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
  }
  if (!in.eof()) throw DataError("malformed triplet line after " + std::to_string(trips.size()) + " entries");
  SparseMatrix m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

}  // namespace specshape
