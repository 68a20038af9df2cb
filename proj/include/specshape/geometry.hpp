#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace specshape {

using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Triangle mesh, counter-clockwise faces.
struct Mesh {
  Points3 vertices;
  Faces faces;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }
};

// Closed polyline; point i connects to point (i + 1) mod n.
struct Contour {
  Points2 points;

  int size() const { return static_cast<int>(points.rows()); }
};

// Unordered samples without connectivity.
struct PointCloud {
  Points3 points;

  int size() const { return static_cast<int>(points.rows()); }
};

using Shape = std::variant<Mesh, Contour, PointCloud>;

inline constexpr double kMinFaceArea = 1e-12;

// Throws DataError describing the first violated invariant.
void validate(const Mesh& mesh, bool require_connected = true);
void validate(const Contour& contour);
void validate(const PointCloud& cloud);

double triangle_area(const Mesh& mesh, int face);
double surface_area(const Mesh& mesh);
double perimeter(const Contour& contour);
std::vector<double> edge_lengths(const Contour& contour);

// Undirected edges (a < b), sorted lexicographically.
std::vector<std::array<int, 2>> unique_edges(const Mesh& mesh);
// Lengths of unique_edges(mesh), same order.
std::vector<double> edge_lengths(const Mesh& mesh);

int connected_components(const Mesh& mesh);
// Bounding-box diagonal.
double diameter(const Points3& points);

// Row-major copy of a contour lifted to z = 0; handy for code shared with meshes.
Points3 lift(const Points2& points);

// ---------------------------------------------------------------------------
// Synthetic shape families

enum class FamilyKind { contour2d, blob3d };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& s);

// Parameter layout and box bounds.
//
// contour2d
//   style = [a, b, c_2, s_2, c_3, s_3, c_4, s_4]
//     a, b: ellipse semi-axes in [0.25, 4]
//     c_j, s_j: cos/sin radial Fourier amplitudes at frequency j, |.| <= 0.15
//   pose  = [bend, theta, tx, ty]
//     bend in [-1, 1] (fraction of the maximal near-isometric bend)
//     theta rotation (radians, |theta| <= pi), translation |t| <= 10
//
// blob3d
//   style = [sx, sy, sz, b_xy, b_yz, b_xz, b_x3]
//     per-axis scale in [0.3, 3]; bump amplitudes in [-0.3, 0.3]
//   pose  = [bend, rx, ry, rz, tx, ty, tz]
//     bend in [-1, 1]; Euler angles |.| <= pi; translation |t| <= 10
struct ParamBox {
  std::vector<double> lo;
  std::vector<double> hi;
};

ParamBox style_bounds(FamilyKind kind);
ParamBox pose_bounds(FamilyKind kind);

// Upper bound on the relative change of any edge length caused by bend = +-1.
inline constexpr double kMaxBendStretch = 0.025;

Contour generate_contour(std::span<const double> style, std::span<const double> pose, int n);
Mesh generate_blob(std::span<const double> style, std::span<const double> pose, int subdiv);

// Unit icosphere; V = 10 * 4^s + 2, F = 20 * 4^s.
Mesh icosphere(int subdiv);
// Flat nx-by-ny grid of squares over [0, width] x [0, height], two triangles each.
Mesh planar_grid(int nx, int ny, double width = 1.0, double height = 1.0);

// One draw of a family: everything needed to regenerate the shape bit-exactly.
struct FamilySample {
  FamilyKind kind = FamilyKind::blob3d;
  std::vector<double> style;
  std::vector<double> pose;
  int resolution = 0;  // contour point count or icosphere subdivision level
  std::uint64_t seed = 0;
};

// Sampling box for a dataset. Defaults stay inside the generator bounds and
// keep parameters away from regions where the spectrum cannot tell shapes
// apart (mirror images, permuted axes).
struct FamilySpec {
  FamilyKind kind = FamilyKind::blob3d;
  int resolution = 3;
  std::uint64_t seed = 1;
  ParamBox style;
  ParamBox pose;

  static FamilySpec defaults(FamilyKind kind);
  FamilySample draw(std::uint64_t index) const;
};

Shape generate(const FamilySample& sample);

// Dataset manifests: the spec plus every draw, so a dataset can be rebuilt
// bit-exactly from the file alone.
nlohmann::json to_json(const FamilySpec& spec);
FamilySpec family_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FamilySample& sample);
FamilySample family_sample_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Point sampling

enum class SamplingMode {
  vertices,    // distinct mesh vertices
  uniform,     // area-weighted surface samples
  nonuniform,  // area weights modulated by a smooth density field
};

PointCloud sample_pointcloud(const Mesh& mesh, double fraction, std::uint64_t seed,
                             SamplingMode mode = SamplingMode::uniform);

// ---------------------------------------------------------------------------
// Decimation

// Shortest-edge collapse under the link condition until target_n vertices
// remain, each merged vertex placed at its quadric error minimizer.
// Deterministic; the result is manifold and connected.
Mesh decimate(const Mesh& mesh, int target_n);

// ---------------------------------------------------------------------------
// File I/O

using WarningSink = std::function<void(const std::string&)>;

// Dispatch on extension: .off/.obj -> Mesh (an .obj without faces -> PointCloud),
// .xyz -> PointCloud, .json -> Contour.
Shape load_shape(const std::filesystem::path& path, const WarningSink& warn = {});
void save_shape(const Shape& shape, const std::filesystem::path& path);

Mesh read_off(std::istream& in, const std::string& name = "<stream>");
void write_off(const Mesh& mesh, std::ostream& out);
Shape read_obj(std::istream& in, const std::string& name = "<stream>", const WarningSink& warn = {});
void write_obj(const Mesh& mesh, std::ostream& out);
void write_obj(const PointCloud& cloud, std::ostream& out);
PointCloud read_xyz(std::istream& in, const std::string& name = "<stream>");
void write_xyz(const PointCloud& cloud, std::ostream& out);
Contour read_contour_json(std::istream& in, const std::string& name = "<stream>");
void write_contour_json(const Contour& contour, std::ostream& out);

}  // namespace specshape
