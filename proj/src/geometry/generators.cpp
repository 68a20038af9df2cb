#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include <Eigen/Geometry>

#include "specshape/error.hpp"
#include "specshape/geometry.hpp"
#include "specshape/random.hpp"

namespace specshape {

namespace {

constexpr int kContourStyleDim = 8;
constexpr int kContourPoseDim = 4;
constexpr int kBlobStyleDim = 7;
constexpr int kBlobPoseDim = 7;

std::vector<double> padded(std::span<const double> given, const std::vector<double>& defaults,
                           const ParamBox& box, const char* what) {
  if (given.size() > defaults.size()) {
    throw ConfigError(std::string(what) + " vector has " + std::to_string(given.size()) +
                      " entries, at most " + std::to_string(defaults.size()) + " allowed");
  }
  std::vector<double> out = defaults;
  std::copy(given.begin(), given.end(), out.begin());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i]) || out[i] < box.lo[i] || out[i] > box.hi[i]) {
      throw ConfigError(std::string(what) + "[" + std::to_string(i) + "] = " +
                        std::to_string(out[i]) + " outside [" + std::to_string(box.lo[i]) + ", " +
                        std::to_string(box.hi[i]) + "]");
    }
  }
  return out;
}

// Bends the plane spanned by (along, across) around a circle of curvature
// kappa. Lengths along the neutral line across = 0 are preserved; the
// along-direction stretch is 1 - kappa * across.
void bend(double kappa, double& along, double& across) {
  if (kappa == 0.0) return;
  const double s = std::sin(kappa * along);
  const double c = std::cos(kappa * along);
  const double new_along = s / kappa - across * s;
  const double new_across = (1.0 - c) / kappa + across * c;
  along = new_along;
  across = new_across;
}

Eigen::Matrix3d euler_rotation(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

bool has_degenerate_face(const Mesh& mesh) {
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (!(triangle_area(mesh, f) >= kMinFaceArea)) return true;
  }
  return false;
}

std::uint64_t hash_params(std::span<const double> a, std::span<const double> b, int n) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](std::span<const double> v) {
    for (double x : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      h = mix_seed(h ^ bits);
    }
  };
  feed(a);
  feed(b);
  return mix_seed(h ^ static_cast<std::uint64_t>(n));
}

}  // namespace

std::string to_string(FamilyKind kind) {
  return kind == FamilyKind::contour2d ? "contour2d" : "blob3d";
}

FamilyKind family_kind_from_string(const std::string& s) {
  if (s == "contour2d") return FamilyKind::contour2d;
  if (s == "blob3d") return FamilyKind::blob3d;
  throw ConfigError("unknown family kind '" + s + "' (expected contour2d or blob3d)");
}

ParamBox style_bounds(FamilyKind kind) {
  if (kind == FamilyKind::contour2d) {
    ParamBox box{std::vector<double>(kContourStyleDim, -0.15), std::vector<double>(kContourStyleDim, 0.15)};
    box.lo[0] = box.lo[1] = 0.25;
    box.hi[0] = box.hi[1] = 4.0;
    return box;
  }
  ParamBox box{std::vector<double>(kBlobStyleDim, -0.2), std::vector<double>(kBlobStyleDim, 0.2)};
  for (int i = 0; i < 3; ++i) {
    box.lo[i] = 0.3;
    box.hi[i] = 3.0;
  }
  return box;
}

ParamBox pose_bounds(FamilyKind kind) {
  if (kind == FamilyKind::contour2d) {
    return {{-1.0, -M_PI, -10.0, -10.0}, {1.0, M_PI, 10.0, 10.0}};
  }
  return {{-1.0, -M_PI, -M_PI, -M_PI, -10.0, -10.0, -10.0},
          {1.0, M_PI, M_PI, M_PI, 10.0, 10.0, 10.0}};
}

Contour generate_contour(std::span<const double> style_in, std::span<const double> pose_in, int n) {
  if (n < 3) throw ConfigError("contour needs n >= 3, got " + std::to_string(n));
  std::vector<double> style_default(kContourStyleDim, 0.0);
  style_default[0] = style_default[1] = 1.0;
  const auto style = padded(style_in, style_default, style_bounds(FamilyKind::contour2d), "style");
  const auto pose = padded(pose_in, std::vector<double>(kContourPoseDim, 0.0),
                           pose_bounds(FamilyKind::contour2d), "pose");

  Contour contour;
  contour.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * M_PI * i / n;
    double r = 1.0;
    for (int j = 0; j < 3; ++j) {
      const int freq = j + 2;
      r += style[2 + 2 * j] * std::cos(freq * t) + style[3 + 2 * j] * std::sin(freq * t);
    }
    contour.points(i, 0) = style[0] * std::cos(t) * r;
    contour.points(i, 1) = style[1] * std::sin(t) * r;
  }

  const double ymax = contour.points.col(1).cwiseAbs().maxCoeff();
  const double kappa = pose[0] * kMaxBendStretch / ymax;
  const double ct = std::cos(pose[1]), st = std::sin(pose[1]);
  for (int i = 0; i < n; ++i) {
    double x = contour.points(i, 0), y = contour.points(i, 1);
    bend(kappa, x, y);
    contour.points(i, 0) = ct * x - st * y + pose[2];
    contour.points(i, 1) = st * x + ct * y + pose[3];
  }
  validate(contour);
  return contour;
}

Mesh icosphere(int subdiv) {
  if (subdiv < 0 || subdiv > 6) {
    throw ConfigError("icosphere subdivision must be in [0, 6], got " + std::to_string(subdiv));
  }
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int level = 0; level < subdiv; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  Mesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i];
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    mesh.faces.row(f) << faces[f][0], faces[f][1], faces[f][2];
  }
  return mesh;
}

Mesh planar_grid(int nx, int ny, double width, double height) {
  if (nx < 1 || ny < 1) throw ConfigError("planar grid needs nx, ny >= 1");
  Mesh mesh;
  mesh.vertices.resize((nx + 1) * (ny + 1), 3);
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      mesh.vertices.row(j * (nx + 1) + i) << width * i / nx, height * j / ny, 0.0;
    }
  }
  mesh.faces.resize(2 * nx * ny, 3);
  int f = 0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = j * (nx + 1) + i, v10 = v00 + 1, v01 = v00 + nx + 1, v11 = v01 + 1;
      // Alternate the diagonal so the triangulation has no preferred direction.
      if ((i + j) % 2 == 0) {
        mesh.faces.row(f++) << v00, v10, v11;
        mesh.faces.row(f++) << v00, v11, v01;
      } else {
        mesh.faces.row(f++) << v00, v10, v01;
        mesh.faces.row(f++) << v10, v11, v01;
      }
    }
  }
  return mesh;
}

Mesh generate_blob(std::span<const double> style_in, std::span<const double> pose_in, int subdiv) {
  if (subdiv < 0 || subdiv > 4) {
    throw ConfigError("blob subdivision must be in [0, 4], got " + std::to_string(subdiv));
  }
  std::vector<double> style_default(kBlobStyleDim, 0.0);
  style_default[0] = style_default[1] = style_default[2] = 1.0;
  const auto style = padded(style_in, style_default, style_bounds(FamilyKind::blob3d), "style");
  const auto pose = padded(pose_in, std::vector<double>(kBlobPoseDim, 0.0),
                           pose_bounds(FamilyKind::blob3d), "pose");

  const Mesh sphere = icosphere(subdiv);
  const int n = sphere.num_vertices();

  auto build = [&](double jitter, std::uint64_t jitter_seed) {
    Mesh mesh = sphere;
    Rng rng(jitter_seed);
    for (int i = 0; i < n; ++i) {
      const double x = sphere.vertices(i, 0), y = sphere.vertices(i, 1), z = sphere.vertices(i, 2);
      double r = 1.0 + style[3] * 2.0 * x * y + style[4] * 2.0 * y * z + style[5] * 2.0 * x * z +
                 style[6] * x * x * x;
      if (jitter > 0.0) r += jitter * rng.uniform(-1.0, 1.0);
      mesh.vertices.row(i) << style[0] * r * x, style[1] * r * y, style[2] * r * z;
    }
    const double zmax = mesh.vertices.col(2).cwiseAbs().maxCoeff();
    const double kappa = pose[0] * kMaxBendStretch / zmax;
    const Eigen::Matrix3d rot = euler_rotation(pose[1], pose[2], pose[3]);
    const Eigen::RowVector3d shift(pose[4], pose[5], pose[6]);
    for (int i = 0; i < n; ++i) {
      double x = mesh.vertices(i, 0), z = mesh.vertices(i, 2);
      bend(kappa, x, z);
      const Eigen::Vector3d p(x, mesh.vertices(i, 1), z);
      mesh.vertices.row(i) = (rot * p).transpose() + shift;
    }
    return mesh;
  };

  Mesh mesh = build(0.0, 0);
  // Reject degenerate faces, retrying with a tiny deterministic radial jitter.
  const std::uint64_t base_seed = hash_params(style, pose, subdiv);
  for (int attempt = 1; attempt <= 3 && has_degenerate_face(mesh); ++attempt) {
    mesh = build(1e-7 * attempt, derive_seed(base_seed, attempt));
  }
  if (has_degenerate_face(mesh)) {
    throw DataError("blob generation produced degenerate faces for the given parameters");
  }
  validate(mesh);
  return mesh;
}

FamilySpec FamilySpec::defaults(FamilyKind kind) {
  FamilySpec spec;
  spec.kind = kind;
  if (kind == FamilyKind::contour2d) {
    spec.resolution = 256;
    spec.style = {{1.2, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
                  {2.0, 0.9, 0.12, 0.12, 0.12, 0.12, 0.12, 0.12}};
    spec.pose = {{-1.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0}};
  } else {
    spec.resolution = 3;
    spec.style = {{1.2, 0.85, 0.5, 0.0, 0.0, 0.0, 0.0}, {1.6, 1.1, 0.75, 0.2, 0.2, 0.2, 0.2}};
    spec.pose = {{-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
  }
  return spec;
}

FamilySample FamilySpec::draw(std::uint64_t index) const {
  FamilySample sample;
  sample.kind = kind;
  sample.resolution = resolution;
  sample.seed = derive_seed(seed, index);
  Rng rng(sample.seed);
  sample.style.resize(style.lo.size());
  for (std::size_t i = 0; i < style.lo.size(); ++i) sample.style[i] = rng.uniform(style.lo[i], style.hi[i]);
  sample.pose.resize(pose.lo.size());
  for (std::size_t i = 0; i < pose.lo.size(); ++i) sample.pose[i] = rng.uniform(pose.lo[i], pose.hi[i]);
  return sample;
}

Shape generate(const FamilySample& sample) {
  if (sample.kind == FamilyKind::contour2d) {
    return generate_contour(sample.style, sample.pose, sample.resolution);
  }
  return generate_blob(sample.style, sample.pose, sample.resolution);
}

}  // namespace specshape
