#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <Eigen/Geometry>

#include "doctest.h"
#include "specshape/error.hpp"
#include "specshape/geometry.hpp"
#include "specshape/random.hpp"

using namespace specshape;

namespace {

// Adaptive Simpson quadrature, used as an independent arc-length oracle.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps,
                        double whole, double fa, double fm, double fb, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, eps / 2, left, fa, flm, fm, depth - 1) +
         adaptive_simpson(f, m, b, eps / 2, right, fm, frm, fb, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return adaptive_simpson(f, a, b, 1e-12, (b - a) / 6.0 * (fa + 4.0 * fm + fb), fa, fm, fb, 40);
}

// Brute-force point-to-triangle distance (projection + edge clamping).
double point_triangle_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                               const Eigen::Vector3d& c) {
  const Eigen::Vector3d n = (b - a).cross(c - a);
  const double nn = n.squaredNorm();
  const Eigen::Vector3d proj = p - n * (n.dot(p - a) / nn);
  // Barycentric coordinates of the projection.
  const double w0 = n.dot((c - b).cross(proj - b)) / nn;
  const double w1 = n.dot((a - c).cross(proj - c)) / nn;
  const double w2 = 1.0 - w0 - w1;
  if (w0 >= 0 && w1 >= 0 && w2 >= 0) return (p - proj).norm();
  auto seg = [&](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
    const double t = std::clamp((p - u).dot(v - u) / (v - u).squaredNorm(), 0.0, 1.0);
    return (p - (u + t * (v - u))).norm();
  };
  return std::min({seg(a, b), seg(b, c), seg(c, a)});
}

double distance_to_mesh(const Eigen::Vector3d& p, const Mesh& mesh) {
  double best = std::numeric_limits<double>::infinity();
  for (int f = 0; f < mesh.num_faces(); ++f) {
    best = std::min(best, point_triangle_distance(p, mesh.vertices.row(mesh.faces(f, 0)).transpose(),
                                                  mesh.vertices.row(mesh.faces(f, 1)).transpose(),
                                                  mesh.vertices.row(mesh.faces(f, 2)).transpose()));
  }
  return best;
}

double signed_volume(const Mesh& mesh) {
  double vol = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
    vol += a.dot(b.cross(c)) / 6.0;
  }
  return vol;
}

std::vector<double> random_in(const ParamBox& box, Rng& rng) {
  std::vector<double> v(box.lo.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(box.lo[i], box.hi[i]);
  return v;
}

}  // namespace

TEST_CASE("icosphere counts and orientation") {
  for (int s = 0; s <= 3; ++s) {
    const Mesh m = icosphere(s);
    const int p = 1 << (2 * s);
    CHECK(m.num_vertices() == 10 * p + 2);
    CHECK(m.num_faces() == 20 * p);
    CHECK(signed_volume(m) > 0.0);
    CHECK_NOTHROW(validate(m));
    for (int i = 0; i < m.num_vertices(); ++i) CHECK(m.vertices.row(i).norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("blob with identity style is the unit icosphere") {
  const Mesh m = generate_blob(std::vector<double>{1, 1, 1, 0, 0, 0, 0}, {}, 2);
  CHECK(m.num_vertices() == 162);
  CHECK(m.num_faces() == 320);
  CHECK((m.vertices - icosphere(2).vertices).cwiseAbs().maxCoeff() == 0.0);
  const Mesh ico = generate_blob({}, {}, 0);
  CHECK(ico.num_vertices() == 12);
  CHECK(ico.num_faces() == 20);
}

TEST_CASE("generators are rigidly invariant in edge lengths") {
  const std::vector<double> style = {1.3, 0.9, 0.7, 0.1, 0.05, 0.1, 0.12};
  const Mesh base = generate_blob(style, std::vector<double>{0.5}, 2);
  const Mesh moved = generate_blob(style, std::vector<double>{0.5, 0.3, -1.1, 2.0, 1.0, -2.0, 0.5}, 2);
  const auto la = edge_lengths(base), lb = edge_lengths(moved);
  REQUIRE(la.size() == lb.size());
  for (std::size_t e = 0; e < la.size(); ++e) CHECK(std::abs(la[e] - lb[e]) < 1e-12);

  const std::vector<double> cstyle = {1.5, 0.7, 0.1, -0.05, 0.02, 0.0, 0.03, 0.01};
  const Contour c0 = generate_contour(cstyle, std::vector<double>{0.3, 0.0}, 128);
  const Contour c1 = generate_contour(cstyle, std::vector<double>{0.3, 1.234}, 128);
  const auto e0 = edge_lengths(c0), e1 = edge_lengths(c1);
  for (std::size_t i = 0; i < e0.size(); ++i) CHECK(std::abs(e0[i] - e1[i]) < 1e-12);
}

TEST_CASE("contour perimeters") {
  const Contour circle = generate_contour(std::vector<double>{1, 1}, {}, 256);
  CHECK(std::abs(perimeter(circle) - 2.0 * M_PI) < 1e-3);

  // Arc-length oracle for the a = 2, b = 1 ellipse.
  const double exact = integrate(
      [](double t) { return std::sqrt(4.0 * std::sin(t) * std::sin(t) + std::cos(t) * std::cos(t)); }, 0.0,
      2.0 * M_PI);
  CHECK(exact == doctest::Approx(9.6884482205).epsilon(1e-9));
  const Contour ellipse = generate_contour(std::vector<double>{2, 1}, {}, 512);
  CHECK(std::abs(perimeter(ellipse) - exact) < 1e-2);
}

TEST_CASE("generators are deterministic and reject out-of-box parameters") {
  const std::vector<double> style = {1.4, 1.0, 0.6, 0.1, 0.0, 0.2, 0.05};
  const Mesh a = generate_blob(style, std::vector<double>{-0.7}, 3);
  const Mesh b = generate_blob(style, std::vector<double>{-0.7}, 3);
  CHECK(std::memcmp(a.vertices.data(), b.vertices.data(), sizeof(double) * a.vertices.size()) == 0);

  CHECK_THROWS_AS(generate_blob(std::vector<double>{5.0}, {}, 2), ConfigError);
  CHECK_THROWS_AS(generate_blob({}, {}, 5), ConfigError);
  CHECK_THROWS_AS(generate_contour({}, {}, 2), ConfigError);
  CHECK_THROWS_AS(generate_contour(std::vector<double>{1, 1, 0.5}, {}, 64), ConfigError);
  CHECK_THROWS_AS(generate_contour({}, std::vector<double>{1.5}, 64), ConfigError);
}

TEST_CASE("pose bends are near-isometric (< 3% edge stretch)") {
  Rng rng(11);
  for (FamilyKind kind : {FamilyKind::blob3d, FamilyKind::contour2d}) {
    const auto spec = FamilySpec::defaults(kind);
    for (int trial = 0; trial < 20; ++trial) {
      const auto style = random_in(spec.style, rng);
      const double bend = rng.uniform(-1.0, 1.0);
      std::vector<double> flat, bent;
      if (kind == FamilyKind::blob3d) {
        flat = edge_lengths(generate_blob(style, {}, 2));
        bent = edge_lengths(generate_blob(style, std::vector<double>{bend}, 2));
      } else {
        flat = edge_lengths(generate_contour(style, {}, 128));
        bent = edge_lengths(generate_contour(style, std::vector<double>{bend}, 128));
      }
      double worst = 0.0;
      for (std::size_t e = 0; e < flat.size(); ++e) worst = std::max(worst, std::abs(bent[e] / flat[e] - 1.0));
      CHECK(worst < 0.03);
      if (std::abs(bend) > 0.2) CHECK(worst > 0.0);
    }
  }
}

TEST_CASE("equal style with different pose differs in embedding") {
  const std::vector<double> style = {1.4, 1.0, 0.6, 0.1, 0.0, 0.2, 0.05};
  const Mesh a = generate_blob(style, std::vector<double>{-1.0}, 2);
  const Mesh b = generate_blob(style, std::vector<double>{1.0}, 2);
  CHECK((a.vertices - b.vertices).norm() > 1e-3);
  CHECK(a.faces == b.faces);
}

TEST_CASE("family draws are reproducible and inside the box") {
  for (FamilyKind kind : {FamilyKind::blob3d, FamilyKind::contour2d}) {
    auto spec = FamilySpec::defaults(kind);
    spec.seed = 77;
    for (int i = 0; i < 10; ++i) {
      const auto s1 = spec.draw(i);
      const auto s2 = spec.draw(i);
      CHECK(s1.style == s2.style);
      CHECK(s1.pose == s2.pose);
      CHECK(s1.seed == s2.seed);
      for (std::size_t j = 0; j < s1.style.size(); ++j) {
        CHECK(s1.style[j] >= spec.style.lo[j]);
        CHECK(s1.style[j] <= spec.style.hi[j]);
      }
      CHECK_NOTHROW(generate(s1));
    }
    CHECK(spec.draw(0).style != spec.draw(1).style);
  }
}

TEST_CASE("validation catches broken meshes") {
  Mesh m = icosphere(0);
  CHECK_NOTHROW(validate(m));

  Mesh bad_index = m;
  bad_index.faces(3, 1) = 12;
  CHECK_THROWS_WITH_AS(validate(bad_index), doctest::Contains("face 3"), DataError);

  Mesh degenerate = m;
  degenerate.vertices.row(degenerate.faces(0, 1)) = degenerate.vertices.row(degenerate.faces(0, 0));
  CHECK_THROWS_AS(validate(degenerate), DataError);

  Mesh flipped = m;
  std::swap(flipped.faces(0, 0), flipped.faces(0, 1));
  CHECK_THROWS_AS(validate(flipped), DataError);

  // Two disjoint icosahedra.
  Mesh twice;
  twice.vertices.resize(24, 3);
  twice.vertices << m.vertices, (m.vertices.array() + 5.0).matrix();
  twice.faces.resize(40, 3);
  twice.faces << m.faces, (m.faces.array() + 12).matrix();
  CHECK_THROWS_WITH_AS(validate(twice), doctest::Contains("not connected"), DataError);
  CHECK(connected_components(twice) == 2);
}

TEST_CASE("point sampling") {
  const Mesh sphere = icosphere(2);
  const PointCloud verts = sample_pointcloud(sphere, 1.0, 3, SamplingMode::vertices);
  CHECK(verts.size() == 162);
  for (int i = 0; i < verts.size(); ++i) {
    bool found = false;
    for (int v = 0; v < sphere.num_vertices() && !found; ++v) {
      found = (sphere.vertices.row(v) - verts.points.row(i)).norm() == 0.0;
    }
    CHECK(found);
  }

  const Mesh grid = planar_grid(39, 24, 2.0, 1.0);
  REQUIRE(grid.num_vertices() == 1000);
  const Mesh bumpy = [&] {
    Mesh g = grid;
    for (int i = 0; i < g.num_vertices(); ++i) g.vertices(i, 2) = 0.1 * std::sin(3.0 * g.vertices(i, 0));
    return g;
  }();
  for (SamplingMode mode : {SamplingMode::uniform, SamplingMode::nonuniform}) {
    const PointCloud cloud = sample_pointcloud(bumpy, 0.2, 5, mode);
    CHECK(cloud.size() == 200);
    for (int i = 0; i < cloud.size(); i += 7) {
      CHECK(distance_to_mesh(cloud.points.row(i).transpose(), bumpy) < 1e-9);
    }
    const PointCloud again = sample_pointcloud(bumpy, 0.2, 5, mode);
    CHECK(cloud.points == again.points);
  }
  CHECK(sample_pointcloud(bumpy, 0.2, 5, SamplingMode::uniform).points !=
        sample_pointcloud(bumpy, 0.2, 5, SamplingMode::nonuniform).points);
  CHECK_THROWS_AS(sample_pointcloud(sphere, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(sample_pointcloud(sphere, 1.5, 1), ConfigError);
}

TEST_CASE("nonuniform sampling is denser on one side") {
  const Mesh sphere = icosphere(3);
  const PointCloud uni = sample_pointcloud(sphere, 1.0, 9, SamplingMode::uniform);
  const PointCloud non = sample_pointcloud(sphere, 1.0, 9, SamplingMode::nonuniform);
  // The density gradient pulls the cloud centroid off the origin.
  CHECK(uni.points.colwise().mean().norm() < 0.1);
  CHECK(non.points.colwise().mean().norm() > 0.2);
}

TEST_CASE("mesh file round trips") {
  const Mesh ico = icosphere(0);
  for (const char* ext : {".off", ".obj"}) {
    const auto path = std::filesystem::temp_directory_path() / (std::string("specshape_rt") + ext);
    save_shape(ico, path);
    const Shape loaded = load_shape(path);
    REQUIRE(std::holds_alternative<Mesh>(loaded));
    const Mesh& m = std::get<Mesh>(loaded);
    CHECK(m.faces == ico.faces);
    CHECK((m.vertices - ico.vertices).cwiseAbs().maxCoeff() < 1e-6);
    std::filesystem::remove(path);
  }
}

TEST_CASE("point cloud and contour files") {
  const auto dir = std::filesystem::temp_directory_path();
  PointCloud cloud{icosphere(1).vertices};
  save_shape(cloud, dir / "specshape_rt.xyz");
  const Shape xyz = load_shape(dir / "specshape_rt.xyz");
  REQUIRE(std::holds_alternative<PointCloud>(xyz));
  CHECK((std::get<PointCloud>(xyz).points - cloud.points).cwiseAbs().maxCoeff() < 1e-6);

  save_shape(cloud, dir / "specshape_cloud.obj");
  CHECK(std::holds_alternative<PointCloud>(load_shape(dir / "specshape_cloud.obj")));

  const Contour contour = generate_contour(std::vector<double>{1.5, 0.8}, {}, 40);
  save_shape(contour, dir / "specshape_rt.json");
  const Shape c = load_shape(dir / "specshape_rt.json");
  REQUIRE(std::holds_alternative<Contour>(c));
  CHECK((std::get<Contour>(c).points - contour.points).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(load_shape(dir / "shape.ply"), ConfigError);
  CHECK_THROWS_AS(save_shape(contour, dir / "contour.off"), ConfigError);
}

TEST_CASE("OFF parser reports the offending face") {
  std::istringstream in("OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 1 2 4\n");
  try {
    read_off(in, "bad.off");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("face 1") != std::string::npos);
    CHECK(e.line == 8);
  }
  std::istringstream quad("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
  CHECK_THROWS_AS(read_off(quad, "quad.off"), ParseError);
  std::istringstream garbage("OFF\n3 1 0\n0 0 zero\n");
  CHECK_THROWS_WITH_AS(read_off(garbage, "g.off"), doctest::Contains("g.off:3"), ParseError);
}

TEST_CASE("OBJ parser ignores unknown records with a warning") {
  std::istringstream in(
      "# comment\nmtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2/2/1 3/3/1\nf -3 -2 -1\n");
  std::vector<std::string> warnings;
  const Shape s = read_obj(in, "w.obj", [&](const std::string& w) { warnings.push_back(w); });
  REQUIRE(std::holds_alternative<Mesh>(s));
  CHECK(std::get<Mesh>(s).num_faces() == 2);
  CHECK(std::get<Mesh>(s).faces.row(1) == Eigen::RowVector3i(0, 1, 2));
  CHECK(warnings.size() == 3);
}

TEST_CASE("decimation by one collapse") {
  const Mesh m = icosphere(2);
  const Mesh d = decimate(m, m.num_vertices() - 1);
  CHECK(d.num_vertices() == m.num_vertices() - 1);
  CHECK(d.num_faces() == m.num_faces() - 2);
  CHECK_NOTHROW(validate(d));
  CHECK_THROWS_AS(decimate(m, 3), ConfigError);
  CHECK_THROWS_AS(decimate(m, m.num_vertices()), ConfigError);
}

TEST_CASE("decimated sphere stays close to the sphere") {
  const Mesh m = icosphere(3);
  const Mesh d = decimate(m, 200);
  CHECK(std::abs(d.num_vertices() - 200) <= 10);
  CHECK_NOTHROW(validate(d));
  CHECK(d.num_faces() == 2 * d.num_vertices() - 4);  // genus 0

  // Hausdorff distance by brute force: decimated vertices to the sphere, and
  // dense sphere samples to the decimated surface.
  double hausdorff = 0.0;
  for (int i = 0; i < d.num_vertices(); ++i) hausdorff = std::max(hausdorff, std::abs(d.vertices.row(i).norm() - 1.0));
  for (int f = 0; f < d.num_faces(); ++f) {
    const Eigen::Vector3d c = (d.vertices.row(d.faces(f, 0)) + d.vertices.row(d.faces(f, 1)) +
                               d.vertices.row(d.faces(f, 2))).transpose() / 3.0;
    hausdorff = std::max(hausdorff, 1.0 - c.norm());
  }
  const Mesh dense = icosphere(4);
  for (int i = 0; i < dense.num_vertices(); i += 3) {
    hausdorff = std::max(hausdorff, distance_to_mesh(dense.vertices.row(i).transpose(), d));
  }
  CHECK(hausdorff < 0.05);

  // Deterministic.
  const Mesh again = decimate(m, 200);
  CHECK(again.faces == d.faces);
  CHECK(again.vertices == d.vertices);
}

TEST_CASE("coarse decimation keeps the sphere's area") {
  // Midpoint collapses cut chords and lose about a tenth of the area at 64
  // vertices; quadric placement stays near the tangent planes.
  const Mesh d = decimate(icosphere(3), 64);
  CHECK(surface_area(d) == doctest::Approx(4.0 * M_PI).epsilon(0.03));
}
