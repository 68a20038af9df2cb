#include <algorithm>
#include <cmath>
#include <numeric>

#include "specshape/error.hpp"
#include "specshape/geometry.hpp"
#include "specshape/random.hpp"

namespace specshape {

namespace {

Eigen::RowVector3d random_direction(Rng& rng) {
  Eigen::RowVector3d d;
  do {
    d << rng.normal(), rng.normal(), rng.normal();
  } while (d.norm() < 1e-6);
  return d.normalized();
}

}  // namespace

PointCloud sample_pointcloud(const Mesh& mesh, double fraction, std::uint64_t seed, SamplingMode mode) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("sampling fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const int n = mesh.num_vertices();
  const int count = static_cast<int>(std::ceil(fraction * n - 1e-9));
  if (count < 1 || mesh.num_faces() < 1) throw DataError("point sampling produced an empty cloud");

  Rng rng(seed);
  PointCloud cloud;
  cloud.points.resize(count, 3);

  if (mode == SamplingMode::vertices) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int i = 0; i < count; ++i) cloud.points.row(i) = mesh.vertices.row(order[i]);
    return cloud;
  }

  const int m = mesh.num_faces();
  std::vector<double> cumulative(m);
  const Eigen::RowVector3d center = mesh.vertices.colwise().mean();
  const double extent = std::max(diameter(mesh.vertices), 1e-12);
  Eigen::RowVector3d direction = Eigen::RowVector3d::Zero();
  if (mode == SamplingMode::nonuniform) direction = random_direction(rng);

  double total = 0.0;
  for (int f = 0; f < m; ++f) {
    double weight = triangle_area(mesh, f);
    if (mode == SamplingMode::nonuniform) {
      const Eigen::RowVector3d centroid =
          (mesh.vertices.row(mesh.faces(f, 0)) + mesh.vertices.row(mesh.faces(f, 1)) +
           mesh.vertices.row(mesh.faces(f, 2))) / 3.0;
      // Density varies by a factor of e^3 (about 20) across the shape.
      weight *= std::exp(3.0 * direction.dot(centroid - center) / extent);
    }
    total += weight;
    cumulative[f] = total;
  }

  for (int i = 0; i < count; ++i) {
    const double u = rng.uniform() * total;
    int f = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    f = std::min(f, m - 1);
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const double w0 = 1.0 - r1, w1 = r1 * (1.0 - r2), w2 = r1 * r2;
    cloud.points.row(i) = w0 * mesh.vertices.row(mesh.faces(f, 0)) +
                          w1 * mesh.vertices.row(mesh.faces(f, 1)) +
                          w2 * mesh.vertices.row(mesh.faces(f, 2));
  }
  return cloud;
}

}  // namespace specshape
