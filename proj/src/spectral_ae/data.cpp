#include "specshape/error.hpp"
#include "specshape/random.hpp"
#include "specshape/spectral_ae.hpp"

namespace specshape {

Eigen::RowVectorXd flatten(const Shape& shape) {
  if (const auto* m = std::get_if<Mesh>(&shape)) {
    return Eigen::Map<const Eigen::RowVectorXd>(m->vertices.data(), m->vertices.size());
  }
  if (const auto* c = std::get_if<Contour>(&shape)) {
    return Eigen::Map<const Eigen::RowVectorXd>(c->points.data(), c->points.size());
  }
  const auto& p = std::get<PointCloud>(shape).points;
  return Eigen::Map<const Eigen::RowVectorXd>(p.data(), p.size());
}

Shape unflatten(const Eigen::RowVectorXd& row, int dim, const Faces& faces) {
  const Eigen::Index n = row.size() / dim;
  if (dim == 2) {
    Contour c;
    c.points = Eigen::Map<const Points2>(row.data(), n, 2);
    return c;
  }
  if (faces.rows() == 0) {
    PointCloud cloud;
    cloud.points = Eigen::Map<const Points3>(row.data(), n, 3);
    return cloud;
  }
  Mesh m;
  m.vertices = Eigen::Map<const Points3>(row.data(), n, 3);
  m.faces = faces;
  return m;
}

Dataset Dataset::slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > size()) {
    throw ConfigError("dataset slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                      ") is outside the " + std::to_string(size()) + " shapes");
  }
  Dataset out;
  out.input = input;
  out.n = n;
  out.dim = dim;
  out.faces = faces;
  out.spectra = spectra.middleRows(first, count);
  if (coords.rows() > 0) out.coords = coords.middleRows(first, count);
  if (!clouds.empty()) out.clouds.assign(clouds.begin() + first, clouds.begin() + first + count);
  if (!samples.empty()) out.samples.assign(samples.begin() + first, samples.begin() + first + count);
  return out;
}

Dataset Dataset::truncated(int new_k) const {
  if (new_k < 1 || new_k > k()) {
    throw ConfigError("cannot truncate spectra of length " + std::to_string(k()) + " to " + std::to_string(new_k));
  }
  Dataset out = *this;
  out.spectra = spectra.leftCols(new_k);
  return out;
}

Dataset make_dataset(const DatasetOptions& opt, SpectrumCache* cache) {
  if (opt.count < 1) throw ConfigError("dataset count must be positive");
  if (opt.input == InputKind::pointcloud && opt.family.kind != FamilyKind::blob3d) {
    throw ConfigError("point-cloud datasets need a 3D family (blob3d)");
  }
  Dataset data;
  data.input = opt.input;
  data.dim = opt.family.kind == FamilyKind::contour2d ? 2 : 3;

  std::vector<Shape> shapes;
  shapes.reserve(opt.count);
  for (int i = 0; i < opt.count; ++i) {
    data.samples.push_back(opt.family.draw(static_cast<std::uint64_t>(opt.first_index + i)));
    shapes.push_back(generate(data.samples.back()));
  }
  const auto spectra = kernels::omp::spectra(shapes, opt.k, opt.order, cache);
  data.spectra.resize(opt.count, opt.k);
  for (int i = 0; i < opt.count; ++i) {
    for (int j = 0; j < opt.k; ++j) data.spectra(i, j) = spectra[i].values[j];
  }

  if (const auto* m = std::get_if<Mesh>(&shapes.front())) {
    data.faces = m->faces;
    data.n = m->num_vertices();
  } else {
    data.n = std::get<Contour>(shapes.front()).size();
  }
  if (opt.input == InputKind::dense_template) {
    data.coords.resize(opt.count, static_cast<Eigen::Index>(data.n) * data.dim);
    for (int i = 0; i < opt.count; ++i) data.coords.row(i) = flatten(shapes[i]);
  } else {
    for (int i = 0; i < opt.count; ++i) {
      const auto seed = derive_seed(data.samples[i].seed, 0xc10d);
      data.clouds.push_back(sample_pointcloud(std::get<Mesh>(shapes[i]), opt.cloud_fraction, seed, opt.cloud_mode).points);
    }
  }
  return data;
}

}  // namespace specshape
