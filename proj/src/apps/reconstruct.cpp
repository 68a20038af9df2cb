#include <algorithm>
#include <chrono>

#include "specshape/apps.hpp"
#include "specshape/error.hpp"

namespace specshape {

namespace {

void require_k(const ModelBundle& bundle, const std::vector<double>& eigenvalues) {
  if (static_cast<int>(eigenvalues.size()) != bundle.k) {
    throw DataError("spectrum has k = " + std::to_string(eigenvalues.size()) + " but the model was trained with k = " +
                    std::to_string(bundle.k));
  }
}

}  // namespace

Reconstruction shape_from_spectrum(const ModelBundle& bundle, const std::vector<double>& eigenvalues) {
  require_k(bundle, eigenvalues);
  const auto t0 = std::chrono::steady_clock::now();
  Reconstruction out;
  out.latent = spec_to_latent(bundle, eigenvalues);
  out.shape = decode(bundle, out.latent);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

SuperResolution super_resolve(const ModelBundle& bundle, const Shape& low, FemOrder order, SpectrumCache* cache) {
  if (std::holds_alternative<PointCloud>(low)) {
    throw ConfigError("super-resolution needs a mesh or contour; point clouds have no FEM spectrum");
  }
  SuperResolution out;
  out.spectrum = spectrum_of(low, bundle.k, order, cache);
  out.result = shape_from_spectrum(bundle, out.spectrum.values);
  return out;
}

std::vector<Shape> interpolate_latent(const ModelBundle& bundle, const std::array<std::vector<double>, 4>& corners,
                                      int grid) {
  if (grid < 2) throw ConfigError("interpolation grid must be at least 2 x 2");
  std::array<Eigen::VectorXd, 4> v;
  for (int c = 0; c < 4; ++c) {
    require_k(bundle, corners[c]);
    v[c] = spec_to_latent(bundle, corners[c]);
  }
  std::vector<Shape> out;
  out.reserve(static_cast<std::size_t>(grid) * grid);
  for (int i = 0; i < grid; ++i) {
    const double t = static_cast<double>(i) / (grid - 1);
    for (int j = 0; j < grid; ++j) {
      const double s = static_cast<double>(j) / (grid - 1);
      const Eigen::VectorXd z =
          (1 - s) * (1 - t) * v[0] + s * (1 - t) * v[1] + (1 - s) * t * v[2] + s * t * v[3];
      out.push_back(decode(bundle, z));
    }
  }
  return out;
}

Shape interpolate_spectra(const ModelBundle& bundle, const std::vector<double>& a, const std::vector<double>& b,
                          double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("interpolation parameter t must lie in [0, 1]");
  require_k(bundle, a);
  require_k(bundle, b);
  std::vector<double> blend(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) blend[i] = (1 - t) * a[i] + t * b[i];
  return shape_from_spectrum(bundle, blend).shape;
}

std::vector<double> band_modify(const std::vector<double>& eigenvalues, int lo, int hi, double factor) {
  const int k = static_cast<int>(eigenvalues.size());
  if (!(factor > 0.0)) throw ConfigError("band factor must be positive");
  if (lo < 0 || hi < lo || hi >= k) {
    throw ConfigError("band [" + std::to_string(lo) + ", " + std::to_string(hi) + "] is outside 0.." +
                      std::to_string(k - 1));
  }
  std::vector<double> out = eigenvalues;
  for (int i = lo; i <= hi; ++i) out[i] *= factor;
  std::sort(out.begin(), out.end());
  if (!out.empty()) out[0] = 0.0;
  return out;
}

std::vector<double> estimate_spectrum(const ModelBundle& bundle, const PointCloud& cloud) {
  if (bundle.input != InputKind::pointcloud) throw ConfigError("spectrum estimation needs a point-cloud model");
  if (cloud.size() == 0) throw DataError("cannot estimate the spectrum of an empty point cloud");
  return latent_to_spec(bundle, encode(bundle, cloud));
}

// ---------------------------------------------------------------------------

SpectrumIndex::SpectrumIndex(const Eigen::MatrixXd& spectra, double scale) : rows_(spectra / scale), scale_(scale) {
  if (spectra.rows() == 0) throw DataError("nearest-neighbour index needs at least one spectrum");
  if (!(scale > 0.0)) throw ConfigError("spectrum index scale must be positive");
}

SpectrumIndex::Hit SpectrumIndex::nearest(const std::vector<double>& eigenvalues) const {
  if (static_cast<Eigen::Index>(eigenvalues.size()) != rows_.cols()) {
    throw DataError("query spectrum has k = " + std::to_string(eigenvalues.size()) + " but the index has k = " +
                    std::to_string(rows_.cols()));
  }
  const Eigen::RowVectorXd q = Eigen::Map<const Eigen::RowVectorXd>(eigenvalues.data(), rows_.cols()) / scale_;
  Hit best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < rows_.rows(); ++r) {
    const double d2 = (rows_.row(r) - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.index = static_cast<int>(r);
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

LatentIndex::LatentIndex(Eigen::MatrixXd latents, Eigen::MatrixXd spectra)
    : latents_(std::move(latents)), spectra_(std::move(spectra)) {
  if (latents_.rows() == 0 || latents_.rows() != spectra_.rows()) {
    throw DataError("latent index needs one spectrum per latent and at least one entry");
  }
}

std::vector<double> LatentIndex::spectrum_of_nearest(const Eigen::VectorXd& latent) const {
  if (latent.size() != latents_.cols()) throw DataError("latent length does not match the index");
  Eigen::Index best = 0;
  (latents_.rowwise() - latent.transpose()).rowwise().squaredNorm().minCoeff(&best);
  std::vector<double> out(spectra_.cols());
  for (Eigen::Index i = 0; i < spectra_.cols(); ++i) out[i] = spectra_(best, i);
  return out;
}

}  // namespace specshape
