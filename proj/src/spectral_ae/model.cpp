#include <algorithm>
#include <cmath>

#include "specshape/error.hpp"
#include "specshape/random.hpp"
#include "specshape/spectral_ae.hpp"

namespace specshape {

namespace {

nn::NetSpec coupling_spec(int k) {
  return nn::mlp({k, 80, 160, 320, 640, 320, 160, 80, k}, nn::LayerKind::selu, true);
}

nn::NetSpec decoder_spec(int k, int outputs) { return nn::mlp({k, 200, outputs}, nn::LayerKind::tanh, false); }

void require_positive(int value, const char* what) {
  if (value <= 0) throw ConfigError(std::string(what) + " must be positive (got " + std::to_string(value) + ")");
}

nn::Matrix<float> normalized_row(const ModelBundle& b, const Eigen::RowVectorXd& raw) {
  nn::Matrix<float> out(1, raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    out(0, i) = static_cast<float>((raw[i] - b.norm.center[i % b.dim]) / b.norm.coord_scale);
  }
  return out;
}

}  // namespace

std::string to_string(InputKind kind) { return kind == InputKind::pointcloud ? "pointcloud" : "dense_template"; }

InputKind input_kind_from_string(const std::string& s) {
  if (s == "pointcloud") return InputKind::pointcloud;
  if (s == "dense_template" || s == "dense") return InputKind::dense_template;
  throw ConfigError("unknown input kind '" + s + "' (expected dense_template or pointcloud)");
}

ModelBundle build_dense_model(int n, int k, int dim, std::uint64_t seed) {
  require_positive(n, "template size n");
  require_positive(k, "bandwidth k");
  if (dim != 2 && dim != 3) throw ConfigError("dimension must be 2 or 3");
  ModelBundle b;
  b.input = InputKind::dense_template;
  b.n = n;
  b.dim = dim;
  b.k = k;
  b.latent = k;
  b.norm.center = Eigen::RowVectorXd::Zero(dim);
  b.nets.encoder = nn::Net<float>(nn::mlp({n * dim, 300, 200, k}, nn::LayerKind::tanh, false, true),
                                  derive_seed(seed, 1));
  b.nets.decoder = nn::Net<float>(decoder_spec(k, n * dim), derive_seed(seed, 2));
  b.nets.pi = nn::Net<float>(coupling_spec(k), derive_seed(seed, 3));
  b.nets.rho = nn::Net<float>(coupling_spec(k), derive_seed(seed, 4));
  return b;
}

ModelBundle build_pointcloud_model(int k, int n_template, std::uint64_t seed) {
  require_positive(k, "bandwidth k");
  require_positive(n_template, "template size n");
  using nn::LayerKind;
  ModelBundle b;
  b.input = InputKind::pointcloud;
  b.n = n_template;
  b.dim = 3;
  b.k = k;
  b.latent = k;
  b.norm.center = Eigen::RowVectorXd::Zero(3);
  nn::NetSpec enc{{{LayerKind::shared_dense, 3, 64},
                   {LayerKind::batchnorm, 64, 64},
                   {LayerKind::shared_dense, 64, 128},
                   {LayerKind::batchnorm, 128, 128},
                   {LayerKind::maxpool_points, 128, 128},
                   {LayerKind::dense, 128, 64},
                   {LayerKind::tanh, 64, 64},
                   {LayerKind::dense, 64, k},
                   {LayerKind::tanh, k, k}}};
  b.nets.encoder = nn::Net<float>(enc, derive_seed(seed, 1));
  b.nets.decoder = nn::Net<float>(decoder_spec(k, n_template * 3), derive_seed(seed, 2));
  b.nets.pi = nn::Net<float>(coupling_spec(k), derive_seed(seed, 3));
  b.nets.rho = nn::Net<float>(coupling_spec(k), derive_seed(seed, 4));
  return b;
}

Normalization fit_normalization(const Dataset& data) {
  if (data.size() == 0) throw DataError("cannot fit normalization on an empty dataset");
  Normalization norm;
  norm.center = Eigen::RowVectorXd::Zero(data.dim);
  double count = 0.0;
  auto visit = [&](auto&& fn) {
    if (data.input == InputKind::pointcloud) {
      for (const auto& cloud : data.clouds) {
        for (Eigen::Index r = 0; r < cloud.rows(); ++r) fn(Eigen::RowVectorXd(cloud.row(r)));
      }
    } else {
      for (Eigen::Index s = 0; s < data.coords.rows(); ++s) {
        for (int v = 0; v < data.n; ++v) fn(Eigen::RowVectorXd(data.coords.row(s).segment(v * data.dim, data.dim)));
      }
    }
  };
  visit([&](const Eigen::RowVectorXd& p) {
    norm.center += p;
    count += 1.0;
  });
  norm.center /= count;
  double sq = 0.0;
  visit([&](const Eigen::RowVectorXd& p) { sq += (p - norm.center).squaredNorm(); });
  norm.coord_scale = std::sqrt(sq / count);
  if (!(norm.coord_scale > 0.0)) throw DataError("dataset coordinates have zero spread");

  std::vector<double> top(data.spectra.rows());
  for (Eigen::Index s = 0; s < data.spectra.rows(); ++s) top[s] = data.spectra(s, data.spectra.cols() - 1);
  std::nth_element(top.begin(), top.begin() + top.size() / 2, top.end());
  norm.eig_scale = top[top.size() / 2];
  if (!(norm.eig_scale > 0.0)) throw DataError("median of the largest eigenvalue is not positive");
  return norm;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd encode(const ModelBundle& b, const Shape& shape) {
  nn::Tensor<float> x;
  if (b.input == InputKind::pointcloud) {
    const Points3* pts = nullptr;
    if (const auto* c = std::get_if<PointCloud>(&shape)) pts = &c->points;
    if (const auto* m = std::get_if<Mesh>(&shape)) pts = &m->vertices;
    if (!pts) throw ConfigError("point-cloud model needs a point cloud or mesh");
    if (pts->rows() == 0) throw DataError("cannot encode an empty point cloud");
    x.values.resize(pts->rows(), 3);
    for (Eigen::Index r = 0; r < pts->rows(); ++r) {
      for (int c = 0; c < 3; ++c) x.values(r, c) = static_cast<float>(((*pts)(r, c) - b.norm.center[c]) / b.norm.coord_scale);
    }
    x.offsets = {0, static_cast<int>(pts->rows())};
  } else {
    const Eigen::RowVectorXd row = flatten(shape);
    if (row.size() != static_cast<Eigen::Index>(b.n) * b.dim) {
      throw DataError("shape has " + std::to_string(row.size() / std::max(b.dim, 1)) + " points but the model template has " +
                      std::to_string(b.n));
    }
    x.values = normalized_row(b, row);
  }
  return b.nets.encoder.forward(x, nn::Mode::eval).values.row(0).transpose().cast<double>();
}

Eigen::RowVectorXd decode_flat(const ModelBundle& b, const Eigen::VectorXd& latent) {
  if (latent.size() != b.latent) {
    throw DataError("latent has length " + std::to_string(latent.size()) + " but the model expects " +
                    std::to_string(b.latent));
  }
  const nn::Matrix<float> z = latent.transpose().cast<float>();
  const nn::Matrix<float> out = b.nets.decoder.forward(z, nn::Mode::eval);
  Eigen::RowVectorXd raw(out.cols());
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    raw[i] = static_cast<double>(out(0, i)) * b.norm.coord_scale + b.norm.center[i % b.dim];
  }
  if (!raw.allFinite()) throw NumericalError("decoder produced non-finite coordinates (input far outside the training range?)");
  return raw;
}

Shape decode(const ModelBundle& b, const Eigen::VectorXd& latent) {
  const Eigen::RowVectorXd raw = decode_flat(b, latent);
  if (b.input == InputKind::pointcloud) {
    PointCloud cloud;
    cloud.points = Eigen::Map<const Points3>(raw.data(), b.n, 3);
    return cloud;
  }
  return unflatten(raw, b.dim, b.template_faces);
}

Eigen::VectorXd spec_to_latent(const ModelBundle& b, const std::vector<double>& eigenvalues) {
  if (static_cast<int>(eigenvalues.size()) != b.k) {
    throw DataError("spectrum has k = " + std::to_string(eigenvalues.size()) + " but the model was trained with k = " +
                    std::to_string(b.k));
  }
  nn::Matrix<float> x(1, b.k);
  for (int i = 0; i < b.k; ++i) x(0, i) = static_cast<float>(eigenvalues[i] / b.norm.eig_scale);
  return b.nets.pi.forward(x, nn::Mode::eval).row(0).transpose().cast<double>();
}

std::vector<double> latent_to_spec(const ModelBundle& b, const Eigen::VectorXd& latent) {
  if (latent.size() != b.latent) {
    throw DataError("latent has length " + std::to_string(latent.size()) + " but the model expects " +
                    std::to_string(b.latent));
  }
  const nn::Matrix<float> out = b.nets.rho.forward(nn::Matrix<float>(latent.transpose().cast<float>()), nn::Mode::eval);
  std::vector<double> values(b.k);
  for (int i = 0; i < b.k; ++i) values[i] = static_cast<double>(out(0, i)) * b.norm.eig_scale;
  return values;
}

// ---------------------------------------------------------------------------

void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["kind"] = "specshape-model";
  meta["input"] = to_string(b.input);
  meta["n"] = b.n;
  meta["dim"] = b.dim;
  meta["k"] = b.k;
  meta["latent"] = b.latent;
  meta["alpha"] = b.alpha;
  meta["normalization"] = {{"center", std::vector<double>(b.norm.center.data(), b.norm.center.data() + b.norm.center.size())},
                           {"coord_scale", b.norm.coord_scale},
                           {"eig_scale", b.norm.eig_scale}};
  nlohmann::json faces = nlohmann::json::array();
  for (Eigen::Index f = 0; f < b.template_faces.rows(); ++f) {
    faces.push_back({b.template_faces(f, 0), b.template_faces(f, 1), b.template_faces(f, 2)});
  }
  meta["template_faces"] = std::move(faces);
  meta["batchnorm"] = {{"momentum", nn::kBatchnormMomentum}, {"eps", nn::kBatchnormEps}, {"running_var", "biased"}};
  meta["info"] = b.info;
  nn::save_checkpoint(path, meta,
                      {{"encoder", &b.nets.encoder}, {"decoder", &b.nets.decoder}, {"pi", &b.nets.pi}, {"rho", &b.nets.rho}});
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  nn::Checkpoint ck = nn::load_checkpoint(path);
  const auto& m = ck.metadata;
  if (m.value("kind", "") != "specshape-model") throw DataError(path.string() + " is not a specshape model bundle");
  ModelBundle b;
  try {
    b.input = input_kind_from_string(m.at("input").get<std::string>());
    b.n = m.at("n").get<int>();
    b.dim = m.at("dim").get<int>();
    b.k = m.at("k").get<int>();
    b.latent = m.at("latent").get<int>();
    b.alpha = m.at("alpha").get<double>();
    const auto center = m.at("normalization").at("center").get<std::vector<double>>();
    b.norm.center = Eigen::Map<const Eigen::RowVectorXd>(center.data(), static_cast<Eigen::Index>(center.size()));
    b.norm.coord_scale = m.at("normalization").at("coord_scale").get<double>();
    b.norm.eig_scale = m.at("normalization").at("eig_scale").get<double>();
    const auto& faces = m.at("template_faces");
    b.template_faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f) {
      for (int c = 0; c < 3; ++c) b.template_faces(static_cast<Eigen::Index>(f), c) = faces[f][c].get<int>();
    }
    b.info = m.value("info", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bundle metadata: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": bundle metadata: " + e.what());
  }
  for (const char* name : {"encoder", "decoder", "pi", "rho"}) {
    if (!ck.nets.count(name)) throw DataError(path.string() + ": bundle lacks the '" + std::string(name) + "' network");
  }
  b.nets.encoder = std::move(ck.nets.at("encoder"));
  b.nets.decoder = std::move(ck.nets.at("decoder"));
  b.nets.pi = std::move(ck.nets.at("pi"));
  b.nets.rho = std::move(ck.nets.at("rho"));
  if (b.nets.pi.spec().input_dim() != b.k || b.nets.rho.spec().output_dim() != b.k ||
      b.nets.decoder.spec().output_dim() != b.n * b.dim || b.nets.encoder.spec().output_dim() != b.latent) {
    throw DataError(path.string() + ": network dimensions do not match the bundle metadata");
  }
  return b;
}

}  // namespace specshape
