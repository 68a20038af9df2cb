#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "specshape/eigensolve.hpp"
#include "specshape/geometry.hpp"
#include "specshape/neural.hpp"

namespace specshape {

enum class InputKind { dense_template, pointcloud };

std::string to_string(InputKind kind);
InputKind input_kind_from_string(const std::string& s);

// Maps raw coordinates and eigenvalues into the units the networks see.
struct Normalization {
  Eigen::RowVectorXd center;  // dataset centroid, length = dim
  double coord_scale = 1.0;   // RMS vertex distance from the centroid
  double eig_scale = 1.0;     // median of lambda_{k-1} over the training spectra
};

template <typename T>
struct ModelNets {
  nn::Net<T> encoder;
  nn::Net<T> decoder;
  nn::Net<T> pi;   // spectrum -> latent
  nn::Net<T> rho;  // latent -> spectrum

  template <typename U>
  ModelNets<U> cast() const {
    return {encoder.template cast<U>(), decoder.template cast<U>(), pi.template cast<U>(), rho.template cast<U>()};
  }
};

// Trained parameters plus everything needed to interpret them.
struct ModelBundle {
  InputKind input = InputKind::dense_template;
  int n = 0;        // template points produced by the decoder
  int dim = 3;      // 2 for contours, 3 for meshes and clouds
  int k = 30;       // spectral bandwidth
  int latent = 30;  // equals k
  double alpha = 1e-4;
  Normalization norm;
  Faces template_faces;         // empty for contours and point-cloud models
  nlohmann::json info = nlohmann::json::object();  // family, training config, log summary
  ModelNets<float> nets;
};

// E: n*d -> 300 -> 200 -> k, D: k -> 200 -> n*d, tanh after every layer but
// the decoder output. pi, rho: k -> 80 -> 160 -> 320 -> 640 -> 320 -> 160 ->
// 80 -> k with batchnorm + SELU after every layer but the last.
ModelBundle build_dense_model(int n, int k, int dim = 3, std::uint64_t seed = 1);

// Per-point shared 3 -> 64 -> 128 (batchnorm after each), max-pool, then
// 128 -> 64 -> k with tanh; decoder as in the dense model producing
// n_template points.
ModelBundle build_pointcloud_model(int k, int n_template, std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Training data

// Raw coordinates and spectra. Dense sets keep one row of n*d coordinates per
// shape (template order); point-cloud sets keep one cloud per shape.
struct Dataset {
  InputKind input = InputKind::dense_template;
  int n = 0;
  int dim = 3;
  Eigen::MatrixXd coords;              // count x (n*dim), dense only
  std::vector<Points3> clouds;         // point-cloud only
  Eigen::MatrixXd spectra;             // count x k
  Faces faces;                         // template faces for blob families
  std::vector<FamilySample> samples;   // provenance of every row

  int size() const { return static_cast<int>(spectra.rows()); }
  int k() const { return static_cast<int>(spectra.cols()); }
  // Rows [first, first + count) as a new dataset.
  Dataset slice(int first, int count) const;
  // First `k` eigenvalues of every spectrum.
  Dataset truncated(int k) const;
};

// Flattens a generated shape into one dense row (x0, y0, [z0], x1, ...).
Eigen::RowVectorXd flatten(const Shape& shape);
// Inverse of flatten for a template of n points in `dim` dimensions.
Shape unflatten(const Eigen::RowVectorXd& row, int dim, const Faces& faces);

struct DatasetOptions {
  FamilySpec family;
  int first_index = 0;
  int count = 100;
  int k = 30;
  FemOrder order = FemOrder::cubic;
  InputKind input = InputKind::dense_template;
  double cloud_fraction = 0.2;                  // point-cloud sets
  SamplingMode cloud_mode = SamplingMode::uniform;
};

// Draws `count` family members starting at `first_index`; spectra come from
// the cache when present (computed in parallel otherwise).
Dataset make_dataset(const DatasetOptions& options, SpectrumCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Loss

struct LossTerms {
  double total = 0.0;
  double recon = 0.0;     // l_X
  double spectral = 0.0;  // l_lambda
};

struct LossOptions {
  double alpha = 1e-4;
  bool use_rho = true;  // false drops the rho summand of l_lambda
};

// A batch in network units: dense rows (B x n*d) or a point tensor with
// offsets, plus normalized spectra (B x k).
template <typename T>
struct Batch {
  nn::Tensor<T> shapes;
  nn::Matrix<T> spectra;
};

// l = l_X + alpha * l_lambda, averaged over the batch, with
// l_X = (1/n) ||D(E(X)) - X||_F^2 (Chamfer for point clouds) and
// l_lambda = (1/k) (||pi(lambda) - E(X)||^2 + ||rho(E(X)) - lambda||^2).
// When grads is given, it receives gradients for encoder, decoder, pi, rho
// (in that order, parameters concatenated per net).
template <typename T>
LossTerms compute_loss(const ModelNets<T>& nets, InputKind input, int n, const Batch<T>& batch,
                       const LossOptions& options, nn::Mode mode, std::vector<nn::Gradients<T>>* grads = nullptr,
                       std::vector<nn::Tape<T>>* tapes = nullptr);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int batch = 16;
  double lr = 1e-4;
  int epochs = 300;
  std::uint64_t seed = 1;
  double alpha = 1e-4;
  int k = 30;
  bool use_rho = true;

  nlohmann::json to_json() const;
  // Rejects unknown keys; missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
  int epoch = 0;
  LossTerms loss;
};

struct TrainOptions {
  // Called after every epoch; return false to stop early.
  std::function<bool(const EpochLog&)> on_epoch;
  // Where the last finite state is written if training produces NaN.
  std::optional<std::filesystem::path> rescue_checkpoint;
};

struct TrainResult {
  ModelBundle bundle;
  std::vector<EpochLog> log;
};

// Normalization is fitted on `data`; identical inputs give identical bits.
TrainResult train(ModelBundle model, const Dataset& data, const TrainConfig& config,
                  const TrainOptions& options = {});

// Fits centroid/RMS coordinate scaling and the median lambda_{k-1}.
Normalization fit_normalization(const Dataset& data);

void write_training_csv(const std::vector<EpochLog>& log, std::ostream& out);

// ---------------------------------------------------------------------------
// Inference (eval mode, single sample at a time)

// E(X) for a dense template shape or a point cloud.
Eigen::VectorXd encode(const ModelBundle& bundle, const Shape& shape);
// D(v) in raw coordinates: Mesh (blob template), Contour, or PointCloud.
Shape decode(const ModelBundle& bundle, const Eigen::VectorXd& latent);
// pi(lambda) with the bundle's eigenvalue scaling.
Eigen::VectorXd spec_to_latent(const ModelBundle& bundle, const std::vector<double>& eigenvalues);
// rho(v), returned in raw eigenvalue units.
std::vector<double> latent_to_spec(const ModelBundle& bundle, const Eigen::VectorXd& latent);

// Flattened decoder output in raw coordinates (n*d values).
Eigen::RowVectorXd decode_flat(const ModelBundle& bundle, const Eigen::VectorXd& latent);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace specshape
