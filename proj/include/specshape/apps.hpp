#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "specshape/eigensolve.hpp"
#include "specshape/geometry.hpp"
#include "specshape/spectral_ae.hpp"

namespace specshape {

// ---------------------------------------------------------------------------
// Shape from spectrum

struct Reconstruction {
  Shape shape;
  Eigen::VectorXd latent;
  double seconds = 0.0;  // wall time of the forward pass
};

// D(pi(lambda)).
Reconstruction shape_from_spectrum(const ModelBundle& bundle, const std::vector<double>& eigenvalues);

// Spectrum of `low` (any connectivity) with the given element order, then
// shape_from_spectrum. The bundle's k is used.
struct SuperResolution {
  Reconstruction result;
  Spectrum spectrum;
};
SuperResolution super_resolve(const ModelBundle& bundle, const Shape& low, FemOrder order = FemOrder::cubic,
                              SpectrumCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Style transfer

struct StyleTransferConfig {
  double w = 1e-2;
  int steps = 500;
  double lr = 1e-2;

  nlohmann::json to_json() const;
  static StyleTransferConfig from_json(const nlohmann::json& j);
};

struct AlignmentPoint {
  int step = 0;
  double objective = 0.0;     // g at the accepted iterate
  double alignment = 0.0;     // ||rho(v) - spec_style|| in eigenvalue units
};

struct StyleTransferResult {
  Shape shape;
  Eigen::VectorXd latent;       // v*
  Eigen::VectorXd initial;      // v_init = E(shape_pose)
  double pose_gap = 0.0;        // ||spec_style - rho(v_init)||
  std::vector<AlignmentPoint> curve;
};

// Adam on g(v) = ||s - rho(v)||^2 + w ||v - v_init||^2 with s and rho in
// normalized eigenvalue units. The returned v* is the best iterate seen, so
// g(v*) <= g(v_init).
StyleTransferResult style_transfer(const ModelBundle& bundle, const std::vector<double>& spec_style,
                                   const Shape& shape_pose, const StyleTransferConfig& config = {});

void write_alignment_csv(const std::vector<AlignmentPoint>& curve, std::ostream& out);

// ---------------------------------------------------------------------------
// Exploration

// Row-major g x g grid; cell (i, j) blends corners 0..3 with weights
// (1-s)(1-t), s(1-t), (1-s)t, st where s = j/(g-1), t = i/(g-1).
std::vector<Shape> interpolate_latent(const ModelBundle& bundle, const std::array<std::vector<double>, 4>& corners,
                                      int grid);

Shape interpolate_spectra(const ModelBundle& bundle, const std::vector<double>& a, const std::vector<double>& b,
                          double t);

// values[lo..hi] *= factor, then sorted nondecreasing with values[0] = 0.
std::vector<double> band_modify(const std::vector<double>& eigenvalues, int lo, int hi, double factor);

// rho(E(cloud)) for a point-cloud bundle.
std::vector<double> estimate_spectrum(const ModelBundle& bundle, const PointCloud& cloud);

// ---------------------------------------------------------------------------
// Baselines

// Training spectra scaled by a single factor (the bundle's eigenvalue scale).
class SpectrumIndex {
 public:
  SpectrumIndex(const Eigen::MatrixXd& spectra, double scale);

  struct Hit {
    int index = -1;
    double distance = 0.0;
  };
  // Nearest row in l2; ties go to the lowest index.
  Hit nearest(const std::vector<double>& eigenvalues) const;
  int size() const { return static_cast<int>(rows_.rows()); }

 private:
  Eigen::MatrixXd rows_;
  double scale_;
};

// Nearest-neighbour baseline for point clouds: encode, find the closest
// training latent, answer with that shape's spectrum.
class LatentIndex {
 public:
  LatentIndex(Eigen::MatrixXd latents, Eigen::MatrixXd spectra);
  std::vector<double> spectrum_of_nearest(const Eigen::VectorXd& latent) const;

 private:
  Eigen::MatrixXd latents_;
  Eigen::MatrixXd spectra_;
};

// ---------------------------------------------------------------------------
// Matching

struct Correspondence {
  std::vector<int> map;  // index into B for every point of A
  double quality = 0.0;  // mean distance between matched points
};

// Both spectra decoded onto the template; the template indexing is the
// correspondence.
Correspondence match_shapes(const ModelBundle& bundle, const std::vector<double>& spec_a,
                            const std::vector<double>& spec_b);

// External point sets: A -> nearest template vertex of D(pi(spec_a)) ->
// same vertex of D(pi(spec_b)) -> nearest point of B.
Correspondence match_points(const ModelBundle& bundle, const Points3& a, const std::vector<double>& spec_a,
                            const Points3& b, const std::vector<double>& spec_b);

// Labels on A carried to B through the template.
std::vector<int> transfer_labels(const ModelBundle& bundle, const Points3& a, const std::vector<int>& labels_a,
                                 const std::vector<double>& spec_a, const Points3& b,
                                 const std::vector<double>& spec_b);

struct RigidFit {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  std::vector<double> residuals;  // mean squared pair distance after every iteration
};

// Point-to-point ICP aligning a onto b.
RigidFit icp_rigid(const Points3& a, const Points3& b, int iterations = 100);

// ICP followed by nearest-neighbour assignment from A to B.
Correspondence icp_match(const Points3& a, const Points3& b, int iterations = 100);

// Fraction of A points whose assigned B point lies within `radius` of the
// ground-truth B point.
double match_accuracy(const Correspondence& c, const Points3& b, const std::vector<int>& truth, double radius);

// ---------------------------------------------------------------------------
// Evaluation on held-out dense sets

// Mean squared vertex distance between two flattened shapes of n points.
double reconstruction_mse(const Eigen::RowVectorXd& predicted, const Eigen::RowVectorXd& truth, int n);

// Per-shape MSE of D(pi(lambda)) against the held-out coordinates.
std::vector<double> spectrum_reconstruction_errors(const ModelBundle& bundle, const Dataset& test);

// Per-shape MSE of the training shape whose spectrum is nearest.
std::vector<double> nearest_neighbour_errors(const Dataset& train, const Dataset& test, double eig_scale);

struct Table1 {
  double ours = 0.0;
  double no_rho = 0.0;
  double nn = 0.0;
  int count = 0;
};

Table1 evaluate_table1(const ModelBundle& ours, const ModelBundle& no_rho, const Dataset& train, const Dataset& test);
void write_table1(const Table1& table, std::ostream& out);

// Mean over held-out spectra of ||rho(pi(lambda)) - lambda|| / ||lambda||.
double cycle_error(const ModelBundle& bundle, const Dataset& test);

// Per-shape MSE when the spectrum comes from the test mesh decimated to
// `fraction` of its vertices.
std::vector<double> super_resolution_errors(const ModelBundle& bundle, const Dataset& test, double fraction,
                                            FemOrder order = FemOrder::cubic, SpectrumCache* cache = nullptr);

}  // namespace specshape
