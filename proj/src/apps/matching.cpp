#include <Eigen/LU>
#include <Eigen/SVD>

#include "specshape/apps.hpp"
#include "specshape/error.hpp"
#include "specshape/kernels.hpp"

namespace specshape {

namespace {

Points3 template_points(const ModelBundle& bundle, const std::vector<double>& spectrum) {
  if (bundle.dim != 3) throw ConfigError("matching needs a 3D model");
  const Eigen::RowVectorXd row = decode_flat(bundle, spec_to_latent(bundle, spectrum));
  return Eigen::Map<const Points3>(row.data(), bundle.n, 3);
}

std::vector<int> nearest(const Points3& query, const Points3& ref) {
  return kernels::omp::nearest_neighbors(query.data(), static_cast<int>(query.rows()), ref.data(),
                                         static_cast<int>(ref.rows()), 3)
      .index;
}

void require_points(const Points3& p, const char* name) {
  if (p.rows() == 0) throw DataError(std::string(name) + " has no points");
}

// Rigid (R, t) minimizing sum ||R p_i + t - q_i||^2.
void kabsch(const Points3& p, const Points3& q, Eigen::Matrix3d& rotation, Eigen::Vector3d& translation) {
  const Eigen::RowVector3d cp = p.colwise().mean();
  const Eigen::RowVector3d cq = q.colwise().mean();
  const Eigen::Matrix3d h = (p.rowwise() - cp).transpose() * (q.rowwise() - cq);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s[1] > 1e-12 * std::max(s[0], 1e-300))) {
    throw NumericalError("ICP: degenerate cross-covariance (paired points are collinear)");
  }
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  rotation = svd.matrixV() * d * svd.matrixU().transpose();
  translation = cq.transpose() - rotation * cp.transpose();
}

Points3 transformed(const Points3& p, const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  return (p * r.transpose()).rowwise() + t.transpose();
}

}  // namespace

Correspondence match_shapes(const ModelBundle& bundle, const std::vector<double>& spec_a,
                            const std::vector<double>& spec_b) {
  const Points3 a = template_points(bundle, spec_a);
  const Points3 b = template_points(bundle, spec_b);
  Correspondence c;
  c.map.resize(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) c.map[i] = static_cast<int>(i);
  c.quality = (a - b).rowwise().norm().mean();
  return c;
}

Correspondence match_points(const ModelBundle& bundle, const Points3& a, const std::vector<double>& spec_a,
                            const Points3& b, const std::vector<double>& spec_b) {
  require_points(a, "shape A");
  require_points(b, "shape B");
  const Points3 ta = template_points(bundle, spec_a);
  const Points3 tb = template_points(bundle, spec_b);
  const std::vector<int> to_template = nearest(a, ta);
  const std::vector<int> template_to_b = nearest(tb, b);
  Correspondence c;
  c.map.resize(a.rows());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    c.map[i] = template_to_b[to_template[i]];
    sum += (a.row(i) - b.row(c.map[i])).norm();
  }
  c.quality = sum / static_cast<double>(a.rows());
  return c;
}

std::vector<int> transfer_labels(const ModelBundle& bundle, const Points3& a, const std::vector<int>& labels_a,
                                 const std::vector<double>& spec_a, const Points3& b,
                                 const std::vector<double>& spec_b) {
  require_points(a, "shape A");
  require_points(b, "shape B");
  if (static_cast<Eigen::Index>(labels_a.size()) != a.rows()) {
    throw DataError("shape A has " + std::to_string(a.rows()) + " points but " + std::to_string(labels_a.size()) +
                    " labels");
  }
  const Points3 ta = template_points(bundle, spec_a);
  const Points3 tb = template_points(bundle, spec_b);
  const std::vector<int> to_template = nearest(b, tb);
  const std::vector<int> template_to_a = nearest(ta, a);
  std::vector<int> labels(b.rows());
  for (Eigen::Index i = 0; i < b.rows(); ++i) labels[i] = labels_a[template_to_a[to_template[i]]];
  return labels;
}

RigidFit icp_rigid(const Points3& a, const Points3& b, int iterations) {
  if (a.rows() < 3 || b.rows() < 3) throw DataError("ICP needs at least 3 points in each set");
  if (iterations < 1) throw ConfigError("ICP iterations must be positive");
  RigidFit fit;
  std::vector<int> pairs;
  Points3 paired(a.rows(), 3);
  for (int it = 0; it < iterations; ++it) {
    const std::vector<int> next = nearest(transformed(a, fit.rotation, fit.translation), b);
    if (next == pairs) break;  // fixed point: later iterations repeat this one
    pairs = next;
    for (Eigen::Index i = 0; i < a.rows(); ++i) paired.row(i) = b.row(pairs[i]);
    kabsch(a, paired, fit.rotation, fit.translation);
    fit.residuals.push_back((transformed(a, fit.rotation, fit.translation) - paired).rowwise().squaredNorm().mean());
  }
  return fit;
}

Correspondence icp_match(const Points3& a, const Points3& b, int iterations) {
  const RigidFit fit = icp_rigid(a, b, iterations);
  const Points3 moved = transformed(a, fit.rotation, fit.translation);
  Correspondence c;
  c.map = nearest(moved, b);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) sum += (moved.row(i) - b.row(c.map[i])).norm();
  c.quality = sum / static_cast<double>(a.rows());
  return c;
}

double match_accuracy(const Correspondence& c, const Points3& b, const std::vector<int>& truth, double radius) {
  if (c.map.size() != truth.size()) throw DataError("correspondence and ground truth differ in length");
  if (truth.empty()) return 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if ((b.row(c.map[i]) - b.row(truth[i])).norm() <= radius) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace specshape
