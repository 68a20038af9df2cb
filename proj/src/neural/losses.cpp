#include "specshape/error.hpp"
#include "specshape/kernels.hpp"
#include "specshape/neural.hpp"

namespace specshape::nn {

template <typename T>
double mse_loss(const Matrix<T>& pred, const Matrix<T>& target, int points_per_row, Matrix<T>* grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DataError("mse: prediction is (" + std::to_string(pred.rows()) + " x " + std::to_string(pred.cols()) +
                    ") but target is (" + std::to_string(target.rows()) + " x " + std::to_string(target.cols()) +
                    ")");
  }
  if (pred.rows() == 0 || points_per_row <= 0) throw DataError("mse: empty batch");
  const double scale = 1.0 / (static_cast<double>(pred.rows()) * points_per_row);
  const Eigen::MatrixXd diff = pred.template cast<double>() - target.template cast<double>();
  if (grad) *grad = (2.0 * scale * diff).template cast<T>();
  return scale * diff.squaredNorm();
}

template <typename T>
double chamfer(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>* grad_a, Matrix<T>* grad_b) {
  if (a.rows() == 0 || b.rows() == 0) throw DataError("chamfer distance needs two nonempty point sets");
  if (a.cols() != b.cols()) throw DataError("chamfer: point dimensions differ");
  const int p = static_cast<int>(a.rows()), q = static_cast<int>(b.rows()), dim = static_cast<int>(a.cols());
  const auto ab = kernels::omp::nearest_neighbors(a.data(), p, b.data(), q, dim);
  const auto ba = kernels::omp::nearest_neighbors(b.data(), q, a.data(), p, dim);

  double sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < p; ++i) sum_a += static_cast<double>(ab.sq_distance[i]);
  for (int j = 0; j < q; ++j) sum_b += static_cast<double>(ba.sq_distance[j]);

  if (grad_a) grad_a->setZero(p, dim);
  if (grad_b) grad_b->setZero(q, dim);
  const T wa = T(2.0 / p), wb = T(2.0 / q);
  for (int i = 0; i < p; ++i) {
    const int j = ab.index[i];
    const auto diff = (a.row(i) - b.row(j)).eval();
    if (grad_a) grad_a->row(i) += wa * diff;
    if (grad_b) grad_b->row(j) -= wa * diff;
  }
  for (int j = 0; j < q; ++j) {
    const int i = ba.index[j];
    const auto diff = (b.row(j) - a.row(i)).eval();
    if (grad_b) grad_b->row(j) += wb * diff;
    if (grad_a) grad_a->row(i) -= wb * diff;
  }
  return sum_a / p + sum_b / q;
}

template double mse_loss<float>(const Matrix<float>&, const Matrix<float>&, int, Matrix<float>*);
template double mse_loss<double>(const Matrix<double>&, const Matrix<double>&, int, Matrix<double>*);
template double chamfer<float>(const Matrix<float>&, const Matrix<float>&, Matrix<float>*, Matrix<float>*);
template double chamfer<double>(const Matrix<double>&, const Matrix<double>&, Matrix<double>*, Matrix<double>*);

}  // namespace specshape::nn
