#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "specshape/eigensolve.hpp"
#include "specshape/error.hpp"
#include "specshape/random.hpp"

namespace specshape {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Accepted eigenpairs, M-orthonormal.
struct Locked {
  MatrixXd vectors;  // N x p
  MatrixXd mvectors; // M * vectors
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }

  void append(const VectorXd& x, const VectorXd& mx, double lambda) {
    const Eigen::Index p = vectors.cols();
    vectors.conservativeResize(x.size(), p + 1);
    mvectors.conservativeResize(x.size(), p + 1);
    vectors.col(p) = x;
    mvectors.col(p) = mx;
    values.push_back(lambda);
  }

  // w <- w - Y (MY^T w), applied twice for stability.
  void deflate(VectorXd& w) const {
    if (values.empty()) return;
    for (int pass = 0; pass < 2; ++pass) w.noalias() -= vectors * (mvectors.transpose() * w);
  }
};

class ShiftInvertOperator {
 public:
  ShiftInvertOperator(const LaplacianPair& pair, double sigma) {
    SparseMatrix shifted = pair.stiffness - sigma * pair.mass;
    solver_.compute(shifted);
    if (solver_.info() != Eigen::Success) {
      throw NumericalError("sparse LDLT factorization of S - sigma*M failed (mass matrix not positive definite?)");
    }
    if ((solver_.vectorD().array() <= 0.0).any()) {
      throw NumericalError("S - sigma*M is not positive definite; check that the mass matrix is SPD");
    }
  }

  VectorXd apply_to_mx(const VectorXd& mx) const { return solver_.solve(mx); }

 private:
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> solver_;
};

double residual_norm(const LaplacianPair& pair, const VectorXd& x, double lambda, double& mx_norm) {
  const VectorXd mx = pair.mass * x;
  mx_norm = mx.norm();
  return (pair.stiffness * x - lambda * mx).norm();
}

}  // namespace

EigenPairs smallest_k(const LaplacianPair& pair, int k, const EigenOptions& options) {
  const int n = pair.nodes();
  if (k < 1 || k >= n) {
    throw ConfigError("smallest_k needs 1 <= k < N (k = " + std::to_string(k) + ", N = " + std::to_string(n) + ")");
  }
  if (!(options.tol > 0.0)) throw ConfigError("eigensolver tolerance must be positive");

  // Shift slightly below zero so S - sigma*M stays definite despite the
  // constant null space; the scale is the mean diagonal Rayleigh quotient.
  const double scale = pair.stiffness.diagonal().sum() / pair.mass.diagonal().sum();
  const double sigma = -1e-6 * scale;
  const ShiftInvertOperator op(pair, sigma);

  // Residual floor for (near-)zero eigenvalues where |lambda| ||Mx|| vanishes.
  const double lambda_floor = std::abs(sigma);

  Locked locked;
  int steps = std::min(n, std::max(2 * k + 10, 24));
  Rng rng(options.seed);

  for (int restart = 0; restart < options.max_restarts; ++restart) {
    const int avail = n - locked.size();
    if (avail <= 0) break;
    const int m = std::min(steps, avail);

    // Lanczos on OP = (S - sigma M)^{-1} M in the M inner product.
    MatrixXd V(n, m + 1), MV(n, m + 1);
    VectorXd alpha(m), beta(m);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
    locked.deflate(v);
    VectorXd mv = pair.mass * v;
    double norm = std::sqrt(v.dot(mv));
    if (!(norm > 0.0)) throw NumericalError("Lanczos start vector vanished after deflation");
    V.col(0) = v / norm;
    MV.col(0) = mv / norm;

    int built = m;
    for (int j = 0; j < m; ++j) {
      VectorXd w = op.apply_to_mx(MV.col(j));
      alpha[j] = MV.col(j).dot(w);
      // Full reorthogonalization against the basis (covers the three-term
      // recurrence) and the locked vectors.
      for (int pass = 0; pass < 2; ++pass) {
        w.noalias() -= V.leftCols(j + 1) * (MV.leftCols(j + 1).transpose() * w);
        locked.deflate(w);
      }
      const VectorXd mw = pair.mass * w;
      beta[j] = std::sqrt(std::max(0.0, w.dot(mw)));
      if (beta[j] <= 1e-14 * std::abs(alpha[j]) || j + 1 == avail) {
        built = j + 1;
        beta[j] = j + 1 == avail ? 0.0 : beta[j];
        break;
      }
      V.col(j + 1) = w / beta[j];
      MV.col(j + 1) = mw / beta[j];
    }

    MatrixXd T = MatrixXd::Zero(built, built);
    for (int j = 0; j < built; ++j) {
      T(j, j) = alpha[j];
      if (j + 1 < built) T(j, j + 1) = T(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> tri(T);
    // Ritz values of OP in descending order = pencil eigenvalues ascending.
    std::vector<int> order(built);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return tri.eigenvalues()[a] > tri.eigenvalues()[b]; });

    // The k-th smallest locked value bounds what is still worth keeping.
    std::vector<double> sorted_locked = locked.values;
    std::sort(sorted_locked.begin(), sorted_locked.end());
    const bool have_k = locked.size() >= k;
    const double kth = have_k ? sorted_locked[k - 1] : std::numeric_limits<double>::infinity();

    bool top_converged = false;
    double top_lambda = 0.0;
    int accepted = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const int idx = order[r];
      const double theta = tri.eigenvalues()[idx];
      if (theta <= 0.0) continue;
      const double lambda = sigma + 1.0 / theta;
      // Cheap Lanczos estimate first: ||OP x - theta x||_M = |beta_m s_m|.
      const double estimate = std::abs(beta[built - 1] * tri.eigenvectors()(built - 1, idx));
      if (estimate > 1e-2 * theta && r > 0) continue;

      VectorXd x = V.leftCols(built) * tri.eigenvectors().col(idx);
      double mx_norm = 0.0;
      const double res = residual_norm(pair, x, lambda, mx_norm);
      const bool converged = res <= options.tol * std::max(std::abs(lambda), lambda_floor) * mx_norm;
      if (r == 0) {
        top_converged = converged;
        top_lambda = lambda;
      }
      if (!converged) continue;
      if (have_k && lambda >= kth) continue;
      if (!have_k && locked.size() >= 2 * k + 10 && (sorted_locked.empty() || lambda >= sorted_locked.back())) {
        continue;
      }
      const VectorXd mx = pair.mass * x;
      locked.append(x, mx, lambda);
      ++accepted;
    }

    if (have_k && top_converged && top_lambda >= kth) break;
    if (!top_converged || accepted == 0) steps = std::min(2 * steps, n);
    if (restart + 1 == options.max_restarts) {
      throw NumericalError("shift-invert Lanczos did not converge after " + std::to_string(options.max_restarts) +
                           " restarts (" + std::to_string(locked.size()) + " of " + std::to_string(k) +
                           " eigenpairs locked)");
    }
  }
  if (locked.size() < k) {
    throw NumericalError("shift-invert Lanczos found only " + std::to_string(locked.size()) + " of " +
                         std::to_string(k) + " eigenpairs");
  }

  // Final Rayleigh-Ritz over all locked vectors tidies clusters and restores
  // exact M-orthonormality.
  const MatrixXd& Y = locked.vectors;
  const MatrixXd A = Y.transpose() * (pair.stiffness * Y);
  const MatrixXd B = Y.transpose() * locked.mvectors;
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> rr(0.5 * (A + A.transpose()), 0.5 * (B + B.transpose()));
  if (rr.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz projection failed");

  EigenPairs out;
  out.spectrum.tol = options.tol;
  out.spectrum.disc = pair.disc;
  out.spectrum.values.assign(rr.eigenvalues().data(), rr.eigenvalues().data() + k);
  out.vectors = Y * rr.eigenvectors().leftCols(k);
  for (int i = 0; i < k; ++i) {
    const double nrm = std::sqrt(out.vectors.col(i).dot(pair.mass * out.vectors.col(i)));
    out.vectors.col(i) /= nrm;
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index arg = 0;
    out.vectors.col(i).cwiseAbs().maxCoeff(&arg);
    if (out.vectors(arg, i) < 0.0) out.vectors.col(i) *= -1.0;
  }

  // With k = 1 there is no nonzero eigenvalue to compare against, so the
  // operator scale stands in.
  const double top = std::max(std::abs(out.spectrum.values.back()), scale);
  int zeros = 0;
  for (double& value : out.spectrum.values) {
    if (std::abs(value) < 1e-9 * top) {
      value = 0.0;
      ++zeros;
    }
  }
  if (zeros > 1 && k > 1) {
    throw NumericalError("multiplicity of zero eigenvalue > 1, mesh likely disconnected");
  }
  for (int i = 1; i < k; ++i) {
    out.spectrum.values[i] = std::max(out.spectrum.values[i], out.spectrum.values[i - 1]);
  }
  return out;
}

EigenPairs dense_smallest_k(const LaplacianPair& pair, int k) {
  const int n = pair.nodes();
  if (k < 1 || k > n) throw ConfigError("dense_smallest_k needs 1 <= k <= N");
  const MatrixXd S = MatrixXd(pair.stiffness);
  const MatrixXd M = MatrixXd(pair.mass);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> solver(S, M);
  if (solver.info() != Eigen::Success) throw NumericalError("dense generalized eigensolver failed");
  EigenPairs out;
  out.spectrum.disc = pair.disc;
  out.spectrum.tol = 0.0;
  out.spectrum.values.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + k);
  out.vectors = solver.eigenvectors().leftCols(k);
  for (int i = 0; i < k; ++i) {
    out.vectors.col(i) /= std::sqrt(out.vectors.col(i).dot(M * out.vectors.col(i)));
  }
  return out;
}

}  // namespace specshape
