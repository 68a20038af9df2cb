// Analytic spectra, element order comparison and the dense-solver oracle.

#include <algorithm>
#include <cmath>

#include "acceptance.hpp"
#include "specshape/eigensolve.hpp"
#include "specshape/random.hpp"

namespace specshape::acceptance {

namespace {

constexpr double kAnalyticTol = 5e-3;      // circle
constexpr double kSphereTol = 1e-2;
constexpr double kSquareTol = 1e-2;
constexpr double kAnalyticSeconds = 10.0;
constexpr double kOrderSeconds = 30.0;
constexpr double kOracleTol = 1e-7;
constexpr double kOracleSeconds = 60.0;
constexpr int kOracleShapes = 50;
constexpr int kOracleMaxNodes = 400;

Contour unit_circle(int n) {
  Contour c;
  c.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    c.points(i, 0) = std::cos(2 * M_PI * i / n);
    c.points(i, 1) = std::sin(2 * M_PI * i / n);
  }
  return c;
}

// Largest relative deviation over the nonzero entries; the zero mode is
// compared absolutely.
double worst_relative(const std::vector<double>& got, const std::vector<double>& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    worst = std::max(worst, want[i] == 0.0 ? std::abs(got[i]) : std::abs(got[i] / want[i] - 1.0));
  }
  return worst;
}

Outcome analytic() {
  const Stopwatch clock;
  const auto circle = spectrum_of(unit_circle(512), 7).values;
  const double e_circle = worst_relative(circle, {0, 1, 1, 4, 4, 9, 9});
  const auto sphere = spectrum_of(icosphere(3), 9, FemOrder::cubic).values;
  const double e_sphere = worst_relative(sphere, {0, 2, 2, 2, 6, 6, 6, 6, 6});
  const auto square = spectrum_of(planar_grid(8, 8), 2, FemOrder::cubic).values;
  const double e_square = std::abs(square[1] / (M_PI * M_PI) - 1.0);
  const double t = clock.seconds();
  return {e_circle < kAnalyticTol && e_sphere < kSphereTol && e_square < kSquareTol && t < kAnalyticSeconds,
          "circle " + fmt(e_circle) + " < " + fmt(kAnalyticTol) + ", sphere " + fmt(e_sphere) + " < " +
              fmt(kSphereTol) + ", square " + fmt(e_square) + " < " + fmt(kSquareTol) + ", " + fmt(t, 3) +
              " s < " + fmt(kAnalyticSeconds, 3) + " s"};
}

Outcome cubic_beats_linear() {
  const Stopwatch clock;
  const Mesh sphere = icosphere(3);
  const auto lin = spectrum_of(sphere, 9, FemOrder::linear).values;
  const auto cub = spectrum_of(sphere, 9, FemOrder::cubic).values;
  const double exact[9] = {0, 2, 2, 2, 6, 6, 6, 6, 6};
  bool all = true;
  double worst_ratio = 0.0;
  for (int i = 1; i <= 8; ++i) {
    const double el = std::abs(lin[i] / exact[i] - 1.0), ec = std::abs(cub[i] / exact[i] - 1.0);
    all = all && ec < el;
    worst_ratio = std::max(worst_ratio, ec / el);
  }
  const double t = clock.seconds();
  return {all && t < kOrderSeconds, "max cubic/linear error ratio over lambda_1..8 " + fmt(worst_ratio) + " < 1, " +
                                        fmt(t, 3) + " s < " + fmt(kOrderSeconds, 3) + " s"};
}

// Blob meshes (linear and cubic), contours of varying length.
LaplacianPair random_pair(int i, Rng& rng) {
  const FamilySpec blob = FamilySpec::defaults(FamilyKind::blob3d);
  const FamilySpec contour = FamilySpec::defaults(FamilyKind::contour2d);
  switch (i % 3) {
    case 0: {
      const FamilySample s = blob.draw(1000 + i);
      return assemble_linear_fem(generate_blob(s.style, s.pose, 2));
    }
    case 1: {
      const FamilySample s = blob.draw(1000 + i);
      return assemble_cubic_fem(generate_blob(s.style, s.pose, 1));
    }
    default: {
      const FamilySample s = contour.draw(1000 + i);
      const int n = 40 + static_cast<int>(rng.below(kOracleMaxNodes - 40 + 1));
      return assemble_contour_fem(generate_contour(s.style, s.pose, n));
    }
  }
}

Outcome oracle() {
  const Stopwatch clock;
  Rng rng(2024);
  double worst = 0.0;
  int max_nodes = 0;
  for (int i = 0; i < kOracleShapes; ++i) {
    const LaplacianPair pair = random_pair(i, rng);
    max_nodes = std::max(max_nodes, pair.nodes());
    const int k = 5 + static_cast<int>(rng.below(26));
    const auto fast = smallest_k(pair, k).spectrum.values;
    const auto ref = dense_smallest_k(pair, k).spectrum.values;
    // lambda_0 = 0 has no scale of its own; measure it against lambda_1.
    const double scale0 = std::abs(ref[1]);
    for (int j = 0; j < k; ++j) {
      worst = std::max(worst, std::abs(fast[j] - ref[j]) / std::max(std::abs(ref[j]), scale0));
    }
  }
  const double t = clock.seconds();
  return {worst < kOracleTol && max_nodes <= kOracleMaxNodes && t < kOracleSeconds,
          std::to_string(kOracleShapes) + " shapes, N <= " + std::to_string(max_nodes) + ", max relative error " +
              fmt(worst) + " < " + fmt(kOracleTol) + ", " + fmt(t, 3) + " s < " + fmt(kOracleSeconds, 3) + " s"};
}

}  // namespace

std::vector<Criterion> spectral_criteria() {
  return {{"analytic-spectra", analytic}, {"cubic-beats-linear", cubic_beats_linear}, {"eigensolver-oracle", oracle}};
}

}  // namespace specshape::acceptance
