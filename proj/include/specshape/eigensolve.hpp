#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "specshape/geometry.hpp"
#include "specshape/laplacian.hpp"

namespace specshape {

// First k generalized eigenvalues, nondecreasing, lambda_0 = 0 on closed or
// Neumann domains.
struct Spectrum {
  std::vector<double> values;
  Discretization disc = Discretization::cubic_fem;
  double tol = 1e-8;  // solver tolerance used to produce the values

  int k() const { return static_cast<int>(values.size()); }
};

// Throws DataError if values are not a valid spectrum (empty, non-finite,
// decreasing beyond 1e-12, or a negative leading value).
void validate(const Spectrum& spectrum);

nlohmann::json to_json(const Spectrum& spectrum);
Spectrum spectrum_from_json(const nlohmann::json& j);
Spectrum load_spectrum(const std::filesystem::path& path);
void save_spectrum(const Spectrum& spectrum, const std::filesystem::path& path);

struct EigenPairs {
  Spectrum spectrum;
  Eigen::MatrixXd vectors;  // N x k, M-orthonormal columns
};

struct EigenOptions {
  double tol = 1e-8;
  std::uint64_t seed = 0x5eedULL;
  int max_restarts = 64;
};

// The k algebraically smallest eigenpairs of S phi = lambda M phi via
// shift-invert Lanczos with full reorthogonalization. Missed copies of
// repeated eigenvalues are recovered by restarting from fresh start vectors
// deflated against every locked eigenvector.
EigenPairs smallest_k(const LaplacianPair& pair, int k, const EigenOptions& options = {});

// Reference solver: dense generalized symmetric-definite decomposition.
// Only intended for small N (tests, oracles).
EigenPairs dense_smallest_k(const LaplacianPair& pair, int k);

enum class FemOrder { linear, cubic };

std::string to_string(FemOrder order);
FemOrder fem_order_from_string(const std::string& s);

// 64-bit FNV-1a hash over the coordinate and connectivity bytes.
std::uint64_t shape_hash(const Mesh& mesh);
std::uint64_t shape_hash(const Contour& contour);

// Thread-safe memo of spectra keyed by (shape hash, discretization, k), with
// an optional on-disk mirror (one JSON file per key).
class SpectrumCache {
 public:
  SpectrumCache() = default;
  explicit SpectrumCache(std::filesystem::path directory);

  std::optional<Spectrum> find(std::uint64_t hash, Discretization disc, int k);
  void store(std::uint64_t hash, const Spectrum& spectrum);

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::filesystem::path file_for(std::uint64_t hash, Discretization disc, int k) const;

  using Key = std::tuple<std::uint64_t, int, int>;
  mutable std::mutex mutex_;
  std::map<Key, Spectrum> memory_;
  std::optional<std::filesystem::path> directory_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// assemble -> smallest_k -> values. Contours always use the 1D ring element.
Spectrum spectrum_of(const Mesh& mesh, int k, FemOrder order, SpectrumCache* cache = nullptr,
                     const EigenOptions& options = {});
Spectrum spectrum_of(const Contour& contour, int k, SpectrumCache* cache = nullptr,
                     const EigenOptions& options = {});
Spectrum spectrum_of(const Shape& shape, int k, FemOrder order, SpectrumCache* cache = nullptr,
                     const EigenOptions& options = {});

// Spectra of many shapes; serial reference and OpenMP version give identical
// results in input order.
namespace kernels::serial {
std::vector<Spectrum> spectra(const std::vector<Shape>& shapes, int k, FemOrder order,
                              SpectrumCache* cache = nullptr);
}
namespace kernels::omp {
std::vector<Spectrum> spectra(const std::vector<Shape>& shapes, int k, FemOrder order,
                              SpectrumCache* cache = nullptr);
}

}  // namespace specshape
