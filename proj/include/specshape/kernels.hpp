#pragma once

// Data-parallel inner loops. Each kernel has a serial reference version and an
// OpenMP version with identical results: work is split per output element and
// written to preassigned slots, so no reduction order depends on threading.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "specshape/laplacian.hpp"

namespace specshape::kernels {

// For every query point, the index of the nearest reference point (ties go to
// the lowest index) and the squared distance. Points are row-major with `dim`
// coordinates each.
template <typename T>
struct NearestResult {
  std::vector<int> index;
  std::vector<T> sq_distance;
};

namespace detail {

template <typename T>
inline void nearest_one(const T* q, const T* ref, int n_ref, int dim, int& best_idx, T& best_d2) {
  best_idx = -1;
  best_d2 = std::numeric_limits<T>::infinity();
  for (int j = 0; j < n_ref; ++j) {
    const T* r = ref + static_cast<std::size_t>(j) * dim;
    T d2 = 0;
    for (int c = 0; c < dim; ++c) {
      const T diff = q[c] - r[c];
      d2 += diff * diff;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best_idx = j;
    }
  }
}

}  // namespace detail

namespace serial {

template <typename T>
NearestResult<T> nearest_neighbors(const T* query, int n_query, const T* ref, int n_ref, int dim) {
  NearestResult<T> out{std::vector<int>(n_query), std::vector<T>(n_query)};
  for (int i = 0; i < n_query; ++i) {
    detail::nearest_one(query + static_cast<std::size_t>(i) * dim, ref, n_ref, dim, out.index[i],
                        out.sq_distance[i]);
  }
  return out;
}

std::vector<fem::LinearBlock> linear_element_blocks(const Mesh& mesh);
std::vector<fem::CubicBlock> cubic_element_blocks(const Mesh& mesh, const fem::CubicNodeMap& map);

}  // namespace serial

namespace omp {

template <typename T>
NearestResult<T> nearest_neighbors(const T* query, int n_query, const T* ref, int n_ref, int dim) {
  NearestResult<T> out{std::vector<int>(n_query), std::vector<T>(n_query)};
#pragma omp parallel for schedule(static) if (static_cast<long>(n_query) * n_ref > 65536)
  for (int i = 0; i < n_query; ++i) {
    detail::nearest_one(query + static_cast<std::size_t>(i) * dim, ref, n_ref, dim, out.index[i],
                        out.sq_distance[i]);
  }
  return out;
}

std::vector<fem::LinearBlock> linear_element_blocks(const Mesh& mesh);
std::vector<fem::CubicBlock> cubic_element_blocks(const Mesh& mesh, const fem::CubicNodeMap& map);

}  // namespace omp

// Number of OpenMP threads the parallel kernels will use.
int thread_count();

}  // namespace specshape::kernels
