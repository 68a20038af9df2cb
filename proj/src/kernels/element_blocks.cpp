#include <exception>

#include <omp.h>

#include "specshape/kernels.hpp"

namespace specshape::kernels {

namespace {

// Runs body(i) for i in [0, count) in parallel and rethrows the exception of
// the lowest failing index, so error reporting matches the serial loop.
template <typename Body>
void parallel_for_rethrow(int count, Body&& body) {
  std::vector<std::exception_ptr> errors(count);
  bool any = false;
#pragma omp parallel for schedule(static) reduction(|| : any)
  for (int i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
      any = true;
    }
  }
  if (!any) return;
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

namespace serial {

std::vector<fem::LinearBlock> linear_element_blocks(const Mesh& mesh) {
  std::vector<fem::LinearBlock> blocks(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) blocks[f] = fem::linear_element(mesh, f);
  return blocks;
}

std::vector<fem::CubicBlock> cubic_element_blocks(const Mesh& mesh, const fem::CubicNodeMap& map) {
  std::vector<fem::CubicBlock> blocks(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) blocks[f] = fem::cubic_element(mesh, map, f);
  return blocks;
}

}  // namespace serial

namespace omp {

std::vector<fem::LinearBlock> linear_element_blocks(const Mesh& mesh) {
  std::vector<fem::LinearBlock> blocks(mesh.num_faces());
  parallel_for_rethrow(mesh.num_faces(), [&](int f) { blocks[f] = fem::linear_element(mesh, f); });
  return blocks;
}

std::vector<fem::CubicBlock> cubic_element_blocks(const Mesh& mesh, const fem::CubicNodeMap& map) {
  std::vector<fem::CubicBlock> blocks(mesh.num_faces());
  parallel_for_rethrow(mesh.num_faces(), [&](int f) { blocks[f] = fem::cubic_element(mesh, map, f); });
  return blocks;
}

}  // namespace omp

int thread_count() { return omp_get_max_threads(); }

}  // namespace specshape::kernels
