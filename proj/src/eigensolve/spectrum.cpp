#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>

#include "specshape/eigensolve.hpp"
#include "specshape/error.hpp"

namespace specshape {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

Discretization disc_for(FemOrder order) {
  return order == FemOrder::cubic ? Discretization::cubic_fem : Discretization::linear_fem;
}

template <typename ShapeT, typename Assemble>
Spectrum cached_spectrum(const ShapeT& shape, int k, Discretization disc, SpectrumCache* cache,
                         const EigenOptions& options, Assemble&& assemble) {
  const std::uint64_t hash = shape_hash(shape);
  if (cache) {
    if (auto hit = cache->find(hash, disc, k)) return *hit;
  }
  Spectrum spectrum = smallest_k(assemble(shape), k, options).spectrum;
  if (cache) cache->store(hash, spectrum);
  return spectrum;
}

}  // namespace

void validate(const Spectrum& spectrum) {
  const auto& v = spectrum.values;
  if (v.empty()) throw DataError("spectrum is empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw DataError("spectrum value " + std::to_string(i) + " is not finite");
    if (i > 0 && v[i] < v[i - 1] - 1e-12) {
      throw DataError("spectrum decreases at index " + std::to_string(i));
    }
  }
  if (v.front() < -1e-8 * std::abs(v.back())) throw DataError("spectrum starts with a negative value");
}

nlohmann::json to_json(const Spectrum& spectrum) {
  return {{"k", spectrum.k()}, {"disc", to_string(spectrum.disc)}, {"tol", spectrum.tol},
          {"values", spectrum.values}};
}

Spectrum spectrum_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("values") || !j["values"].is_array()) {
    throw DataError("spectrum JSON needs a \"values\" array");
  }
  Spectrum s;
  try {
    s.values = j["values"].get<std::vector<double>>();
    if (j.contains("disc")) s.disc = discretization_from_string(j["disc"].get<std::string>());
    if (j.contains("tol")) s.tol = j["tol"].get<double>();
    if (j.contains("k") && j["k"].get<int>() != s.k()) {
      throw DataError("spectrum JSON: k = " + std::to_string(j["k"].get<int>()) + " but " +
                      std::to_string(s.k()) + " values given");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("spectrum JSON: ") + e.what());
  }
  validate(s);
  return s;
}

Spectrum load_spectrum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return spectrum_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

void save_spectrum(const Spectrum& spectrum, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << to_json(spectrum).dump() << '\n';
}

std::string to_string(FemOrder order) { return order == FemOrder::cubic ? "cubic" : "linear"; }

FemOrder fem_order_from_string(const std::string& s) {
  if (s == "cubic" || s == "cubic_fem") return FemOrder::cubic;
  if (s == "linear" || s == "linear_fem") return FemOrder::linear;
  throw ConfigError("unknown FEM order '" + s + "' (expected linear or cubic)");
}

std::uint64_t shape_hash(const Mesh& mesh) {
  std::uint64_t h = kFnvOffset;
  const std::int64_t dims[2] = {mesh.vertices.rows(), mesh.faces.rows()};
  h = fnv1a(dims, sizeof dims, h);
  h = fnv1a(mesh.vertices.data(), sizeof(double) * mesh.vertices.size(), h);
  return fnv1a(mesh.faces.data(), sizeof(int) * mesh.faces.size(), h);
}

std::uint64_t shape_hash(const Contour& contour) {
  std::uint64_t h = fnv1a("contour", 7, kFnvOffset);
  const std::int64_t n = contour.points.rows();
  h = fnv1a(&n, sizeof n, h);
  return fnv1a(contour.points.data(), sizeof(double) * contour.points.size(), h);
}

SpectrumCache::SpectrumCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(*directory_);
}

std::filesystem::path SpectrumCache::file_for(std::uint64_t hash, Discretization disc, int k) const {
  char name[96];
  std::snprintf(name, sizeof name, "%016llx_%s_k%d.json", static_cast<unsigned long long>(hash),
                to_string(disc).c_str(), k);
  return *directory_ / name;
}

std::optional<Spectrum> SpectrumCache::find(std::uint64_t hash, Discretization disc, int k) {
  std::lock_guard lock(mutex_);
  const Key key{hash, static_cast<int>(disc), k};
  if (auto it = memory_.find(key); it != memory_.end()) {
    ++hits_;
    return it->second;
  }
  if (directory_) {
    const auto path = file_for(hash, disc, k);
    if (std::filesystem::exists(path)) {
      Spectrum s = load_spectrum(path);
      memory_.emplace(key, s);
      ++hits_;
      return s;
    }
  }
  ++misses_;
  return std::nullopt;
}

void SpectrumCache::store(std::uint64_t hash, const Spectrum& spectrum) {
  std::lock_guard lock(mutex_);
  memory_[Key{hash, static_cast<int>(spectrum.disc), spectrum.k()}] = spectrum;
  if (directory_) {
    // JSON numbers are written with round-trip precision, so reloads are bit-exact.
    save_spectrum(spectrum, file_for(hash, spectrum.disc, spectrum.k()));
  }
}

std::size_t SpectrumCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t SpectrumCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

Spectrum spectrum_of(const Mesh& mesh, int k, FemOrder order, SpectrumCache* cache, const EigenOptions& options) {
  return cached_spectrum(mesh, k, disc_for(order), cache, options, [order](const Mesh& m) {
    return order == FemOrder::cubic ? assemble_cubic_fem(m) : assemble_linear_fem(m);
  });
}

Spectrum spectrum_of(const Contour& contour, int k, SpectrumCache* cache, const EigenOptions& options) {
  return cached_spectrum(contour, k, Discretization::contour_fem, cache, options,
                         [](const Contour& c) { return assemble_contour_fem(c); });
}

Spectrum spectrum_of(const Shape& shape, int k, FemOrder order, SpectrumCache* cache, const EigenOptions& options) {
  if (const auto* mesh = std::get_if<Mesh>(&shape)) return spectrum_of(*mesh, k, order, cache, options);
  if (const auto* contour = std::get_if<Contour>(&shape)) return spectrum_of(*contour, k, cache, options);
  throw ConfigError("point clouds have no Laplacian here; spectra come from meshes or contours");
}

namespace kernels::serial {

std::vector<Spectrum> spectra(const std::vector<Shape>& shapes, int k, FemOrder order, SpectrumCache* cache) {
  std::vector<Spectrum> out(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) out[i] = spectrum_of(shapes[i], k, order, cache);
  return out;
}

}  // namespace kernels::serial

namespace kernels::omp {

std::vector<Spectrum> spectra(const std::vector<Shape>& shapes, int k, FemOrder order, SpectrumCache* cache) {
  const long count = static_cast<long>(shapes.size());
  std::vector<Spectrum> out(shapes.size());
  std::vector<std::exception_ptr> errors(shapes.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    try {
      out[i] = spectrum_of(shapes[i], k, order, cache);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace kernels::omp

}  // namespace specshape
