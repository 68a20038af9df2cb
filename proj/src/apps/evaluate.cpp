#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "specshape/apps.hpp"
#include "specshape/error.hpp"

namespace specshape {

namespace {

std::vector<double> spectrum_row(const Dataset& data, int i) {
  std::vector<double> out(data.k());
  for (int j = 0; j < data.k(); ++j) out[j] = data.spectra(i, j);
  return out;
}

void require_dense(const Dataset& data, const char* what) {
  if (data.input != InputKind::dense_template) throw ConfigError(std::string(what) + " needs a dense template dataset");
  if (data.size() == 0) throw DataError(std::string(what) + " needs at least one held-out shape");
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

double reconstruction_mse(const Eigen::RowVectorXd& predicted, const Eigen::RowVectorXd& truth, int n) {
  if (predicted.size() != truth.size()) throw DataError("reconstruction and ground truth differ in length");
  return (predicted - truth).squaredNorm() / n;
}

std::vector<double> spectrum_reconstruction_errors(const ModelBundle& bundle, const Dataset& test) {
  require_dense(test, "reconstruction error");
  if (test.k() != bundle.k) throw ConfigError("test spectra have k = " + std::to_string(test.k()) + ", model k = " +
                                              std::to_string(bundle.k));
  std::vector<double> out(test.size());
  for (int i = 0; i < test.size(); ++i) {
    const auto rec = decode_flat(bundle, spec_to_latent(bundle, spectrum_row(test, i)));
    out[i] = reconstruction_mse(rec, test.coords.row(i), test.n);
  }
  return out;
}

std::vector<double> nearest_neighbour_errors(const Dataset& train, const Dataset& test, double eig_scale) {
  require_dense(test, "nearest-neighbour error");
  const SpectrumIndex index(train.spectra, eig_scale);
  std::vector<double> out(test.size());
  for (int i = 0; i < test.size(); ++i) {
    const auto hit = index.nearest(spectrum_row(test, i));
    out[i] = reconstruction_mse(train.coords.row(hit.index), test.coords.row(i), test.n);
  }
  return out;
}

Table1 evaluate_table1(const ModelBundle& ours, const ModelBundle& no_rho, const Dataset& train, const Dataset& test) {
  Table1 t;
  t.count = test.size();
  t.ours = mean(spectrum_reconstruction_errors(ours, test));
  t.no_rho = mean(spectrum_reconstruction_errors(no_rho, test));
  t.nn = mean(nearest_neighbour_errors(train, test, ours.norm.eig_scale));
  return t;
}

void write_table1(const Table1& table, std::ostream& out) {
  out << "method            mse\n" << std::scientific << std::setprecision(4);
  out << "ours              " << table.ours << '\n';
  out << "ours-without-rho  " << table.no_rho << '\n';
  out << "nn                " << table.nn << '\n';
  out << std::defaultfloat;
}

double cycle_error(const ModelBundle& bundle, const Dataset& test) {
  if (test.size() == 0) throw DataError("cycle error needs at least one held-out spectrum");
  double total = 0.0;
  for (int i = 0; i < test.size(); ++i) {
    const auto s = spectrum_row(test, i);
    const auto r = latent_to_spec(bundle, spec_to_latent(bundle, s));
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      num += (r[j] - s[j]) * (r[j] - s[j]);
      den += s[j] * s[j];
    }
    total += std::sqrt(num / den);
  }
  return total / test.size();
}

std::vector<double> super_resolution_errors(const ModelBundle& bundle, const Dataset& test, double fraction,
                                            FemOrder order, SpectrumCache* cache) {
  require_dense(test, "super-resolution error");
  if (test.faces.rows() == 0) throw ConfigError("super-resolution error needs a mesh template");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("decimation fraction must lie in (0, 1]");
  const int target = std::max(4, static_cast<int>(std::lround(fraction * test.n)));
  std::vector<double> out(test.size());
  for (int i = 0; i < test.size(); ++i) {
    const Mesh full = std::get<Mesh>(unflatten(test.coords.row(i), test.dim, test.faces));
    const Mesh low = target >= test.n ? full : decimate(full, target);
    const auto sr = super_resolve(bundle, low, order, cache);
    out[i] = reconstruction_mse(flatten(sr.result.shape), test.coords.row(i), test.n);
  }
  return out;
}

}  // namespace specshape
