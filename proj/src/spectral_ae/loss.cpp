#include "specshape/error.hpp"
#include "specshape/spectral_ae.hpp"

namespace specshape {

template <typename T>
LossTerms compute_loss(const ModelNets<T>& nets, InputKind input, int n, const Batch<T>& batch,
                       const LossOptions& options, nn::Mode mode, std::vector<nn::Gradients<T>>* grads,
                       std::vector<nn::Tape<T>>* tapes) {
  const int B = batch.shapes.batch();
  const int k = static_cast<int>(batch.spectra.cols());
  if (B < 1) throw DataError("loss needs a nonempty batch");
  if (batch.spectra.rows() != B) throw DataError("batch has " + std::to_string(B) + " shapes but " +
                                                 std::to_string(batch.spectra.rows()) + " spectra");
  if (k != nets.pi.spec().input_dim()) {
    throw ConfigError("spectra have k = " + std::to_string(k) + " but the model expects k = " +
                      std::to_string(nets.pi.spec().input_dim()));
  }

  std::vector<nn::Tape<T>> local;
  std::vector<nn::Tape<T>>& tp = tapes ? *tapes : local;
  tp.assign(4, nn::Tape<T>{});
  const bool want = grads != nullptr;

  const nn::Matrix<T> z = nets.encoder.forward(batch.shapes, mode, &tp[0]).values;
  const nn::Matrix<T> xr = nets.decoder.forward(z, mode, &tp[1]);
  const nn::Matrix<T> p = nets.pi.forward(batch.spectra, mode, &tp[2]);

  LossTerms terms;
  nn::Matrix<T> d_xr;
  if (input == InputKind::dense_template) {
    terms.recon = nn::mse_loss<T>(xr, batch.shapes.values, n, want ? &d_xr : nullptr);
  } else {
    const int dim = static_cast<int>(batch.shapes.values.cols());
    if (want) d_xr.setZero(xr.rows(), xr.cols());
    for (int b = 0; b < B; ++b) {
      const nn::Matrix<T> pred = Eigen::Map<const nn::Matrix<T>>(xr.row(b).data(), n, dim);
      const int o0 = batch.shapes.offsets[b], o1 = batch.shapes.offsets[b + 1];
      const nn::Matrix<T> cloud = batch.shapes.values.middleRows(o0, o1 - o0);
      nn::Matrix<T> g;
      terms.recon += nn::chamfer<T>(pred, cloud, want ? &g : nullptr) / B;
      if (want) d_xr.row(b) = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(g.data(), g.size()) / T(B);
    }
  }

  const double norm = 1.0 / (static_cast<double>(B) * k);
  const Eigen::MatrixXd diff_p = p.template cast<double>() - z.template cast<double>();
  double spectral = diff_p.squaredNorm();
  nn::Matrix<T> r;
  Eigen::MatrixXd diff_r;
  if (options.use_rho) {
    r = nets.rho.forward(z, mode, &tp[3]);
    diff_r = r.template cast<double>() - batch.spectra.template cast<double>();
    spectral += diff_r.squaredNorm();
  }
  terms.spectral = norm * spectral;
  terms.total = terms.recon + options.alpha * terms.spectral;

  if (want) {
    grads->resize(4);
    (*grads)[0] = nets.encoder.zero_gradients();
    (*grads)[1] = nets.decoder.zero_gradients();
    (*grads)[2] = nets.pi.zero_gradients();
    (*grads)[3] = nets.rho.zero_gradients();
    nn::Matrix<T> d_z = nets.decoder.backward(tp[1], d_xr, &(*grads)[1]);
    const nn::Matrix<T> d_p = (2.0 * options.alpha * norm * diff_p).template cast<T>();
    nets.pi.backward(tp[2], d_p, &(*grads)[2]);
    d_z -= d_p;
    if (options.use_rho) {
      const nn::Matrix<T> d_r = (2.0 * options.alpha * norm * diff_r).template cast<T>();
      d_z += nets.rho.backward(tp[3], d_r, &(*grads)[3]);
    }
    nets.encoder.backward(tp[0], d_z, &(*grads)[0]);
  }
  return terms;
}

template LossTerms compute_loss<float>(const ModelNets<float>&, InputKind, int, const Batch<float>&,
                                       const LossOptions&, nn::Mode, std::vector<nn::Gradients<float>>*,
                                       std::vector<nn::Tape<float>>*);
template LossTerms compute_loss<double>(const ModelNets<double>&, InputKind, int, const Batch<double>&,
                                        const LossOptions&, nn::Mode, std::vector<nn::Gradients<double>>*,
                                        std::vector<nn::Tape<double>>*);

}  // namespace specshape
