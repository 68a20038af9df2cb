#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "specshape/error.hpp"
#include "specshape/random.hpp"
#include "specshape/spectral_ae.hpp"

namespace specshape {

namespace {

// Network-unit copies of a dataset.
struct NormalizedData {
  nn::Matrix<float> coords;               // dense
  std::vector<nn::Matrix<float>> clouds;  // point clouds
  nn::Matrix<float> spectra;
};

NormalizedData normalize(const Dataset& data, const Normalization& norm) {
  NormalizedData out;
  if (data.input == InputKind::dense_template) {
    out.coords.resize(data.coords.rows(), data.coords.cols());
    for (Eigen::Index r = 0; r < data.coords.rows(); ++r) {
      for (Eigen::Index c = 0; c < data.coords.cols(); ++c) {
        out.coords(r, c) = static_cast<float>((data.coords(r, c) - norm.center[c % data.dim]) / norm.coord_scale);
      }
    }
  } else {
    for (const auto& cloud : data.clouds) {
      nn::Matrix<float> m(cloud.rows(), 3);
      for (Eigen::Index r = 0; r < cloud.rows(); ++r) {
        for (int c = 0; c < 3; ++c) m(r, c) = static_cast<float>((cloud(r, c) - norm.center[c]) / norm.coord_scale);
      }
      out.clouds.push_back(std::move(m));
    }
  }
  out.spectra = (data.spectra / norm.eig_scale).cast<float>();
  return out;
}

Batch<float> make_batch(const NormalizedData& nd, InputKind input, const std::vector<int>& rows) {
  Batch<float> batch;
  const auto count = static_cast<Eigen::Index>(rows.size());
  batch.spectra.resize(count, nd.spectra.cols());
  for (Eigen::Index i = 0; i < count; ++i) batch.spectra.row(i) = nd.spectra.row(rows[i]);
  if (input == InputKind::dense_template) {
    batch.shapes.values.resize(count, nd.coords.cols());
    for (Eigen::Index i = 0; i < count; ++i) batch.shapes.values.row(i) = nd.coords.row(rows[i]);
  } else {
    int total = 0;
    batch.shapes.offsets.push_back(0);
    for (int r : rows) {
      total += static_cast<int>(nd.clouds[r].rows());
      batch.shapes.offsets.push_back(total);
    }
    batch.shapes.values.resize(total, 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      batch.shapes.values.middleRows(batch.shapes.offsets[i], nd.clouds[rows[i]].rows()) = nd.clouds[rows[i]];
    }
  }
  return batch;
}

}  // namespace

nlohmann::json TrainConfig::to_json() const {
  return {{"batch", batch}, {"lr", lr},   {"epochs", epochs}, {"seed", seed},
          {"alpha", alpha}, {"k", k},     {"use_rho", use_rho}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "batch") c.batch = value.get<int>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "k") c.k = value.get<int>();
      else if (key == "use_rho") c.use_rho = value.get<bool>();
      else throw ConfigError("unknown training key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  if (c.batch < 2) throw ConfigError("batch must be at least 2 (batchnorm needs batch statistics)");
  if (!(c.lr > 0.0)) throw ConfigError("lr must be positive");
  if (c.epochs < 1) throw ConfigError("epochs must be positive");
  if (!(c.alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  if (c.k < 1) throw ConfigError("k must be positive");
  return c;
}

void write_training_csv(const std::vector<EpochLog>& log, std::ostream& out) {
  out << "epoch,loss,loss_x,loss_lambda\n" << std::setprecision(9);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.loss.total << ',' << e.loss.recon << ',' << e.loss.spectral << '\n';
  }
}

TrainResult train(ModelBundle model, const Dataset& data, const TrainConfig& config, const TrainOptions& options) {
  if (data.k() != model.k || config.k != model.k) {
    throw ConfigError("k mismatch: model k = " + std::to_string(model.k) + ", data k = " + std::to_string(data.k()) +
                      ", config k = " + std::to_string(config.k));
  }
  if (data.input != model.input) throw ConfigError("dataset and model disagree on the input kind");
  if (model.input == InputKind::dense_template && (data.n != model.n || data.dim != model.dim)) {
    throw ConfigError("dataset template (" + std::to_string(data.n) + " points) does not match the model (" +
                      std::to_string(model.n) + ")");
  }
  if (data.size() < 2) throw DataError("training needs at least two shapes");
  if (config.batch < 2) throw ConfigError("batch must be at least 2");

  model.norm = fit_normalization(data);
  model.alpha = config.alpha;
  if (model.input == InputKind::dense_template) model.template_faces = data.faces;
  const NormalizedData nd = normalize(data, model.norm);
  const LossOptions loss_opt{config.alpha, config.use_rho};

  std::vector<nn::Adam<float>> adam(4, nn::Adam<float>(config.lr));
  auto params = [&](int i) -> std::vector<nn::Matrix<float>>& {
    switch (i) {
      case 0: return model.nets.encoder.parameters();
      case 1: return model.nets.decoder.parameters();
      case 2: return model.nets.pi.parameters();
      default: return model.nets.rho.parameters();
    }
  };

  TrainResult result;
  ModelNets<float> last_good = model.nets;
  std::vector<int> order(data.size());
  std::vector<nn::Gradients<float>> grads;
  std::vector<nn::Tape<float>> tapes;
  double best_smoothed = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    LossTerms sum;
    double seen = 0.0;
    for (int start = 0; start < data.size(); start += config.batch) {
      const int size = std::min(config.batch, data.size() - start);
      if (size < 2) continue;  // a trailing single sample cannot feed batchnorm
      const std::vector<int> rows(order.begin() + start, order.begin() + start + size);
      const Batch<float> batch = make_batch(nd, model.input, rows);
      const LossTerms t = compute_loss(model.nets, model.input, model.n, batch, loss_opt, nn::Mode::train, &grads, &tapes);
      if (!std::isfinite(t.total)) {
        std::string where;
        if (options.rescue_checkpoint) {
          ModelBundle rescue = model;
          rescue.nets = last_good;
          rescue.info["rescued_at_epoch"] = epoch;
          save_bundle(rescue, *options.rescue_checkpoint);
          where = "; last finite state saved to " + options.rescue_checkpoint->string();
        }
        throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch) + " (l_X = " +
                             std::to_string(t.recon) + ", l_lambda = " + std::to_string(t.spectral) + ")" + where);
      }
      for (int i = 0; i < 4; ++i) adam[i].step(params(i), grads[i]);
      model.nets.encoder.update_running_stats(tapes[0]);
      model.nets.pi.update_running_stats(tapes[2]);
      if (config.use_rho) model.nets.rho.update_running_stats(tapes[3]);
      sum.total += t.total * size;
      sum.recon += t.recon * size;
      sum.spectral += t.spectral * size;
      seen += size;
    }
    EpochLog entry{epoch, {sum.total / seen, sum.recon / seen, sum.spectral / seen}};
    result.log.push_back(entry);
    last_good = model.nets;

    // Divergence guard on a 10-epoch moving average.
    if (result.log.size() >= 10) {
      double smoothed = 0.0;
      for (std::size_t i = result.log.size() - 10; i < result.log.size(); ++i) smoothed += result.log[i].loss.total;
      smoothed /= 10.0;
      best_smoothed = std::min(best_smoothed, smoothed);
      if (smoothed > 10.0 * best_smoothed) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": smoothed loss " +
                             std::to_string(smoothed) + " vs best " + std::to_string(best_smoothed) +
                             "; try a smaller lr");
      }
    }
    if (options.on_epoch && !options.on_epoch(entry)) break;
  }

  model.info["train"] = config.to_json();
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    model.info["final_loss"] = {{"epoch", last.epoch}, {"loss", last.loss.total}, {"loss_x", last.loss.recon},
                                {"loss_lambda", last.loss.spectral}};
  }
  result.bundle = std::move(model);
  return result;
}

}  // namespace specshape
