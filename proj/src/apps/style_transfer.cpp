#include <cmath>
#include <iomanip>
#include <ostream>

#include "specshape/apps.hpp"
#include "specshape/error.hpp"

namespace specshape {

nlohmann::json StyleTransferConfig::to_json() const { return {{"w", w}, {"steps", steps}, {"lr", lr}}; }

StyleTransferConfig StyleTransferConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("style transfer config must be a JSON object");
  StyleTransferConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "w") c.w = value.get<double>();
      else if (key == "steps") c.steps = value.get<int>();
      else if (key == "lr") c.lr = value.get<double>();
      else throw ConfigError("unknown style transfer key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("style transfer config: ") + e.what());
  }
  return c;
}

StyleTransferResult style_transfer(const ModelBundle& bundle, const std::vector<double>& spec_style,
                                   const Shape& shape_pose, const StyleTransferConfig& config) {
  if (!(config.w >= 0.0)) throw ConfigError("style transfer weight w must be nonnegative");
  if (config.steps < 1) throw ConfigError("style transfer steps must be positive");
  if (!(config.lr > 0.0)) throw ConfigError("style transfer lr must be positive");
  if (static_cast<int>(spec_style.size()) != bundle.k) {
    throw DataError("style spectrum has k = " + std::to_string(spec_style.size()) + " but the model was trained with k = " +
                    std::to_string(bundle.k));
  }

  StyleTransferResult out;
  out.initial = encode(bundle, shape_pose);
  const nn::Matrix<float> v_init = out.initial.transpose().cast<float>();
  nn::Matrix<float> target(1, bundle.k);
  for (int i = 0; i < bundle.k; ++i) target(0, i) = static_cast<float>(spec_style[i] / bundle.norm.eig_scale);

  const nn::Net<float>& rho = bundle.nets.rho;
  const double w = config.w;
  double last_alignment = 0.0;
  // g(v) in normalized units; fills the gradient when asked.
  auto objective = [&](const nn::Matrix<float>& v, nn::Matrix<float>* grad) {
    nn::Tape<float> tape;
    const nn::Matrix<float> r = rho.forward(v, nn::Mode::eval, grad ? &tape : nullptr);
    const Eigen::MatrixXd diff = r.cast<double>() - target.cast<double>();
    const Eigen::MatrixXd anchor = v.cast<double>() - v_init.cast<double>();
    last_alignment = diff.norm() * bundle.norm.eig_scale;
    if (grad) {
      *grad = rho.backward(tape, nn::Matrix<float>((2.0 * diff).cast<float>()), nullptr);
      *grad += (2.0 * w * anchor).cast<float>();
    }
    return diff.squaredNorm() + w * anchor.squaredNorm();
  };

  std::vector<nn::Matrix<float>> params{v_init};
  nn::Gradients<float> grads(1);
  double g = objective(params[0], &grads[0]);
  out.pose_gap = last_alignment;
  double best = g;
  double best_alignment = last_alignment;
  nn::Matrix<float> best_v = params[0];
  out.curve.push_back({0, best, best_alignment});

  nn::Adam<float> adam(config.lr);
  int rising = 0;
  for (int step = 1; step <= config.steps; ++step) {
    adam.step(params, grads);
    const double next = objective(params[0], &grads[0]);
    if (!std::isfinite(next)) {
      throw NumericalError("style transfer objective became non-finite at step " + std::to_string(step));
    }
    rising = next > g ? rising + 1 : 0;
    if (rising >= 50) {
      throw NumericalError("style transfer diverged: objective rose for 50 consecutive steps (now " +
                           std::to_string(next) + ", best " + std::to_string(best) + "); try a smaller lr");
    }
    g = next;
    if (g < best) {
      best = g;
      best_alignment = last_alignment;
      best_v = params[0];
    }
    out.curve.push_back({step, best, best_alignment});
  }

  out.latent = best_v.row(0).transpose().cast<double>();
  out.shape = decode(bundle, out.latent);
  return out;
}

void write_alignment_csv(const std::vector<AlignmentPoint>& curve, std::ostream& out) {
  out << "step,objective,alignment\n" << std::setprecision(9);
  for (const auto& p : curve) out << p.step << ',' << p.objective << ',' << p.alignment << '\n';
}

}  // namespace specshape
