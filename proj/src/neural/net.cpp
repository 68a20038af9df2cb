#include <cmath>

#include "specshape/error.hpp"
#include "specshape/neural.hpp"
#include "specshape/random.hpp"

namespace specshape::nn {

namespace {

bool has_weights(LayerKind k) { return k == LayerKind::dense || k == LayerKind::shared_dense; }

std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return "(" + std::to_string(rows) + " x " + std::to_string(cols) + ")";
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::shared_dense: return "shared_dense";
    case LayerKind::tanh: return "tanh";
    case LayerKind::selu: return "selu";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::maxpool_points: return "maxpool_points";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& s) {
  for (LayerKind k : {LayerKind::dense, LayerKind::shared_dense, LayerKind::tanh, LayerKind::selu,
                      LayerKind::batchnorm, LayerKind::maxpool_points}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown layer kind '" + s + "'");
}

int NetSpec::input_dim() const { return layers.empty() ? 0 : layers.front().in; }
int NetSpec::output_dim() const { return layers.empty() ? 0 : layers.back().out; }

bool NetSpec::takes_points() const {
  for (const auto& l : layers) {
    if (l.kind == LayerKind::maxpool_points) return true;
  }
  return false;
}

void NetSpec::validate() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  bool pooled = !takes_points();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    if (l.in <= 0 || l.out <= 0) throw ConfigError(where + " has non-positive dimensions");
    if (!has_weights(l.kind) && l.in != l.out) throw ConfigError(where + " must keep its width");
    if (i > 0 && layers[i - 1].out != l.in) {
      throw ConfigError(where + " expects width " + std::to_string(l.in) + " but receives " +
                        std::to_string(layers[i - 1].out));
    }
    if (l.kind == LayerKind::maxpool_points) {
      if (pooled) throw ConfigError(where + ": only one pooling layer is allowed");
      pooled = true;
    }
    if (l.kind == LayerKind::shared_dense && pooled) throw ConfigError(where + " must come before pooling");
    if (l.kind == LayerKind::dense && !pooled) throw ConfigError(where + ": use shared_dense before pooling");
  }
}

nlohmann::json to_json(const NetSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) layers.push_back({{"kind", to_string(l.kind)}, {"in", l.in}, {"out", l.out}});
  return layers;
}

NetSpec netspec_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw DataError("network spec must be a JSON array of layers");
  NetSpec spec;
  try {
    for (const auto& l : j) {
      spec.layers.push_back({layer_kind_from_string(l.at("kind").get<std::string>()), l.at("in").get<int>(),
                             l.at("out").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("network spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

NetSpec mlp(const std::vector<int>& dims, LayerKind activation, bool batchnorm, bool activate_last) {
  if (dims.size() < 2) throw ConfigError("mlp needs at least two widths");
  NetSpec spec;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    spec.layers.push_back({LayerKind::dense, dims[i], dims[i + 1]});
    const bool last = i + 2 == dims.size();
    if (!last && batchnorm) spec.layers.push_back({LayerKind::batchnorm, dims[i + 1], dims[i + 1]});
    if (!last || activate_last) spec.layers.push_back({activation, dims[i + 1], dims[i + 1]});
  }
  return spec;
}

// ---------------------------------------------------------------------------

template <typename T>
Net<T>::Net(NetSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
  spec_.validate();
  Rng rng(seed);
  for (const auto& l : spec_.layers) {
    layer_param_.push_back(-1);
    layer_buffer_.push_back(-1);
    if (has_weights(l.kind)) {
      layer_param_.back() = static_cast<int>(params_.size());
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
      Matrix<T> w(l.in, l.out), b(1, l.out);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
      for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
      params_.push_back(std::move(w));
      params_.push_back(std::move(b));
    } else if (l.kind == LayerKind::batchnorm) {
      layer_param_.back() = static_cast<int>(params_.size());
      layer_buffer_.back() = static_cast<int>(buffers_.size());
      params_.push_back(Matrix<T>::Ones(1, l.in));
      params_.push_back(Matrix<T>::Zero(1, l.in));
      buffers_.push_back(Matrix<T>::Zero(1, l.in));
      buffers_.push_back(Matrix<T>::Ones(1, l.in));
    }
  }
}

template <typename T>
std::vector<std::string> Net<T>::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    if (has_weights(spec_.layers[i].kind)) {
      names.push_back(p + "weight");
      names.push_back(p + "bias");
    } else if (spec_.layers[i].kind == LayerKind::batchnorm) {
      names.push_back(p + "gamma");
      names.push_back(p + "beta");
    }
  }
  return names;
}

template <typename T>
std::vector<std::string> Net<T>::buffer_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (spec_.layers[i].kind == LayerKind::batchnorm) {
      names.push_back("layer" + std::to_string(i) + ".running_mean");
      names.push_back("layer" + std::to_string(i) + ".running_var");
    }
  }
  return names;
}

template <typename T>
std::size_t Net<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
  return n;
}

template <typename T>
Gradients<T> Net<T>::zero_gradients() const {
  Gradients<T> g;
  for (const auto& p : params_) g.push_back(Matrix<T>::Zero(p.rows(), p.cols()));
  return g;
}

template <typename T>
void Net<T>::check_input(const Tensor<T>& x) const {
  if (x.values.cols() != spec_.input_dim()) {
    throw DataError("input has shape " + shape_str(x.values.rows(), x.values.cols()) +
                    " but the network expects (* x " + std::to_string(spec_.input_dim()) + ")");
  }
  if (spec_.takes_points()) {
    if (x.offsets.size() < 2 || x.offsets.front() != 0 || x.offsets.back() != x.values.rows()) {
      throw DataError("point-set input needs offsets from 0 to the row count " + std::to_string(x.values.rows()));
    }
    for (std::size_t b = 0; b + 1 < x.offsets.size(); ++b) {
      if (x.offsets[b + 1] <= x.offsets[b]) throw DataError("point set " + std::to_string(b) + " is empty");
    }
  }
}

template <typename T>
Matrix<T> Net<T>::forward(const Matrix<T>& x, Mode mode, Tape<T>* tape) const {
  return forward(Tensor<T>{x, {}}, mode, tape).values;
}

template <typename T>
Tensor<T> Net<T>::forward(const Tensor<T>& x, Mode mode, Tape<T>* tape) const {
  check_input(x);
  const std::size_t count = spec_.layers.size();
  if (tape) {
    *tape = Tape<T>{};
    tape->mode = mode;
    tape->batch_mean.resize(count);
    tape->batch_var.resize(count);
    tape->argmax.resize(count);
  }
  Matrix<T> cur = x.values;
  std::vector<int> offsets = x.offsets;

  for (std::size_t l = 0; l < count; ++l) {
    const LayerSpec& layer = spec_.layers[l];
    if (tape) {
      tape->inputs.push_back(cur);
      tape->offsets.push_back(offsets);
    }
    Matrix<T> next;
    switch (layer.kind) {
      case LayerKind::dense:
      case LayerKind::shared_dense: {
        const Matrix<T>& w = params_[layer_param_[l]];
        const Matrix<T>& b = params_[layer_param_[l] + 1];
        if (mode == Mode::train) {
          next.noalias() = cur * w;
          next.rowwise() += b.row(0);
        } else {
          // Aligned temporaries per row: identical arithmetic for every row
          // regardless of its position or the batch size.
          next.resize(cur.rows(), layer.out);
          RowVector<T> xr(layer.in), yr(layer.out);
          for (Eigen::Index r = 0; r < cur.rows(); ++r) {
            xr = cur.row(r);
            yr.noalias() = xr * w;
            yr += b.row(0);
            next.row(r) = yr;
          }
        }
        break;
      }
      case LayerKind::tanh:
        next = cur.array().tanh().matrix();
        break;
      case LayerKind::selu:
        next = cur.unaryExpr([](T v) {
          return v > T(0) ? T(kSeluLambda) * v : T(kSeluLambda * kSeluAlpha) * (std::exp(v) - T(1));
        });
        break;
      case LayerKind::batchnorm: {
        const RowVector<T> gamma = params_[layer_param_[l]].row(0);
        const RowVector<T> beta = params_[layer_param_[l] + 1].row(0);
        if (mode == Mode::train) {
          if (cur.rows() < 2) {
            throw DataError("batchnorm in train mode needs at least 2 rows per batch (got " +
                            std::to_string(cur.rows()) + "); use eval mode for single samples");
          }
          const Eigen::MatrixXd xd = cur.template cast<double>();
          const Eigen::RowVectorXd mean = xd.colwise().mean();
          const Eigen::MatrixXd centered = xd.rowwise() - mean;
          const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
          const Eigen::RowVectorXd inv_std = (var.array() + kBatchnormEps).rsqrt();
          const Eigen::MatrixXd xhat = centered.array().rowwise() * inv_std.array();
          next = ((xhat.array().rowwise() * gamma.template cast<double>().array()).rowwise() +
                  beta.template cast<double>().array())
                     .matrix()
                     .template cast<T>();
          if (tape) {
            tape->batch_mean[l] = mean.template cast<T>();
            tape->batch_var[l] = var.template cast<T>();
          }
        } else {
          const RowVector<T> mean = buffers_[layer_buffer_[l]].row(0);
          const RowVector<T> var = buffers_[layer_buffer_[l] + 1].row(0);
          const RowVector<T> scale = gamma.array() / (var.array() + T(kBatchnormEps)).sqrt();
          next = ((cur.rowwise() - mean).array().rowwise() * scale.array()).rowwise() + beta.array();
        }
        break;
      }
      case LayerKind::maxpool_points: {
        const int batch = static_cast<int>(offsets.size()) - 1;
        next.resize(batch, layer.in);
        std::vector<int> arg(static_cast<std::size_t>(batch) * layer.in);
        for (int b = 0; b < batch; ++b) {
          for (int c = 0; c < layer.in; ++c) {
            int best = offsets[b];
            for (int r = offsets[b] + 1; r < offsets[b + 1]; ++r) {
              if (cur(r, c) > cur(best, c)) best = r;
            }
            next(b, c) = cur(best, c);
            arg[static_cast<std::size_t>(b) * layer.in + c] = best;
          }
        }
        if (tape) tape->argmax[l] = std::move(arg);
        offsets.clear();
        break;
      }
    }
    cur = std::move(next);
    if (tape) tape->outputs.push_back(cur);
  }
  return {std::move(cur), std::move(offsets)};
}

template <typename T>
Matrix<T> Net<T>::backward(const Tape<T>& tape, const Matrix<T>& d_out, Gradients<T>* grads) const {
  const std::size_t count = spec_.layers.size();
  if (tape.inputs.size() != count) throw ConfigError("tape does not belong to this network");
  if (d_out.rows() != tape.outputs.back().rows() || d_out.cols() != tape.outputs.back().cols()) {
    throw DataError("output gradient has shape " + shape_str(d_out.rows(), d_out.cols()) + " but output is " +
                    shape_str(tape.outputs.back().rows(), tape.outputs.back().cols()));
  }
  if (grads && grads->size() != params_.size()) throw ConfigError("gradient buffer does not match the network");

  Matrix<T> d = d_out;
  for (std::size_t li = count; li-- > 0;) {
    const LayerSpec& layer = spec_.layers[li];
    const Matrix<T>& in = tape.inputs[li];
    Matrix<T> d_in;
    switch (layer.kind) {
      case LayerKind::dense:
      case LayerKind::shared_dense: {
        const Matrix<T>& w = params_[layer_param_[li]];
        if (grads) {
          (*grads)[layer_param_[li]].noalias() += in.transpose() * d;
          (*grads)[layer_param_[li] + 1] += d.colwise().sum();
        }
        d_in.noalias() = d * w.transpose();
        break;
      }
      case LayerKind::tanh:
        d_in = (d.array() * (T(1) - tape.outputs[li].array().square())).matrix();
        break;
      case LayerKind::selu:
        d_in = d.binaryExpr(in, [](T g, T v) {
          return g * (v > T(0) ? T(kSeluLambda) : T(kSeluLambda * kSeluAlpha) * std::exp(v));
        });
        break;
      case LayerKind::batchnorm: {
        const Eigen::RowVectorXd gamma = params_[layer_param_[li]].row(0).template cast<double>();
        const Eigen::MatrixXd dd = d.template cast<double>();
        const Eigen::MatrixXd xd = in.template cast<double>();
        if (tape.mode == Mode::train) {
          const Eigen::RowVectorXd mean = tape.batch_mean[li].template cast<double>();
          const Eigen::RowVectorXd var = tape.batch_var[li].template cast<double>();
          const Eigen::RowVectorXd inv_std = (var.array() + kBatchnormEps).rsqrt();
          const Eigen::MatrixXd xhat = (xd.rowwise() - mean).array().rowwise() * inv_std.array();
          if (grads) {
            (*grads)[layer_param_[li]] += (dd.array() * xhat.array()).colwise().sum().matrix().template cast<T>();
            (*grads)[layer_param_[li] + 1] += dd.colwise().sum().template cast<T>();
          }
          const Eigen::MatrixXd dxhat = dd.array().rowwise() * gamma.array();
          const double n = static_cast<double>(xd.rows());
          const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
          const Eigen::RowVectorXd sum_dx = (dxhat.array() * xhat.array()).colwise().sum();
          const Eigen::MatrixXd centered =
              (n * dxhat).rowwise() - sum_d - (xhat.array().rowwise() * sum_dx.array()).matrix();
          d_in = (centered.array().rowwise() * (inv_std.array() / n)).matrix().template cast<T>();
        } else {
          const Eigen::RowVectorXd mean = buffers_[layer_buffer_[li]].row(0).template cast<double>();
          const Eigen::RowVectorXd var = buffers_[layer_buffer_[li] + 1].row(0).template cast<double>();
          const Eigen::RowVectorXd inv_std = (var.array() + kBatchnormEps).rsqrt();
          if (grads) {
            const Eigen::MatrixXd xhat = (xd.rowwise() - mean).array().rowwise() * inv_std.array();
            (*grads)[layer_param_[li]] += (dd.array() * xhat.array()).colwise().sum().matrix().template cast<T>();
            (*grads)[layer_param_[li] + 1] += dd.colwise().sum().template cast<T>();
          }
          d_in = (dd.array().rowwise() * (gamma.array() * inv_std.array())).matrix().template cast<T>();
        }
        break;
      }
      case LayerKind::maxpool_points: {
        d_in = Matrix<T>::Zero(in.rows(), in.cols());
        const auto& arg = tape.argmax[li];
        for (Eigen::Index b = 0; b < d.rows(); ++b) {
          for (int c = 0; c < layer.in; ++c) d_in(arg[static_cast<std::size_t>(b) * layer.in + c], c) += d(b, c);
        }
        break;
      }
    }
    d = std::move(d_in);
  }
  return d;
}

template <typename T>
void Net<T>::update_running_stats(const Tape<T>& tape, double momentum) {
  if (tape.mode != Mode::train) return;
  for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
    if (spec_.layers[l].kind != LayerKind::batchnorm || tape.batch_mean[l].size() == 0) continue;
    auto& mean = buffers_[layer_buffer_[l]];
    auto& var = buffers_[layer_buffer_[l] + 1];
    mean = (T(momentum) * mean.array() + T(1 - momentum) * tape.batch_mean[l].array()).matrix();
    var = (T(momentum) * var.array() + T(1 - momentum) * tape.batch_var[l].array()).matrix();
  }
}

template class Net<float>;
template class Net<double>;

// ---------------------------------------------------------------------------

template <typename T>
void Adam<T>::step(std::vector<Matrix<T>>& params, const Gradients<T>& grads) {
  if (params.size() != grads.size()) throw ConfigError("Adam: parameter and gradient counts differ");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix<T>::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix<T>::Zero(p.rows(), p.cols()));
    }
  }
  if (m_.size() != params.size()) throw ConfigError("Adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const T b1 = T(beta1_), b2 = T(beta2_);
  const T step = T(lr_ / c1), inv_c2 = T(1.0 / c2), eps = T(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols()) {
      throw ConfigError("Adam: gradient " + std::to_string(i) + " has shape " +
                        shape_str(grads[i].rows(), grads[i].cols()) + " but parameter is " +
                        shape_str(params[i].rows(), params[i].cols()));
    }
    m_[i] = b1 * m_[i] + (T(1) - b1) * grads[i];
    v_[i] = b2 * v_[i] + (T(1) - b2) * grads[i].cwiseAbs2();
    params[i].array() -= step * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace specshape::nn
