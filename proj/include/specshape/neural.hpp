#pragma once

// Small feed-forward networks with hand-written reverse mode for exactly the
// layers the models need.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

namespace specshape::nn {

enum class LayerKind { dense, shared_dense, tanh, selu, batchnorm, maxpool_points };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

// dense/shared_dense: in -> out. batchnorm: in = out = channels. Activations
// and pooling carry the channel count through in/out as well.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int in = 0;
  int out = 0;
};

struct NetSpec {
  std::vector<LayerSpec> layers;

  int input_dim() const;
  int output_dim() const;
  // True if the input is a set of points (offsets required) rather than one row per sample.
  bool takes_points() const;
  // Throws ConfigError on incompatible adjacent dimensions.
  void validate() const;
};

nlohmann::json to_json(const NetSpec& spec);
NetSpec netspec_from_json(const nlohmann::json& j);

// Dense chain through `dims`. After every layer but the last: optional
// batchnorm, then the activation (tanh or selu). `activate_last` also
// applies the activation (without batchnorm) after the final layer.
NetSpec mlp(const std::vector<int>& dims, LayerKind activation, bool batchnorm, bool activate_last = false);

// Scalar SELU constants.
inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kBatchnormEps = 1e-5;
inline constexpr double kBatchnormMomentum = 0.9;

enum class Mode { train, eval };

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Rows x channels. For point sets, rows of sample b are offsets[b] ..
// offsets[b+1]-1; otherwise offsets is empty and each row is one sample.
template <typename T>
struct Tensor {
  Matrix<T> values;
  std::vector<int> offsets;

  int batch() const { return offsets.empty() ? static_cast<int>(values.rows()) : static_cast<int>(offsets.size()) - 1; }
  int channels() const { return static_cast<int>(values.cols()); }
};

// Values cached by a forward pass for the matching backward pass.
template <typename T>
struct Tape {
  Mode mode = Mode::eval;
  std::vector<Matrix<T>> inputs;           // input of every layer
  std::vector<Matrix<T>> outputs;          // output of every layer
  std::vector<std::vector<int>> offsets;   // offsets of every layer input
  std::vector<RowVector<T>> batch_mean;    // batchnorm, train mode
  std::vector<RowVector<T>> batch_var;     // biased
  std::vector<std::vector<int>> argmax;    // maxpool_points: batch x channels
};

template <typename T>
using Gradients = std::vector<Matrix<T>>;

template <typename T>
class Net {
 public:
  Net() = default;
  // Kaiming-uniform initialization (bound 1/sqrt(fan_in)) from a seeded stream.
  Net(NetSpec spec, std::uint64_t seed);

  const NetSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }

  // Per layer, in order: dense -> W (in x out), b (1 x out); batchnorm ->
  // gamma, beta (1 x C).
  std::vector<Matrix<T>>& parameters() { return params_; }
  const std::vector<Matrix<T>>& parameters() const { return params_; }
  // batchnorm running mean and running (biased) variance, 1 x C each.
  std::vector<Matrix<T>>& buffers() { return buffers_; }
  const std::vector<Matrix<T>>& buffers() const { return buffers_; }
  std::vector<std::string> parameter_names() const;
  std::vector<std::string> buffer_names() const;
  std::size_t parameter_count() const;

  // Eval mode processes rows one at a time, so each sample's output does not
  // depend on the rest of the batch. Train mode uses batch statistics.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Tape<T>* tape = nullptr) const;
  Matrix<T> forward(const Matrix<T>& x, Mode mode, Tape<T>* tape = nullptr) const;

  // Gradient with respect to the input; parameter gradients are added to
  // *grads when given.
  Matrix<T> backward(const Tape<T>& tape, const Matrix<T>& d_out, Gradients<T>* grads) const;

  // running = momentum * running + (1 - momentum) * batch, for every
  // batchnorm layer recorded in a train-mode tape.
  void update_running_stats(const Tape<T>& tape, double momentum = kBatchnormMomentum);

  Gradients<T> zero_gradients() const;

  template <typename U>
  Net<U> cast() const {
    Net<U> out;
    out.spec_ = spec_;
    out.seed_ = seed_;
    out.layer_param_ = layer_param_;
    out.layer_buffer_ = layer_buffer_;
    for (const auto& p : params_) out.params_.push_back(p.template cast<U>());
    for (const auto& b : buffers_) out.buffers_.push_back(b.template cast<U>());
    return out;
  }

 private:
  template <typename U>
  friend class Net;

  void check_input(const Tensor<T>& x) const;

  NetSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<Matrix<T>> params_;
  std::vector<Matrix<T>> buffers_;
  std::vector<int> layer_param_;   // first parameter index per layer, -1 if none
  std::vector<int> layer_buffer_;  // first buffer index per layer, -1 if none
};

extern template class Net<float>;
extern template class Net<double>;

template <typename T>
class Adam {
 public:
  explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Bias-corrected update; state is created lazily on the first call.
  void step(std::vector<Matrix<T>>& params, const Gradients<T>& grads);

  long steps() const { return t_; }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix<T>> m_, v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

// Mean over rows of (1/n) * squared row norm, where a row holds n points.
// Returns the loss; *grad (same shape as pred) receives d loss / d pred.
template <typename T>
double mse_loss(const Matrix<T>& pred, const Matrix<T>& target, int points_per_row, Matrix<T>* grad);

// Chamfer distance between point sets a (p x d) and b (q x d): mean nearest
// squared distance from a to b plus from b to a. Gradients optional.
template <typename T>
double chamfer(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>* grad_a = nullptr, Matrix<T>* grad_b = nullptr);

// ---------------------------------------------------------------------------
// Checkpoints: one compact JSON line (metadata plus, per net, its spec, seed
// and tensor shapes), a newline, then every tensor as little-endian float32 in
// manifest order.

struct Checkpoint {
  nlohmann::json metadata;
  std::map<std::string, Net<float>> nets;
};

void write_checkpoint(std::ostream& out, const nlohmann::json& metadata,
                      const std::vector<std::pair<std::string, const Net<float>*>>& nets);
Checkpoint read_checkpoint(std::istream& in, const std::string& name = "<stream>");
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& metadata,
                     const std::vector<std::pair<std::string, const Net<float>*>>& nets);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace specshape::nn
