// Finite-difference checks of every network op and of the full loss.

#include <algorithm>

#include "acceptance.hpp"
#include "gradcheck.hpp"
#include "specshape/spectral_ae.hpp"

namespace specshape::acceptance {

namespace {

using nn::Matrix;
using testing::check_gradients;
using testing::GradCheckOptions;
using testing::GradCheckResult;
using testing::random_probes;

constexpr double kTol = 1e-4;
constexpr int kProbes = 100;
constexpr int kMinEvaluated = 90;  // the rest may straddle a kink and are skipped
constexpr double kSeconds = 60.0;

Matrix<double> random_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.uniform(-1.0, 1.0);
  return m;
}

// Signature of every SELU input sign and every max-pool winner in a tape.
void append_switches(const nn::Net<double>& net, const nn::Tape<double>& tape, std::vector<int>& sig) {
  const auto& layers = net.spec().layers;
  for (std::size_t l = 0; l < layers.size() && l < tape.inputs.size(); ++l) {
    if (layers[l].kind != nn::LayerKind::selu) continue;
    const Matrix<double>& x = tape.inputs[l];
    for (Eigen::Index i = 0; i < x.size(); ++i) sig.push_back(x.data()[i] > 0.0);
  }
  for (const auto& a : tape.argmax) sig.insert(sig.end(), a.begin(), a.end());
}

// d(sum(out .* R)) / d(parameters, input).
GradCheckResult net_check(nn::Net<double>& net, nn::Tensor<double> x, nn::Mode mode, std::uint64_t seed,
                          const GradCheckOptions& fd = {}) {
  nn::Tape<double> tape;
  const auto y = net.forward(x, mode, &tape);
  const Matrix<double> R = random_matrix(static_cast<int>(y.values.rows()), y.channels(), seed + 1);
  auto grads = net.zero_gradients();
  const Matrix<double> dx = net.backward(tape, R, &grads);
  std::vector<Matrix<double>*> values;
  std::vector<const Matrix<double>*> gblocks;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    values.push_back(&net.parameters()[i]);
    gblocks.push_back(&grads[i]);
  }
  values.push_back(&x.values);
  gblocks.push_back(&dx);
  const auto probes = random_probes(values, gblocks, kProbes, seed + 2);
  return check_gradients([&] { return (net.forward(x, mode).values.array() * R.array()).sum(); }, probes, fd,
                         [&] {
                           nn::Tape<double> t;
                           net.forward(x, mode, &t);
                           std::vector<int> sig;
                           append_switches(net, t, sig);
                           return sig;
                         });
}

GradCheckResult loss_check(ModelNets<double>& nets, InputKind input, int n, const Batch<double>& batch,
                           const LossOptions& opt, int group, nn::Mode mode, std::uint64_t seed,
                           const GradCheckOptions& fd = {}) {
  std::vector<nn::Gradients<double>> grads;
  compute_loss(nets, input, n, batch, opt, mode, &grads);
  nn::Net<double>* net[] = {&nets.encoder, &nets.decoder, &nets.pi, &nets.rho};
  std::vector<Matrix<double>*> values;
  std::vector<const Matrix<double>*> gblocks;
  for (std::size_t i = 0; i < net[group]->parameters().size(); ++i) {
    values.push_back(&net[group]->parameters()[i]);
    gblocks.push_back(&grads[group][i]);
  }
  const auto probes = random_probes(values, gblocks, kProbes, seed);
  auto switches = [&] {
    std::vector<nn::Tape<double>> tapes;
    compute_loss<double>(nets, input, n, batch, opt, mode, nullptr, &tapes);
    std::vector<int> sig;
    for (int t = 0; t < 4; ++t) append_switches(*net[t], tapes[t], sig);
    if (input == InputKind::pointcloud) {
      // Chamfer nearest-neighbour choices.
      const Matrix<double> z = nets.encoder.forward(batch.shapes, mode).values;
      const Matrix<double> xr = nets.decoder.forward(z, mode);
      for (int b = 0; b + 1 < static_cast<int>(batch.shapes.offsets.size()); ++b) {
        Matrix<double> pred(n, 3);
        for (int i = 0; i < n; ++i)
          for (int c = 0; c < 3; ++c) pred(i, c) = xr(b, 3 * i + c);
        const int o0 = batch.shapes.offsets[b], o1 = batch.shapes.offsets[b + 1];
        const Matrix<double> cloud = batch.shapes.values.middleRows(o0, o1 - o0);
        for (int i = 0; i < n; ++i) {
          Eigen::Index j;
          (cloud.rowwise() - pred.row(i)).rowwise().squaredNorm().minCoeff(&j);
          sig.push_back(static_cast<int>(j));
        }
        for (int i = 0; i < cloud.rows(); ++i) {
          Eigen::Index j;
          (pred.rowwise() - cloud.row(i)).rowwise().squaredNorm().minCoeff(&j);
          sig.push_back(static_cast<int>(j));
        }
      }
    }
    return sig;
  };
  return check_gradients([&] { return compute_loss(nets, input, n, batch, opt, mode).total; }, probes, fd, switches);
}

struct Named {
  std::string name;
  GradCheckResult r;
};

std::vector<Named> run_all() {
  using nn::LayerKind;
  using nn::Mode;
  std::vector<Named> out;

  nn::Net<double> tanh_net(nn::mlp({7, 9, 6, 4}, LayerKind::tanh, false, true), 11);
  for (Mode m : {Mode::train, Mode::eval}) {
    out.push_back({m == Mode::train ? "dense+tanh (train)" : "dense+tanh (eval)",
                   net_check(tanh_net, {random_matrix(5, 7, 12), {}}, m, 13)});
  }
  nn::Net<double> selu_net(nn::mlp({6, 8, 8, 3}, LayerKind::selu, false), 21);
  out.push_back({"dense+selu", net_check(selu_net, {random_matrix(4, 6, 22, 2.0), {}}, Mode::train, 23)});

  nn::Net<double> bn(nn::mlp({5, 8, 6, 3}, LayerKind::selu, true), 31);
  for (auto& b : bn.buffers()) b = random_matrix(1, static_cast<int>(b.cols()), 32, 0.5).array() + 1.0;
  for (auto& p : bn.parameters()) p += random_matrix(static_cast<int>(p.rows()), static_cast<int>(p.cols()), 33, 0.1);
  GradCheckOptions small;
  small.h = 1e-5;
  out.push_back({"batchnorm (train)", net_check(bn, {random_matrix(6, 5, 34), {}}, Mode::train, 35, small)});
  out.push_back({"batchnorm (eval)", net_check(bn, {random_matrix(6, 5, 34), {}}, Mode::eval, 35)});

  nn::NetSpec pn{{{LayerKind::shared_dense, 3, 8},
                  {LayerKind::batchnorm, 8, 8},
                  {LayerKind::shared_dense, 8, 10},
                  {LayerKind::batchnorm, 10, 10},
                  {LayerKind::maxpool_points, 10, 10},
                  {LayerKind::dense, 10, 6},
                  {LayerKind::tanh, 6, 6}}};
  nn::Net<double> pointnet(pn, 41);
  const nn::Tensor<double> cloud{random_matrix(23, 3, 42), {0, 7, 15, 23}};
  out.push_back({"shared dense+maxpool (train)", net_check(pointnet, cloud, Mode::train, 43)});
  out.push_back({"shared dense+maxpool (eval)", net_check(pointnet, cloud, Mode::eval, 43)});

  {
    const Matrix<double> target = random_matrix(3, 12, 81);
    Matrix<double> pred = random_matrix(3, 12, 82), g;
    nn::mse_loss<double>(pred, target, 4, &g);
    const auto probes = random_probes<Matrix<double>>({&pred}, {&g}, kProbes, 83);
    out.push_back({"mse", check_gradients([&] { return nn::mse_loss<double>(pred, target, 4, nullptr); }, probes)});
  }
  {
    Matrix<double> a = random_matrix(20, 3, 91), b = random_matrix(31, 3, 92), ga, gb;
    nn::chamfer<double>(a, b, &ga, &gb);
    const auto probes = random_probes<Matrix<double>>({&a, &b}, {&ga, &gb}, kProbes, 93);
    out.push_back({"chamfer", check_gradients([&] { return nn::chamfer<double>(a, b); }, probes, {}, [&] {
                     std::vector<int> sig;
                     for (int i = 0; i < a.rows(); ++i) {
                       Eigen::Index j;
                       (b.rowwise() - a.row(i)).rowwise().squaredNorm().minCoeff(&j);
                       sig.push_back(static_cast<int>(j));
                     }
                     for (int j = 0; j < b.rows(); ++j) {
                       Eigen::Index i;
                       (a.rowwise() - b.row(j)).rowwise().squaredNorm().minCoeff(&i);
                       sig.push_back(static_cast<int>(i));
                     }
                     return sig;
                   })});
  }

  const char* group_names[] = {"E", "D", "pi", "rho"};
  {
    const int n = 5, k = 4;
    ModelNets<double> nets = build_dense_model(n, k, 2, 11).nets.cast<double>();
    Batch<double> batch;
    batch.shapes.values = random_matrix(4, n * 2, 12);
    batch.spectra = random_matrix(4, k, 13).array().abs().matrix();
    for (int g = 0; g < 4; ++g) {
      out.push_back({std::string("loss wrt ") + group_names[g] + " (eval)",
                     loss_check(nets, InputKind::dense_template, n, batch, {0.7, true}, g, Mode::eval, 100 + g)});
      out.push_back({std::string("loss wrt ") + group_names[g] + " (train)",
                     loss_check(nets, InputKind::dense_template, n, batch, {0.7, true}, g, Mode::train, 300 + g, small)});
    }
  }
  {
    const int n = 6, k = 3;
    ModelNets<double> nets = build_pointcloud_model(k, n, 21).nets.cast<double>();
    Batch<double> batch;
    batch.shapes.values = random_matrix(17, 3, 22);
    batch.shapes.offsets = {0, 9, 17};
    batch.spectra = random_matrix(2, k, 23).array().abs().matrix();
    for (int g = 0; g < 4; ++g) {
      out.push_back({std::string("point-cloud loss wrt ") + group_names[g],
                     loss_check(nets, InputKind::pointcloud, n, batch, {0.5, true}, g, Mode::eval, 500 + g)});
    }
  }
  return out;
}

Outcome gradient_suite() {
  const Stopwatch clock;
  const auto checks = run_all();
  const double t = clock.seconds();
  bool pass = t < kSeconds;
  double worst = 0.0;
  int fewest = kProbes;
  std::string failures;
  for (const auto& c : checks) {
    worst = std::max(worst, c.r.max_rel_error);
    fewest = std::min(fewest, c.r.probes);
    if (c.r.max_rel_error >= kTol || c.r.probes < kMinEvaluated) {
      pass = false;
      failures += "; " + c.name + " err " + fmt(c.r.max_rel_error) + " on " + std::to_string(c.r.probes);
    }
  }
  return {pass, std::to_string(checks.size()) + " checks x " + std::to_string(kProbes) + " probes, max relative error " +
                    fmt(worst) + " < " + fmt(kTol) + ", fewest evaluated " + std::to_string(fewest) + " >= " +
                    std::to_string(kMinEvaluated) + ", " + fmt(t, 3) + " s < " + fmt(kSeconds, 3) + " s" + failures};
}

}  // namespace

std::vector<Criterion> gradient_criteria() { return {{"gradient-suite", gradient_suite}}; }

}  // namespace specshape::acceptance
