#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

// Read-only views into a flat parameter vector, in layout order.
struct DenseView {
  const double* weight;  // [out, in] row-major
  const double* bias;    // [out]
  std::size_t in;
  std::size_t out;
};

struct MutDenseView {
  double* weight;
  double* bias;
  std::size_t in;
  std::size_t out;
};

void dense_forward(const DenseView& layer, std::span<const double> x, std::span<double> y) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* row = layer.weight + o * layer.in;
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

// Accumulates dW += dy (x)^T, db += dy.
void dense_backward_params(const MutDenseView& grad, std::span<const double> x,
                           std::span<const double> dy) {
  for (std::size_t o = 0; o < grad.out; ++o) {
    double* row = grad.weight + o * grad.in;
    for (std::size_t i = 0; i < grad.in; ++i) row[i] += dy[o] * x[i];
    grad.bias[o] += dy[o];
  }
}

// Writes softmax(z) - onehot(label) into dz and returns -log softmax(z)[label].
double softmax_xent(std::span<const double> z, std::size_t label, std::span<double> dz) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    dz[c] = std::exp(z[c] - zmax);
    sum += dz[c];
  }
  for (std::size_t c = 0; c < z.size(); ++c) dz[c] /= sum;
  dz[label] -= 1.0;
  return std::log(sum) + zmax - z[label];
}

void check_example(const ModelSpec& spec, const LabeledExample& ex) {
  if (ex.features.size() != spec.input_dim) {
    throw ContractError("example has " + std::to_string(ex.features.size()) +
                        " features, model expects " + std::to_string(spec.input_dim));
  }
  if (ex.label >= spec.num_classes) {
    throw ContractError("label " + std::to_string(ex.label) + " out of range");
  }
}

void check_params(const ModelSpec& spec, const ModelParameters& params) {
  if (params.layout != spec.layout() || params.values.size() != spec.param_count()) {
    throw ContractError("parameter layout does not match model spec");
  }
}

// Runs the network on one example. `hidden` receives tanh activations (Mlp1).
void forward_one(const ModelSpec& spec, const double* p, std::span<const double> x,
                 std::span<double> hidden, std::span<double> z) {
  const std::size_t d = spec.input_dim;
  const std::size_t c = spec.num_classes;
  if (spec.kind == ModelKind::kLogisticRegression) {
    dense_forward({p, p + c * d, d, c}, x, z);
    return;
  }
  const std::size_t h = spec.hidden_dim;
  const double* w2 = p + h * d + h;
  dense_forward({p, p + h * d, d, h}, x, hidden);
  for (double& a : hidden) a = std::tanh(a);
  dense_forward({w2, w2 + c * h, h, c}, hidden, z);
}

}  // namespace

std::size_t TensorShape::element_count() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void ModelParameters::validate() const {
  std::size_t total = 0;
  for (const auto& t : layout) total += t.element_count();
  if (total != values.size()) {
    throw ContractError("layout describes " + std::to_string(total) + " values, vector holds " +
                        std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ContractError("non-finite parameter value");
  }
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ContractError("input_dim must be positive");
  if (num_classes < 2) throw ContractError("num_classes must be at least 2");
  if (kind == ModelKind::kMlp1 && hidden_dim == 0) {
    throw ContractError("hidden_dim must be positive");
  }
}

std::size_t ModelSpec::param_count() const {
  if (kind == ModelKind::kLogisticRegression) return (input_dim + 1) * num_classes;
  return (input_dim + 1) * hidden_dim + (hidden_dim + 1) * num_classes;
}

std::vector<TensorShape> ModelSpec::layout() const {
  if (kind == ModelKind::kLogisticRegression) {
    return {{"weight", {num_classes, input_dim}}, {"bias", {num_classes}}};
  }
  return {{"hidden.weight", {hidden_dim, input_dim}},
          {"hidden.bias", {hidden_dim}},
          {"output.weight", {num_classes, hidden_dim}},
          {"output.bias", {num_classes}}};
}

ModelParameters init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParameters params;
  params.layout = spec.layout();
  params.values.reserve(spec.param_count());
  Rng rng(seed);
  for (const auto& tensor : params.layout) {
    if (tensor.dims.size() == 1) {
      params.values.insert(params.values.end(), tensor.dims[0], 0.0);
      continue;
    }
    const double fan_out = static_cast<double>(tensor.dims[0]);
    const double fan_in = static_cast<double>(tensor.dims[1]);
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < tensor.element_count(); ++i) {
      params.values.push_back(rng.uniform(-s, s));
    }
  }
  return params;
}

std::vector<double> logits(const ModelSpec& spec, const ModelParameters& params,
                           std::span<const double> features) {
  check_params(spec, params);
  if (features.size() != spec.input_dim) throw ContractError("feature dimension mismatch");
  std::vector<double> hidden(spec.kind == ModelKind::kMlp1 ? spec.hidden_dim : 0);
  std::vector<double> z(spec.num_classes);
  forward_one(spec, params.values.data(), features, hidden, z);
  return z;
}

LossGrad forward_loss_grad(const ModelSpec& spec, const ModelParameters& params,
                           std::span<const LabeledExample> batch) {
  check_params(spec, params);
  if (batch.empty()) throw ContractError("forward_loss_grad: empty batch");
  for (const auto& ex : batch) check_example(spec, ex);

  const std::size_t d = spec.input_dim;
  const std::size_t c = spec.num_classes;
  const std::size_t h = spec.hidden_dim;
  const double* p = params.values.data();

  LossGrad out;
  out.grad.layout = params.layout;
  out.grad.values.assign(params.values.size(), 0.0);
  double* g = out.grad.values.data();

  const bool mlp = spec.kind == ModelKind::kMlp1;
  std::vector<double> hidden(mlp ? h : 0);
  std::vector<double> dhidden(mlp ? h : 0);
  std::vector<double> z(c);
  std::vector<double> dz(c);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  double loss_sum = 0.0;
  for (const auto& ex : batch) {
    forward_one(spec, p, ex.features, hidden, z);
    loss_sum += softmax_xent(z, ex.label, dz);
    for (double& v : dz) v *= inv_n;

    if (!mlp) {
      dense_backward_params({g, g + c * d, d, c}, ex.features, dz);
      continue;
    }
    const double* w2 = p + h * d + h;
    double* g2 = g + h * d + h;
    dense_backward_params({g2, g2 + c * h, h, c}, hidden, dz);
    for (std::size_t j = 0; j < h; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < c; ++k) acc += w2[k * h + j] * dz[k];
      dhidden[j] = acc * (1.0 - hidden[j] * hidden[j]);
    }
    dense_backward_params({g, g + h * d, d, h}, ex.features, dhidden);
  }
  out.loss = loss_sum * inv_n;
  return out;
}

void proximal_sgd_step(std::span<double> w, std::span<const double> grad,
                       std::span<const double> anchor, double lr, double mu) {
  if (grad.size() != w.size() || anchor.size() != w.size()) {
    throw ContractError("proximal_sgd_step: length mismatch");
  }
  if (mu == 0.0) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];
    return;
  }
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * (grad[i] + mu * (w[i] - anchor[i]));
}

TrainResult local_train(const ModelSpec& spec, const ModelParameters& start,
                        std::span<const LabeledExample> data,
                        const LocalTrainOptions& opts, const ModelParameters& anchor) {
  if (data.empty()) throw ContractError("local_train: client has no data");
  if (opts.epochs == 0) throw ContractError("local_train: epochs must be >= 1");
  if (opts.batch_size == 0) throw ContractError("local_train: batch_size must be >= 1");
  if (!(opts.prox_mu >= 0.0)) throw ContractError("local_train: prox_mu must be >= 0");
  if (!start.same_layout(anchor) || start.size() != anchor.size()) {
    throw ContractError("local_train: anchor layout differs from start");
  }
  check_params(spec, start);

  TrainResult result{start, 0.0};
  std::vector<double>& w = result.params.values;
  std::vector<LabeledExample> batch;
  batch.reserve(opts.batch_size);

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto order = shuffled_indices(data.size(), derive_seed(opts.seed, {epoch}));
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += opts.batch_size) {
      const std::size_t end = std::min(order.size(), begin + opts.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(data[order[i]]);

      LossGrad lg = forward_loss_grad(spec, result.params, batch);
      epoch_loss += lg.loss * static_cast<double>(batch.size());
      proximal_sgd_step(w, lg.grad.values, anchor.values, opts.lr, opts.prox_mu);
    }
    result.final_loss = epoch_loss / static_cast<double>(data.size());
  }
  return result;
}

double evaluate_classifier(const ModelSpec& spec, const ModelParameters& params,
                           std::span<const LabeledExample> data) {
  check_params(spec, params);
  if (data.empty()) throw ContractError("evaluate_classifier: empty data");
  std::vector<double> hidden(spec.kind == ModelKind::kMlp1 ? spec.hidden_dim : 0);
  std::vector<double> z(spec.num_classes);
  std::size_t correct = 0;
  for (const auto& ex : data) {
    check_example(spec, ex);
    forward_one(spec, params.values.data(), ex.features, hidden, z);
    // max_element returns the first maximum, which is the lowest class index.
    const auto predicted = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    if (predicted == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

const char* to_string(ModelKind kind) {
  return kind == ModelKind::kLogisticRegression ? "logreg" : "mlp1";
}

}  // namespace fedsim
