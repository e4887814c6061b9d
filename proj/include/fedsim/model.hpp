#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedsim {

enum class ModelKind { kLogisticRegression, kMlp1 };

struct TensorShape {
  std::string name;
  std::vector<std::size_t> dims;

  std::size_t element_count() const;
  bool operator==(const TensorShape&) const = default;
};

// Flat parameter vector plus the tensor layout it is carved into.
struct ModelParameters {
  std::vector<double> values;
  std::vector<TensorShape> layout;

  std::size_t size() const { return values.size(); }
  bool same_layout(const ModelParameters& other) const { return layout == other.layout; }
  // Throws ContractError if the layout does not cover `values` or any value
  // is non-finite.
  void validate() const;

  bool operator==(const ModelParameters&) const = default;
};

struct ModelSpec {
  ModelKind kind = ModelKind::kMlp1;
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::size_t hidden_dim = 1;  // Mlp1 only

  void validate() const;
  std::size_t param_count() const;
  std::vector<TensorShape> layout() const;
};

struct LabeledExample {
  std::vector<double> features;
  std::size_t label = 0;

  bool operator==(const LabeledExample&) const = default;
};

struct LossGrad {
  double loss = 0.0;
  ModelParameters grad;
};

struct TrainResult {
  ModelParameters params;
  double final_loss = 0.0;
};

struct LocalTrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 4;
  double lr = 0.001;
  // FedProx proximal coefficient; 0 disables the term.
  double prox_mu = 0.0;
  std::uint64_t seed = 0;
};

// Glorot-uniform weights, zero biases. Deterministic in (spec, seed).
ModelParameters init_params(const ModelSpec& spec, std::uint64_t seed);

// Class scores for one example (pre-softmax).
std::vector<double> logits(const ModelSpec& spec, const ModelParameters& params,
                           std::span<const double> features);

// Mean softmax cross-entropy over `batch` and its exact gradient.
LossGrad forward_loss_grad(const ModelSpec& spec, const ModelParameters& params,
                           std::span<const LabeledExample> batch);

// w <- w - lr * (grad + mu * (w - anchor)). The proximal term is skipped
// entirely when mu == 0, so that case is bitwise plain SGD.
void proximal_sgd_step(std::span<double> w, std::span<const double> grad,
                       std::span<const double> anchor, double lr, double mu);

// Mini-batch SGD for `opts.epochs` passes. Each epoch visits the data in a
// fresh Fisher-Yates order seeded from (opts.seed, epoch); the last short
// batch is kept. With prox_mu > 0 every step adds mu * (w - anchor) to the
// gradient. final_loss is the example-weighted mean batch loss of the last
// epoch, measured before each step.
TrainResult local_train(const ModelSpec& spec, const ModelParameters& start,
                        std::span<const LabeledExample> data,
                        const LocalTrainOptions& opts, const ModelParameters& anchor);

// Fraction of examples whose argmax class (lowest index on ties) equals the label.
double evaluate_classifier(const ModelSpec& spec, const ModelParameters& params,
                           std::span<const LabeledExample> data);

const char* to_string(ModelKind kind);

}  // namespace fedsim
