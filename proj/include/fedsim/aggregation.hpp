#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

// A trained local model as reported back to the server. Clients send full
// weight vectors; the server derives any deltas itself.
struct ClientUpdate {
  std::size_t client_id = 0;
  ModelParameters params;
  std::size_t num_examples = 1;
  double train_loss = 0.0;
};

enum class AggregatorKind { kFedAvg, kFedProx, kFedAdam };

struct AggregatorOptions {
  double prox_mu = 0.01;    // FedProx, applied client-side
  double server_lr = 0.01;  // FedAdam eta
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;

  bool operator==(const AggregatorOptions&) const = default;
};

struct AggregatorState {
  AggregatorKind kind = AggregatorKind::kFedAvg;
  AggregatorOptions options;
  // FedAdam moments, same length as the global parameters. Empty otherwise.
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  // Proximal coefficient clients should use this round (0 unless FedProx).
  double client_prox_mu() const {
    return kind == AggregatorKind::kFedProx ? options.prox_mu : 0.0;
  }
};

struct AggregationResult {
  ModelParameters global;
  AggregatorState state;
};

// Throws ConfigError for out-of-range hyperparameters.
AggregatorState make_aggregator(AggregatorKind kind, const AggregatorOptions& options,
                                std::size_t param_count);

// Example-weighted mean sum_k (n_k / sum n) w_k, accumulated in ascending
// client_id order. Client ids must be unique.
ModelParameters weighted_average(std::span<const ClientUpdate> updates);

// FedAvg (and FedProx, whose server rule is identical). `global` is unused.
ModelParameters fedavg_round(const ModelParameters& global, std::span<const ClientUpdate> updates);

// Server-side Adam on the pseudo-gradient delta = weighted_average - global:
//   m <- b1 m + (1-b1) delta
//   v <- b2 v + (1-b2) delta^2
//   x <- x + eta m / (sqrt(v) + tau)
// No bias correction.
AggregationResult fedadam_round(const AggregatorState& state, const ModelParameters& global,
                                std::span<const ClientUpdate> updates);

// Dispatches on state.kind.
AggregationResult aggregate(const AggregatorState& state, const ModelParameters& global,
                            std::span<const ClientUpdate> updates);

const char* to_string(AggregatorKind kind);
std::optional<AggregatorKind> parse_aggregator_kind(std::string_view name);

}  // namespace fedsim
