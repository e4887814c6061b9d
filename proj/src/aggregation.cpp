#include "fedsim/aggregation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "fedsim/error.hpp"

namespace fedsim {

AggregatorState make_aggregator(AggregatorKind kind, const AggregatorOptions& options,
                                std::size_t param_count) {
  const auto& o = options;
  if (kind == AggregatorKind::kFedProx && !(o.prox_mu >= 0.0 && std::isfinite(o.prox_mu))) {
    throw ConfigError("aggregator.mu must be a non-negative number");
  }
  if (kind == AggregatorKind::kFedAdam) {
    if (!(o.server_lr > 0.0 && std::isfinite(o.server_lr))) {
      throw ConfigError("aggregator.server_lr must be positive");
    }
    if (!(o.beta1 >= 0.0 && o.beta1 < 1.0)) throw ConfigError("aggregator.beta1 must be in [0,1)");
    if (!(o.beta2 >= 0.0 && o.beta2 < 1.0)) throw ConfigError("aggregator.beta2 must be in [0,1)");
    if (!(o.tau > 0.0 && std::isfinite(o.tau))) throw ConfigError("aggregator.tau must be positive");
  }
  AggregatorState state{kind, options, {}, {}};
  if (kind == AggregatorKind::kFedAdam) {
    state.first_moment.assign(param_count, 0.0);
    state.second_moment.assign(param_count, 0.0);
  }
  return state;
}

ModelParameters weighted_average(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ContractError("weighted_average: no client updates");

  std::vector<const ClientUpdate*> ordered;
  ordered.reserve(updates.size());
  for (const auto& u : updates) ordered.push_back(&u);
  std::sort(ordered.begin(), ordered.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  const ModelParameters& first = ordered.front()->params;
  double total = 0.0;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const ClientUpdate& u = *ordered[i];
    if (i > 0 && u.client_id == ordered[i - 1]->client_id) {
      throw ContractError("weighted_average: duplicate client id " + std::to_string(u.client_id));
    }
    if (u.num_examples == 0) throw ContractError("weighted_average: client reported 0 examples");
    if (!u.params.same_layout(first) || u.params.size() != first.size()) {
      throw ContractError("weighted_average: parameter layouts differ");
    }
    total += static_cast<double>(u.num_examples);
  }

  ModelParameters out;
  out.layout = first.layout;
  out.values.resize(first.size());
  std::vector<double> lo = first.values;
  std::vector<double> hi = first.values;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const ClientUpdate& u = *ordered[i];
    const double weight = static_cast<double>(u.num_examples) / total;
    const auto& w = u.params.values;
    for (std::size_t j = 0; j < w.size(); ++j) {
      out.values[j] = i == 0 ? weight * w[j] : out.values[j] + weight * w[j];
      lo[j] = std::min(lo[j], w[j]);
      hi[j] = std::max(hi[j], w[j]);
    }
  }
  // Weights may not sum to exactly 1 in floating point; the exact mean lies
  // inside the clients' range, so clamp the rounding back in.
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    out.values[j] = std::clamp(out.values[j], lo[j], hi[j]);
  }
  return out;
}

ModelParameters fedavg_round(const ModelParameters& /*global*/,
                             std::span<const ClientUpdate> updates) {
  return weighted_average(updates);
}

AggregationResult fedadam_round(const AggregatorState& state, const ModelParameters& global,
                                std::span<const ClientUpdate> updates) {
  if (state.kind != AggregatorKind::kFedAdam) {
    throw ContractError("fedadam_round: aggregator is not FedAdam");
  }
  const ModelParameters avg = weighted_average(updates);
  if (!avg.same_layout(global) || avg.size() != global.size() ||
      state.first_moment.size() != global.size() ||
      state.second_moment.size() != global.size()) {
    throw ContractError("fedadam_round: layout mismatch between global, updates and moments");
  }

  const auto& o = state.options;
  AggregationResult result{global, state};
  auto& x = result.global.values;
  auto& m = result.state.first_moment;
  auto& v = result.state.second_moment;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double delta = avg.values[j] - x[j];
    m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * delta;
    v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * delta * delta;
    x[j] += o.server_lr * m[j] / (std::sqrt(v[j]) + o.tau);
  }
  return result;
}

AggregationResult aggregate(const AggregatorState& state, const ModelParameters& global,
                            std::span<const ClientUpdate> updates) {
  if (state.kind == AggregatorKind::kFedAdam) return fedadam_round(state, global, updates);
  return {fedavg_round(global, updates), state};
}

const char* to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kFedAvg:
      return "fedavg";
    case AggregatorKind::kFedProx:
      return "fedprox";
    case AggregatorKind::kFedAdam:
      return "fedadam";
  }
  return "?";
}

std::optional<AggregatorKind> parse_aggregator_kind(std::string_view name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "fedavg") return AggregatorKind::kFedAvg;
  if (lower == "fedprox") return AggregatorKind::kFedProx;
  if (lower == "fedadam") return AggregatorKind::kFedAdam;
  return std::nullopt;
}

}  // namespace fedsim
